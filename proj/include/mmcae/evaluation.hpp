/*
 * Copyright 2026 The mmcae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "mmcae/data.hpp"
#include "mmcae/training.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmcae {

// --- inference and metrics ---------------------------------------------------

/// Class id for one sample presented in `mode`.
int predict(const MultiModalAE& model, const LinearClassifier& clf, const MultiModalSample& sample, InputMode mode);
std::vector<int> predict(const MultiModalAE& model, const LinearClassifier& clf,
                         std::span<const MultiModalSample> samples, InputMode mode);

enum class Averaging { Weighted, Macro };

std::string_view to_string(Averaging a);
Averaging parse_averaging(std::string_view text);

struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  MatrixXr confusion;  // rows: true class, columns: predicted class
  /// Some class had no predictions or no true samples; its precision, recall
  /// or F1 was taken as 0.
  bool zero_division = false;
};

MetricSet compute_metrics(std::span<const int> predictions, std::span<const int> labels, int num_classes,
                          Averaging averaging = Averaging::Weighted);

/// Arithmetic mean of metrics and confusion matrices.
MetricSet average_metrics(std::span<const MetricSet> sets);

// --- experiments -------------------------------------------------------------

enum class ExperimentId { TrainOnJoint, TrainOnA, TrainOnV, TrainOnUnion };

inline constexpr ExperimentId kAllExperiments[] = {ExperimentId::TrainOnJoint, ExperimentId::TrainOnA,
                                                   ExperimentId::TrainOnV, ExperimentId::TrainOnUnion};

/// "exp1".."exp4".
std::string_view to_string(ExperimentId e);
/// The representation the probe of an experiment is trained on.
ProbeSet probe_set(ExperimentId e);

struct ExperimentResult {
  ExperimentId experiment = ExperimentId::TrainOnJoint;
  Index train_rows = 0;
  std::array<MetricSet, 3> by_mode;  // indexed like kAllModes
};

/// Trains the experiment's probe on the `train` representations and scores
/// it on `test` in every input mode.
ExperimentResult run_experiment_grid(const MultiModalAE& model, std::span<const MultiModalSample> train,
                                     std::span<const MultiModalSample> test, ExperimentId experiment,
                                     int num_classes, const ClassifierConfig& probe = {},
                                     Averaging averaging = Averaging::Weighted);

// --- cross-validation ----------------------------------------------------------

struct CrossValidationConfig {
  int folds = 7;
  Index holdout_per_class = 10;
  std::uint64_t seed = 0;
  std::string architecture = "paper";
  /// Loss variant is set per job; every other field applies to all variants.
  TrainConfig train;
  ClassifierConfig probe;
  Averaging averaging = Averaging::Weighted;
  int jobs = 1;
  /// When set, each trained autoencoder is saved as
  /// <dir>/<variant>-fold<k>.ckpt.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Runs only these fold indices (all when empty).
  std::vector<int> only_folds;
};

void validate(const CrossValidationConfig& cfg);

/// Outcome of one (variant, fold) job.
struct FoldRun {
  int fold = 0;
  bool ok = false;
  std::string error;
  int best_epoch = 0;
  int epochs_run = 0;
  double best_metric = 0.0;
  std::uint64_t init_seed = 0;
  std::uint64_t parameter_hash = 0;
  LossConfig loss;  // with calibrated weights
  std::array<ExperimentResult, 4> experiments;
};

struct CellSummary {
  MetricSet mean;
  int folds_used = 0;
  bool failed = false;  // no fold produced this cell
};

struct VariantReport {
  Variant variant = Variant::Proposed;
  std::vector<FoldRun> folds;
  std::array<std::array<CellSummary, 3>, 4> cells;  // [experiment][mode]
};

struct FoldIds {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct EvaluationReport {
  std::vector<VariantReport> variants;
  std::vector<std::string> class_names;
  std::vector<std::string> validation_ids;
  std::vector<FoldIds> folds;
  /// Effective configuration as JSON text.
  std::string config_echo = "{}";
  double wall_seconds = 0.0;

  const VariantReport& at(Variant v) const;
  /// Every cell populated or failure-marked.
  bool complete() const;
  bool any_failure() const;
};

/// Holdout split, stratified folds, then for each (variant, fold) job:
/// train an autoencoder early-stopped on the holdout and run all four
/// experiments. Job seeds derive from (seed, variant, fold) only, so results
/// do not depend on cfg.jobs. A failing job is recorded, not rethrown.
EvaluationReport cross_validate(const Dataset& ds, std::span<const Variant> variants,
                                const CrossValidationConfig& cfg);

/// Deterministic machine-readable form (no timings).
std::string report_to_json(const EvaluationReport& report);
/// Text tables: one Table-5-style block per variant plus a Table-6-style
/// comparison of Experiment 1 across variants.
std::string report_to_text(const EvaluationReport& report);

/// Throws when a fold's test ids meet its train ids or the holdout.
void check_no_leakage(const EvaluationReport& report);

// --- embeddings ----------------------------------------------------------------

struct EmbeddingRow {
  std::string id;
  InputMode mode = InputMode::Joint;
  int label = 0;
  VectorXr values;
  double x2d = 0.0;
  double y2d = 0.0;
};

/// Projection onto the top two principal directions of the rows of `x`,
/// each direction signed so its largest-magnitude coefficient is positive.
MatrixXr principal_projection_2d(const MatrixXr& x);

/// Three rows per sample (joint, a, v) with a pooled 2-D projection.
std::vector<EmbeddingRow> compute_embeddings(const MultiModalAE& model, std::span<const MultiModalSample> samples);

/// Tab-separated: optional "# comment" line, header, then sample_id, mode,
/// label, z0..z{d-1}, x2d, y2d.
void export_embeddings(const MultiModalAE& model, std::span<const MultiModalSample> samples,
                       const std::filesystem::path& path, const std::string& comment = {});
std::vector<EmbeddingRow> read_embeddings(const std::filesystem::path& path);

// --- reconstruction bands ---------------------------------------------------------

/// Zero-phase split of x into components at or below / above cutoff_hz.
std::pair<VectorXr, VectorXr> band_split(const VectorXr& x, double cutoff_hz, double sample_rate);

struct BandError {
  double low_mse = 0.0;
  double high_mse = 0.0;
  double total_mse = 0.0;
  /// Error energy over signal energy, per band and overall.
  double low_relative = 0.0;
  double high_relative = 0.0;
  double total_relative = 0.0;
};

/// Pooled band errors of reconstructions against originals (rows are
/// signals).
BandError band_error(const MatrixXr& original, const MatrixXr& reconstruction, double cutoff_hz, double sample_rate);

struct BandReport {
  double cutoff_hz = 0.0;
  double sample_rate = 0.0;
  Index samples = 0;
  std::array<std::array<BandError, 2>, 3> errors;  // [input mode][0 = acoustic, 1 = vibration]

  const BandError& at(InputMode mode, bool vibration) const;
  std::string to_text() const;
};

/// Band-wise reconstruction error over `samples` for every input mode and
/// both modalities. Errors are pooled over samples before the ratios are
/// taken. Throws unless 0 < cutoff_hz < sample_rate / 2.
BandReport reconstruction_band_report(const MultiModalAE& model, std::span<const MultiModalSample> samples,
                                      double cutoff_hz, double sample_rate);

}  // namespace mmcae
