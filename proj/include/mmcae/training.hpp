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

#include "mmcae/nn/adam.hpp"
#include "mmcae/objective.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmcae {

enum class ValidationMetric { ValLoss, ValAccuracy };

std::string_view to_string(ValidationMetric m);
ValidationMetric parse_validation_metric(std::string_view text);

struct TrainConfig {
  Index batch_size = 32;
  int max_epochs = 300;
  int patience = 20;
  nn::AdamConfig adam;
  LossConfig loss;
  std::uint64_t seed = 0;
  ValidationMetric validation_metric = ValidationMetric::ValLoss;
  /// Mini-batches used to calibrate unset lambda1/lambda2/alpha1.
  int calibration_batches = 4;
};

void validate(const TrainConfig& cfg);

/// One row of the training history. Loss terms are per-sample means over
/// the epoch's mini-batches (raw batch sums divided by samples seen).
struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;
  double val_metric = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;  // epochs[0] is the untrained model
  int best_epoch = 0;
  double best_metric = 0.0;
  bool stopped_early = false;
  /// The loss configuration actually used (calibrated weights filled in).
  LossConfig loss;
  double wall_seconds = 0.0;

  /// Delimiter-separated table: epoch, j1_self, j1_cross_a, j1_cross_v, j2,
  /// j3, corr, total, val_metric.
  std::string to_table(char delimiter = '\t') const;
};

/// Validation metric hook: larger-is-better only for ValAccuracy.
using ValidationFn = std::function<double(MultiModalAE&, std::span<const MultiModalSample>)>;

/// Per-sample objective on clean inputs, in chunks of at most 256 samples.
double validation_loss(MultiModalAE& model, std::span<const MultiModalSample> samples, const LossConfig& cfg);

/// Fills unset lambda1/lambda2 (Proposed) or alpha1 (ContrastiveNoMissing)
/// with (reconstruction term) / (|contrastive term| + 1e-12) averaged over
/// the first few shuffled batches of the untrained model.
LossConfig calibrate_loss_weights(MultiModalAE& model, std::span<const MultiModalSample> train,
                                  const TrainConfig& cfg);

/// Mini-batch ADAM training with early stopping on `validation`. Batches are
/// reshuffled every epoch and a trailing batch of fewer than two samples is
/// dropped. The best epoch's parameters are restored before returning.
TrainHistory train_autoencoder(MultiModalAE& model, std::span<const MultiModalSample> train,
                               std::span<const MultiModalSample> validation, const TrainConfig& cfg,
                               const ValidationFn& metric = {});

/// Frozen-model representations of clean inputs (decoders are not run).
LatentBatch extract_representations(const MultiModalAE& model, std::span<const MultiModalSample> samples,
                                    InputMode mode);

// --- linear probe ------------------------------------------------------------

/// The representation set a probe is trained on.
enum class ProbeSet { Joint, SingleA, SingleV, Union };

std::string_view to_string(ProbeSet s);
ProbeSet parse_probe_set(std::string_view text);

struct ClassifierConfig {
  int max_iterations = 3000;
  /// Stop once the mean cross-entropy changes by less than this.
  double tolerance = 1e-6;
  nn::AdamConfig adam{0.01, 0.9, 0.999, 1e-8, 0.0};
};

/// Single affine layer with softmax read-out. Weights act on raw
/// representations (latent_dim x C).
struct LinearClassifier {
  MatrixXr weights;
  VectorXr bias;
  ProbeSet trained_on = ProbeSet::Joint;
  int iterations = 0;
  double final_loss = 0.0;

  int num_classes() const { return static_cast<int>(bias.size()); }
  Index input_dim() const { return weights.rows(); }
  /// Rows of `reps` are samples.
  MatrixXr logits(const MatrixXr& reps) const;
  MatrixXr probabilities(const MatrixXr& reps) const;
  std::vector<int> predict(const MatrixXr& reps) const;
};

/// Multinomial logistic regression by full-batch ADAM from zero weights.
/// Features are standardized internally and the scaling is folded back into
/// the stored weights. Throws when fewer than two classes are present.
LinearClassifier train_classifier(const MatrixXr& reps, std::span<const int> labels, int num_classes,
                                  const ClassifierConfig& cfg = {}, ProbeSet tag = ProbeSet::Joint);

/// Stacks both single-modal sets as independent rows sharing labels.
LinearClassifier train_classifier_union(const LatentBatch& a, const LatentBatch& v, int num_classes,
                                        const ClassifierConfig& cfg = {});

void save_classifier(const LinearClassifier& clf, const std::filesystem::path& path, const std::string& echo = "{}");
LinearClassifier load_classifier(const std::filesystem::path& path);

}  // namespace mmcae
