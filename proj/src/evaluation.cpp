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

#include "mmcae/evaluation.hpp"

#include "mmcae/code_hash.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace mmcae {

using json = nlohmann::ordered_json;

// --- inference and metrics ---------------------------------------------------

int predict(const MultiModalAE& model, const LinearClassifier& clf, const MultiModalSample& sample, InputMode mode) {
  return predict(model, clf, std::span(&sample, 1), mode).front();
}

std::vector<int> predict(const MultiModalAE& model, const LinearClassifier& clf,
                         std::span<const MultiModalSample> samples, InputMode mode) {
  if (samples.empty()) return {};
  return clf.predict(encode(model, samples, mode).values);
}

std::string_view to_string(Averaging a) { return a == Averaging::Weighted ? "weighted" : "macro"; }

Averaging parse_averaging(std::string_view text) {
  if (text == "weighted") return Averaging::Weighted;
  if (text == "macro") return Averaging::Macro;
  throw Error("unknown averaging '" + std::string(text) + "' (expected weighted or macro)");
}

MetricSet compute_metrics(std::span<const int> predictions, std::span<const int> labels, int num_classes,
                          Averaging averaging) {
  if (predictions.empty()) throw Error("metrics: no predictions");
  if (predictions.size() != labels.size()) throw ShapeError("metrics: predictions and labels are not aligned");
  if (num_classes < 1) throw Error("metrics: num_classes must be positive");
  MetricSet m;
  m.confusion = MatrixXr::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    const int p = predictions[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw Error("metrics: class id outside [0, " + std::to_string(num_classes) + ")");
    m.confusion(t, p) += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  m.accuracy = m.confusion.trace() / n;
  double weight_sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double tp = m.confusion(c, c);
    const double support = m.confusion.row(c).sum();
    const double predicted = m.confusion.col(c).sum();
    double precision = 0.0;
    double recall = 0.0;
    if (predicted > 0.0) precision = tp / predicted;
    else m.zero_division = true;
    if (support > 0.0) recall = tp / support;
    else m.zero_division = true;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double w = averaging == Averaging::Weighted ? support / n : 1.0;
    m.precision += w * precision;
    m.recall += w * recall;
    m.f1 += w * f1;
    weight_sum += w;
  }
  m.precision /= weight_sum;
  m.recall /= weight_sum;
  m.f1 /= weight_sum;
  return m;
}

MetricSet average_metrics(std::span<const MetricSet> sets) {
  if (sets.empty()) throw Error("cannot average an empty set of metrics");
  MetricSet m;
  m.confusion = MatrixXr::Zero(sets[0].confusion.rows(), sets[0].confusion.cols());
  for (const auto& s : sets) {
    m.accuracy += s.accuracy;
    m.precision += s.precision;
    m.recall += s.recall;
    m.f1 += s.f1;
    m.confusion += s.confusion;
    m.zero_division = m.zero_division || s.zero_division;
  }
  const double k = static_cast<double>(sets.size());
  m.accuracy /= k;
  m.precision /= k;
  m.recall /= k;
  m.f1 /= k;
  m.confusion /= k;
  return m;
}

// --- experiments -------------------------------------------------------------

std::string_view to_string(ExperimentId e) {
  switch (e) {
    case ExperimentId::TrainOnJoint: return "exp1";
    case ExperimentId::TrainOnA: return "exp2";
    case ExperimentId::TrainOnV: return "exp3";
    case ExperimentId::TrainOnUnion: return "exp4";
  }
  return "unknown";
}

ProbeSet probe_set(ExperimentId e) {
  switch (e) {
    case ExperimentId::TrainOnJoint: return ProbeSet::Joint;
    case ExperimentId::TrainOnA: return ProbeSet::SingleA;
    case ExperimentId::TrainOnV: return ProbeSet::SingleV;
    case ExperimentId::TrainOnUnion: return ProbeSet::Union;
  }
  return ProbeSet::Joint;
}

namespace {

// The training representations of an experiment, encoded once per mode.
struct EncodedSet {
  std::array<std::optional<LatentBatch>, 3> by_mode;

  const LatentBatch& get(const MultiModalAE& model, std::span<const MultiModalSample> samples, InputMode mode) {
    auto& slot = by_mode[static_cast<std::size_t>(mode)];
    if (!slot) slot = encode(model, samples, mode);
    return *slot;
  }
};

ExperimentResult run_experiment(const MultiModalAE& model, EncodedSet& train, std::span<const MultiModalSample> train_s,
                                 EncodedSet& test, std::span<const MultiModalSample> test_s, ExperimentId experiment,
                                 int num_classes, const ClassifierConfig& probe, Averaging averaging) {
  ExperimentResult r;
  r.experiment = experiment;
  LinearClassifier clf;
  switch (experiment) {
    case ExperimentId::TrainOnUnion: {
      const auto& a = train.get(model, train_s, InputMode::SingleA);
      const auto& v = train.get(model, train_s, InputMode::SingleV);
      clf = train_classifier_union(a, v, num_classes, probe);
      r.train_rows = a.values.rows() + v.values.rows();
      break;
    }
    default: {
      const InputMode mode = experiment == ExperimentId::TrainOnJoint ? InputMode::Joint
                             : experiment == ExperimentId::TrainOnA   ? InputMode::SingleA
                                                                      : InputMode::SingleV;
      const auto& reps = train.get(model, train_s, mode);
      clf = train_classifier(reps.values, reps.labels, num_classes, probe, probe_set(experiment));
      r.train_rows = reps.values.rows();
    }
  }
  for (InputMode mode : kAllModes) {
    const auto& reps = test.get(model, test_s, mode);
    r.by_mode[static_cast<std::size_t>(mode)] = compute_metrics(clf.predict(reps.values), reps.labels, num_classes,
                                                                averaging);
  }
  return r;
}

}  // namespace

ExperimentResult run_experiment_grid(const MultiModalAE& model, std::span<const MultiModalSample> train,
                                     std::span<const MultiModalSample> test, ExperimentId experiment,
                                     int num_classes, const ClassifierConfig& probe, Averaging averaging) {
  if (train.empty() || test.empty()) throw Error("experiment needs non-empty train and test splits");
  EncodedSet tr;
  EncodedSet te;
  return run_experiment(model, tr, train, te, test, experiment, num_classes, probe, averaging);
}

// --- cross-validation ----------------------------------------------------------

void validate(const CrossValidationConfig& cfg) {
  if (cfg.folds < 2) throw Error("cross-validation needs at least 2 folds");
  if (cfg.holdout_per_class < 1) throw Error("holdout_per_class must be at least 1 (early stopping needs it)");
  if (cfg.jobs < 1) throw Error("jobs must be at least 1");
  for (int f : cfg.only_folds)
    if (f < 0 || f >= cfg.folds) throw Error("fold index " + std::to_string(f) + " outside [0, folds)");
  validate(cfg.train);
  if (cfg.probe.max_iterations < 1) throw Error("probe max_iterations must be positive");
  (void)architecture_by_name(cfg.architecture);
}

const VariantReport& EvaluationReport::at(Variant v) const {
  for (const auto& r : variants)
    if (r.variant == v) return r;
  throw Error("report has no results for variant " + std::string(to_string(v)));
}

bool EvaluationReport::complete() const {
  for (const auto& v : variants)
    for (const auto& row : v.cells)
      for (const auto& c : row)
        if (!c.failed && c.folds_used == 0) return false;
  return !variants.empty();
}

bool EvaluationReport::any_failure() const {
  for (const auto& v : variants)
    for (const auto& f : v.folds)
      if (!f.ok) return true;
  return false;
}

namespace {

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json loss_json(const LossConfig& l) {
  return json{{"variant", cli_name(l.variant)},
              {"delta1", l.delta1},
              {"delta2", l.delta2},
              {"lambda1", optional_json(l.lambda1)},
              {"lambda2", optional_json(l.lambda2)},
              {"alpha1", optional_json(l.alpha1)},
              {"noise_low", l.noise_low},
              {"noise_high", l.noise_high},
              {"margin", optional_json(l.margin)},
              {"corr_weight", l.corr_weight}};
}

// Everything that can change a number. Thread count and output paths are
// left out so reports compare byte for byte across them.
json cv_config_json(const CrossValidationConfig& cfg, std::span<const Variant> variants, const Dataset& ds) {
  json j;
  j["folds"] = cfg.folds;
  j["holdout_per_class"] = cfg.holdout_per_class;
  j["seed"] = cfg.seed;
  j["architecture"] = cfg.architecture;
  j["architecture_layers"] = describe(architecture_by_name(cfg.architecture));
  json vs = json::array();
  for (Variant v : variants) vs.push_back(cli_name(v));
  j["variants"] = vs;
  const auto& t = cfg.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"patience", t.patience},
                {"validation_metric", to_string(t.validation_metric)},
                {"calibration_batches", t.calibration_batches},
                {"adam",
                 {{"learning_rate", t.adam.learning_rate},
                  {"beta1", t.adam.beta1},
                  {"beta2", t.adam.beta2},
                  {"epsilon", t.adam.epsilon},
                  {"weight_decay", t.adam.weight_decay}}},
                {"loss", loss_json(t.loss)}};
  j["probe"] = {{"max_iterations", cfg.probe.max_iterations},
                {"tolerance", cfg.probe.tolerance},
                {"learning_rate", cfg.probe.adam.learning_rate}};
  j["averaging"] = to_string(cfg.averaging);
  if (!cfg.only_folds.empty()) j["only_folds"] = cfg.only_folds;
  j["dataset"] = {{"samples", ds.size()},
                  {"signal_length", ds.signal_length},
                  {"provenance", to_string(ds.provenance)},
                  {"config", json::parse(ds.config_echo)}};
  return j;
}

std::vector<MultiModalSample> pick(const Dataset& ds, const std::vector<Index>& idx) {
  std::vector<MultiModalSample> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(ds.samples[static_cast<std::size_t>(i)]);
  return out;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

}  // namespace

EvaluationReport cross_validate(const Dataset& ds, std::span<const Variant> variants,
                                const CrossValidationConfig& cfg) {
  validate(cfg);
  validate(ds);
  if (variants.empty()) throw Error("cross-validation needs at least one variant");
  {
    std::set<std::string> ids;
    for (const auto& s : ds.samples)
      if (!ids.insert(s.id).second) throw Error("duplicate sample id '" + s.id + "' (leak checks need unique ids)");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Architecture arch = architecture_by_name(cfg.architecture);

  const HoldoutSplit split = split_holdout(ds, cfg.holdout_per_class, cfg.seed);
  const FoldPlan plan = stratified_folds(ds, split, cfg.folds, cfg.seed);
  const auto validation = pick(ds, split.validation);

  EvaluationReport report;
  report.class_names = ds.class_names;
  report.config_echo = cv_config_json(cfg, variants, ds).dump();
  for (const auto& s : validation) report.validation_ids.push_back(s.id);
  for (int f = 0; f < cfg.folds; ++f) {
    FoldIds ids;
    for (Index i : plan.train[static_cast<std::size_t>(f)]) ids.train.push_back(ds.samples[static_cast<std::size_t>(i)].id);
    for (Index i : plan.test[static_cast<std::size_t>(f)]) ids.test.push_back(ds.samples[static_cast<std::size_t>(i)].id);
    report.folds.push_back(std::move(ids));
  }
  check_no_leakage(report);

  std::vector<int> folds = cfg.only_folds;
  if (folds.empty())
    for (int f = 0; f < cfg.folds; ++f) folds.push_back(f);
  std::sort(folds.begin(), folds.end());
  folds.erase(std::unique(folds.begin(), folds.end()), folds.end());

  struct Job {
    std::size_t variant;
    int fold;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < variants.size(); ++v)
    for (int f : folds) jobs.push_back({v, f});
  std::vector<FoldRun> results(jobs.size());

  auto run_job = [&](std::size_t j) {
    const Job job = jobs[j];
    const Variant variant = variants[job.variant];
    FoldRun& out = results[j];
    out.fold = job.fold;
    // The same initial weights for every variant on a fold.
    out.init_seed = derive_seed(cfg.seed, {0x1417, static_cast<std::uint64_t>(job.fold)});
    try {
      const auto train = pick(ds, plan.train[static_cast<std::size_t>(job.fold)]);
      const auto test = pick(ds, plan.test[static_cast<std::size_t>(job.fold)]);
      MultiModalAE model = MultiModalAE::init(arch, out.init_seed);
      TrainConfig tc = cfg.train;
      tc.loss.variant = variant;
      tc.seed = derive_seed(cfg.seed, {0x7a1e, static_cast<std::uint64_t>(variant), static_cast<std::uint64_t>(job.fold)});
      const TrainHistory hist = train_autoencoder(model, train, validation, tc);
      out.best_epoch = hist.best_epoch;
      out.epochs_run = static_cast<int>(hist.epochs.size()) - 1;
      out.best_metric = hist.best_metric;
      out.loss = hist.loss;
      out.parameter_hash = model.parameter_hash();
      if (cfg.checkpoint_dir) {
        std::filesystem::create_directories(*cfg.checkpoint_dir);
        save_checkpoint(model, *cfg.checkpoint_dir /
                                   (std::string(cli_name(variant)) + "-fold" + std::to_string(job.fold) + ".ckpt"));
      }
      EncodedSet tr;
      EncodedSet te;
      for (ExperimentId e : kAllExperiments)
        out.experiments[static_cast<std::size_t>(e)] =
            run_experiment(model, tr, train, te, test, e, ds.num_classes(), cfg.probe, cfg.averaging);
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), jobs.size());
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) run_job(j);
      });
    for (auto& t : pool) t.join();
  }

  for (std::size_t v = 0; v < variants.size(); ++v) {
    VariantReport vr;
    vr.variant = variants[v];
    for (std::size_t j = 0; j < jobs.size(); ++j)
      if (jobs[j].variant == v) vr.folds.push_back(std::move(results[j]));
    for (ExperimentId e : kAllExperiments)
      for (InputMode m : kAllModes) {
        std::vector<MetricSet> sets;
        for (const auto& f : vr.folds)
          if (f.ok) sets.push_back(f.experiments[static_cast<std::size_t>(e)].by_mode[static_cast<std::size_t>(m)]);
        auto& cell = vr.cells[static_cast<std::size_t>(e)][static_cast<std::size_t>(m)];
        cell.folds_used = static_cast<int>(sets.size());
        cell.failed = sets.empty();
        if (!sets.empty()) cell.mean = average_metrics(sets);
      }
    report.variants.push_back(std::move(vr));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void check_no_leakage(const EvaluationReport& report) {
  const std::set<std::string> holdout(report.validation_ids.begin(), report.validation_ids.end());
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& ids = report.folds[f];
    const std::set<std::string> train(ids.train.begin(), ids.train.end());
    for (const auto& id : ids.test) {
      if (train.count(id)) throw Error("fold " + std::to_string(f) + ": test sample '" + id + "' is also in train");
      if (holdout.count(id)) throw Error("fold " + std::to_string(f) + ": test sample '" + id + "' is in the holdout");
    }
    for (const auto& id : ids.train)
      if (holdout.count(id)) throw Error("fold " + std::to_string(f) + ": train sample '" + id + "' is in the holdout");
  }
}

namespace {

json metrics_json(const MetricSet& m) {
  json conf = json::array();
  for (Index r = 0; r < m.confusion.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.confusion.cols(); ++c) row.push_back(m.confusion(r, c));
    conf.push_back(row);
  }
  return json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
              {"f1", m.f1},             {"zero_division", m.zero_division}, {"confusion", conf}};
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
  json j;
  j["format"] = "mmcae-cv-report";
  j["version"] = 1;
  j["code_hash"] = kCodeHash;
  j["metric_averaging_note"] =
      "precision/recall/F1 averaging is not stated by the method; the configured averaging is used "
      "(weighted makes recall equal accuracy)";
  j["config"] = json::parse(report.config_echo);
  j["class_names"] = report.class_names;
  j["validation_ids"] = report.validation_ids;
  json folds = json::array();
  for (std::size_t f = 0; f < report.folds.size(); ++f)
    folds.push_back(json{{"fold", f}, {"train_ids", report.folds[f].train}, {"test_ids", report.folds[f].test}});
  j["folds"] = folds;
  json variants = json::array();
  for (const auto& v : report.variants) {
    json vj;
    vj["variant"] = cli_name(v.variant);
    vj["label"] = to_string(v.variant);
    json cells = json::array();
    for (ExperimentId e : kAllExperiments)
      for (InputMode m : kAllModes) {
        const auto& c = v.cells[static_cast<std::size_t>(e)][static_cast<std::size_t>(m)];
        json cj{{"experiment", to_string(e)},
                {"train_on", to_string(probe_set(e))},
                {"test_mode", to_string(m)},
                {"folds_used", c.folds_used},
                {"failed", c.failed}};
        if (!c.failed) cj["metrics"] = metrics_json(c.mean);
        cells.push_back(cj);
      }
    vj["cells"] = cells;
    json runs = json::array();
    for (const auto& f : v.folds) {
      json fj{{"fold", f.fold}, {"ok", f.ok}};
      if (!f.ok) {
        fj["error"] = f.error;
      } else {
        fj["best_epoch"] = f.best_epoch;
        fj["epochs_run"] = f.epochs_run;
        fj["best_metric"] = f.best_metric;
        fj["init_seed"] = f.init_seed;
        fj["parameter_hash"] = hex64(f.parameter_hash);
        fj["loss"] = loss_json(f.loss);
        json ex = json::array();
        for (const auto& r : f.experiments) {
          json rj{{"experiment", to_string(r.experiment)}, {"train_rows", r.train_rows}};
          for (InputMode m : kAllModes) rj[std::string(to_string(m))] = metrics_json(r.by_mode[static_cast<std::size_t>(m)]);
          ex.push_back(rj);
        }
        fj["experiments"] = ex;
      }
      runs.push_back(fj);
    }
    vj["fold_runs"] = runs;
    variants.push_back(vj);
  }
  j["variants"] = variants;
  return j.dump(1) + "\n";
}

namespace {

std::string rep_name(InputMode m) {
  switch (m) {
    case InputMode::Joint: return "h(z)";
    case InputMode::SingleA: return "h(a)";
    case InputMode::SingleV: return "h(v)";
  }
  return "?";
}

std::string pct(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * x;
  return os.str();
}

}  // namespace

std::string report_to_text(const EvaluationReport& report) {
  std::ostringstream os;
  const json cfg = json::parse(report.config_echo);
  os << "mmcae cross-validation report (code " << kCodeHash << ")\n";
  os << "config: " << report.config_echo << "\n";
  os << "metrics: " << cfg.value("averaging", std::string("weighted"))
     << " averaging; values in %, averaged over folds\n";
  os << "wall time: " << std::fixed << std::setprecision(1) << report.wall_seconds << " s\n\n";

  for (const auto& v : report.variants) {
    int ok = 0;
    for (const auto& f : v.folds) ok += f.ok;
    os << "== " << to_string(v.variant) << " (" << ok << "/" << v.folds.size() << " folds) ==\n";
    os << std::left << std::setw(8) << "exp" << std::setw(12) << "train on" << std::setw(8) << "test" << std::right
       << std::setw(10) << "accuracy" << std::setw(11) << "precision" << std::setw(9) << "recall" << std::setw(9)
       << "f1" << "\n";
    for (ExperimentId e : kAllExperiments)
      for (InputMode m : kAllModes) {
        const auto& c = v.cells[static_cast<std::size_t>(e)][static_cast<std::size_t>(m)];
        os << std::left << std::setw(8) << to_string(e) << std::setw(12) << to_string(probe_set(e)) << std::setw(8)
           << rep_name(m) << std::right;
        if (c.failed) {
          os << std::setw(10) << "FAILED" << "\n";
          continue;
        }
        os << std::setw(10) << pct(c.mean.accuracy) << std::setw(11) << pct(c.mean.precision) << std::setw(9)
           << pct(c.mean.recall) << std::setw(9) << pct(c.mean.f1) << (c.mean.zero_division ? "  *" : "") << "\n";
      }
    for (const auto& f : v.folds)
      if (!f.ok) os << "fold " << f.fold << " FAILED: " << f.error << "\n";
    // Averaged Experiment 1 confusion matrices.
    for (InputMode m : kAllModes) {
      const auto& c = v.cells[0][static_cast<std::size_t>(m)];
      if (c.failed) continue;
      os << "exp1 confusion, test on " << rep_name(m) << " (rows: true class)\n";
      for (Index r = 0; r < c.mean.confusion.rows(); ++r) {
        os << "  " << std::left << std::setw(10) << report.class_names[static_cast<std::size_t>(r)] << std::right;
        for (Index k = 0; k < c.mean.confusion.cols(); ++k)
          os << std::setw(8) << std::fixed << std::setprecision(2) << c.mean.confusion(r, k);
        os << "\n";
      }
    }
    os << "\n";
  }

  if (report.variants.size() > 1) {
    os << "== comparison (exp1: probe on h(z)) ==\n";
    os << std::left << std::setw(22) << "method" << std::setw(8) << "test" << std::right << std::setw(10)
       << "accuracy" << std::setw(11) << "precision" << std::setw(9) << "recall" << std::setw(9) << "f1" << "\n";
    for (const auto& v : report.variants)
      for (InputMode m : kAllModes) {
        const auto& c = v.cells[0][static_cast<std::size_t>(m)];
        os << std::left << std::setw(22) << to_string(v.variant) << std::setw(8) << rep_name(m) << std::right;
        if (c.failed) {
          os << std::setw(10) << "FAILED" << "\n";
          continue;
        }
        os << std::setw(10) << pct(c.mean.accuracy) << std::setw(11) << pct(c.mean.precision) << std::setw(9)
           << pct(c.mean.recall) << std::setw(9) << pct(c.mean.f1) << "\n";
      }
  }
  return os.str();
}

// --- embeddings ----------------------------------------------------------------

MatrixXr principal_projection_2d(const MatrixXr& x) {
  if (x.rows() == 0) return MatrixXr(0, 2);
  const RowVector<double> mean = x.colwise().mean();
  const MatrixXr centered = x.rowwise() - mean;
  const MatrixXr cov = centered.transpose() * centered / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXr> eig(cov);
  const Index d = x.cols();
  MatrixXr basis = MatrixXr::Zero(d, 2);
  for (int k = 0; k < 2 && k < d; ++k) {
    VectorXr dir = eig.eigenvectors().col(d - 1 - k);
    Index arg = 0;
    dir.cwiseAbs().maxCoeff(&arg);
    if (dir(arg) < 0.0) dir = -dir;
    basis.col(k) = dir;
  }
  return centered * basis;
}

std::vector<EmbeddingRow> compute_embeddings(const MultiModalAE& model, std::span<const MultiModalSample> samples) {
  const std::size_t n = samples.size();
  std::array<LatentBatch, 3> reps;
  for (InputMode m : kAllModes) reps[static_cast<std::size_t>(m)] = encode(model, samples, m);
  const Index d = model.latent_dim();
  MatrixXr pooled(static_cast<Index>(3 * n), d);
  std::vector<EmbeddingRow> rows;
  rows.reserve(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (InputMode m : kAllModes) {
      EmbeddingRow r;
      r.id = samples[i].id;
      r.mode = m;
      r.label = samples[i].label;
      r.values = reps[static_cast<std::size_t>(m)].values.row(static_cast<Index>(i)).transpose();
      pooled.row(static_cast<Index>(rows.size())) = r.values.transpose();
      rows.push_back(std::move(r));
    }
  const MatrixXr xy = principal_projection_2d(pooled);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].x2d = xy(static_cast<Index>(k), 0);
    rows[k].y2d = xy(static_cast<Index>(k), 1);
  }
  return rows;
}

void export_embeddings(const MultiModalAE& model, std::span<const MultiModalSample> samples,
                       const std::filesystem::path& path, const std::string& comment) {
  if (comment.find('\n') != std::string::npos) throw Error("embedding comment must be a single line");
  const auto rows = compute_embeddings(model, samples);
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  if (!comment.empty()) os << "# " << comment << "\n";
  os << "sample_id\tmode\tlabel";
  for (Index k = 0; k < model.latent_dim(); ++k) os << "\tz" << k;
  os << "\tx2d\ty2d\n";
  for (const auto& r : rows) {
    os << r.id << "\t" << to_string(r.mode) << "\t" << r.label;
    for (Index k = 0; k < r.values.size(); ++k) os << "\t" << r.values(k);
    os << "\t" << r.x2d << "\t" << r.y2d << "\n";
  }
  if (!os) throw Error("failed writing " + path.string());
}

std::vector<EmbeddingRow> read_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open embedding table " + path.string());
  std::string line;
  do {
    if (!std::getline(is, line)) throw Error(path.string() + ": empty embedding table");
  } while (line.starts_with("#"));
  const auto columns = static_cast<Index>(std::count(line.begin(), line.end(), '\t')) + 1;
  const Index d = columns - 5;
  if (d < 1) throw Error(path.string() + ": malformed embedding header");
  std::vector<EmbeddingRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    EmbeddingRow r;
    std::string mode;
    std::getline(ls, r.id, '\t');
    std::getline(ls, mode, '\t');
    r.mode = parse_input_mode(mode);
    ls >> r.label;
    r.values.resize(d);
    for (Index k = 0; k < d; ++k) ls >> r.values(k);
    ls >> r.x2d >> r.y2d;
    if (!ls) throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- reconstruction bands ---------------------------------------------------------

std::pair<VectorXr, VectorXr> band_split(const VectorXr& x, double cutoff_hz, double sample_rate) {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw Error("band split: sample rate must be positive");
  if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0))
    throw Error("band split: cutoff must lie in (0, sample_rate/2)");
  const Index n = x.size();
  if (n == 0) return {VectorXr(), VectorXr()};
  Eigen::FFT<double> fft;
  std::vector<double> in(x.data(), x.data() + n);
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, in);
  std::vector<std::complex<double>> low(spec.size()), high(spec.size());
  for (Index k = 0; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) * sample_rate / static_cast<double>(n);
    (f <= cutoff_hz ? low : high)[static_cast<std::size_t>(k)] = spec[static_cast<std::size_t>(k)];
  }
  std::vector<std::complex<double>> lt, ht;
  fft.inv(lt, low);
  fft.inv(ht, high);
  std::pair<VectorXr, VectorXr> out{VectorXr(n), VectorXr(n)};
  for (Index i = 0; i < n; ++i) {
    out.first(i) = lt[static_cast<std::size_t>(i)].real();
    out.second(i) = ht[static_cast<std::size_t>(i)].real();
  }
  return out;
}

const BandError& BandReport::at(InputMode mode, bool vibration) const {
  return errors[static_cast<std::size_t>(mode)][vibration ? 1 : 0];
}

std::string BandReport::to_text() const {
  std::ostringstream os;
  os << "reconstruction error by band (cutoff " << cutoff_hz << " Hz, sample rate " << sample_rate << " Hz, "
     << samples << " samples)\n";
  os << std::left << std::setw(10) << "input" << std::setw(12) << "modality" << std::right << std::setw(12)
     << "low mse" << std::setw(12) << "high mse" << std::setw(12) << "low rel" << std::setw(12) << "high rel"
     << std::setw(12) << "total rel" << "\n";
  for (InputMode m : kAllModes)
    for (int v = 0; v < 2; ++v) {
      const auto& e = errors[static_cast<std::size_t>(m)][static_cast<std::size_t>(v)];
      os << std::left << std::setw(10) << to_string(m) << std::setw(12) << (v ? "vibration" : "acoustic")
         << std::right << std::scientific << std::setprecision(4) << std::setw(12) << e.low_mse << std::setw(12)
         << e.high_mse << std::fixed << std::setw(12) << e.low_relative << std::setw(12) << e.high_relative
         << std::setw(12) << e.total_relative << "\n";
    }
  return os.str();
}

BandError band_error(const MatrixXr& original, const MatrixXr& reconstruction, double cutoff_hz, double sample_rate) {
  if (original.rows() != reconstruction.rows() || original.cols() != reconstruction.cols())
    throw ShapeError("band error: original and reconstruction shapes differ");
  double low = 0.0, high = 0.0, sig_low = 0.0, sig_high = 0.0;
  for (Index i = 0; i < original.rows(); ++i) {
    const auto [xl, xh] = band_split(original.row(i).transpose(), cutoff_hz, sample_rate);
    const auto [el, eh] = band_split((original.row(i) - reconstruction.row(i)).transpose(), cutoff_hz, sample_rate);
    low += el.squaredNorm();
    high += eh.squaredNorm();
    sig_low += xl.squaredNorm();
    sig_high += xh.squaredNorm();
  }
  const double total = (original - reconstruction).squaredNorm();
  const double count = static_cast<double>(original.size());
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
  BandError e;
  e.low_mse = low / count;
  e.high_mse = high / count;
  e.total_mse = total / count;
  e.low_relative = ratio(low, sig_low);
  e.high_relative = ratio(high, sig_high);
  e.total_relative = ratio(total, original.squaredNorm());
  return e;
}

BandReport reconstruction_band_report(const MultiModalAE& model, std::span<const MultiModalSample> samples,
                                      double cutoff_hz, double sample_rate) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0))
    throw Error("band report: cutoff must lie in (0, sample_rate/2)");
  if (samples.empty()) throw Error("band report: no samples");
  BandReport rep;
  rep.cutoff_hz = cutoff_hz;
  rep.sample_rate = sample_rate;
  rep.samples = static_cast<Index>(samples.size());
  const Index len = model.signal_length();
  MatrixXr a(rep.samples, len), v(rep.samples, len);
  for (Index i = 0; i < rep.samples; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (s.acoustic.size() != len || s.vibration.size() != len)
      throw ShapeError("band report: sample '" + s.id + "' length differs from the model");
    a.row(i) = s.acoustic.transpose();
    v.row(i) = s.vibration.transpose();
  }
  for (InputMode m : kAllModes) {
    const Reconstruction rec = decode(model, encode(model, samples, m));
    rep.errors[static_cast<std::size_t>(m)][0] = band_error(a, rec.acoustic, cutoff_hz, sample_rate);
    rep.errors[static_cast<std::size_t>(m)][1] = band_error(v, rec.vibration, cutoff_hz, sample_rate);
  }
  return rep;
}

}  // namespace mmcae
