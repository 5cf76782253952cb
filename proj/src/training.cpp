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

#include "mmcae/training.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mmcae {

std::string_view to_string(ValidationMetric m) {
  return m == ValidationMetric::ValLoss ? "val_loss" : "val_accuracy";
}

ValidationMetric parse_validation_metric(std::string_view text) {
  if (text == "val_loss" || text == "ValLoss") return ValidationMetric::ValLoss;
  if (text == "val_accuracy" || text == "ValAccuracy") return ValidationMetric::ValAccuracy;
  throw Error("unknown validation metric '" + std::string(text) + "' (expected val_loss or val_accuracy)");
}

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 2) throw Error("batch_size must be at least 2 (contrastive terms need pairs)");
  if (cfg.patience < 1) throw Error("early stopping patience must be at least 1");
  if (cfg.max_epochs < 0) throw Error("max_epochs must be non-negative");
  if (cfg.calibration_batches < 1) throw Error("calibration_batches must be at least 1");
  nn::validate(cfg.adam);
  validate(cfg.loss);
}

std::string TrainHistory::to_table(char d) const {
  std::ostringstream os;
  os.precision(10);
  os << "epoch" << d << "j1_self" << d << "j1_cross_a" << d << "j1_cross_v" << d << "j2" << d << "j3" << d << "corr"
     << d << "total" << d << "val_metric\n";
  for (const auto& e : epochs) {
    const auto& t = e.train;
    os << e.epoch << d << t.j1_self << d << t.j1_cross_a << d << t.j1_cross_v << d << t.j2 << d << t.j3 << d
       << t.corr << d << t.total << d << e.val_metric << "\n";
  }
  return os.str();
}

namespace {

struct BatchData {
  SignalBatch a;
  SignalBatch v;
  std::vector<int> labels;
};

BatchData gather(std::span<const MultiModalSample> samples, std::span<const std::size_t> idx) {
  std::vector<MultiModalSample> chosen;
  chosen.reserve(idx.size());
  BatchData b;
  for (auto i : idx) {
    chosen.push_back(samples[i]);
    b.labels.push_back(samples[i].label);
  }
  b.a = acoustic_batch(chosen);
  b.v = vibration_batch(chosen);
  return b;
}

// Batch boundaries over a permutation; a final batch of one is dropped.
std::vector<std::span<const std::size_t>> batches(const std::vector<std::size_t>& order, Index batch_size) {
  std::vector<std::span<const std::size_t>> out;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t s = 0; s < order.size(); s += b) {
    const std::size_t n = std::min(b, order.size() - s);
    if (n < 2) break;
    out.emplace_back(order.data() + s, n);
  }
  return out;
}

void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
  acc.j1_self += x.j1_self;
  acc.j1_cross_a += x.j1_cross_a;
  acc.j1_cross_v += x.j1_cross_v;
  acc.j2 += x.j2;
  acc.j3 += x.j3;
  acc.corr += x.corr * static_cast<double>(x.batch);
  acc.total += x.total;
  acc.batch += x.batch;
}

LossBreakdown per_sample(LossBreakdown acc) {
  if (acc.batch == 0) return acc;
  const double n = static_cast<double>(acc.batch);
  acc.j1_self /= n;
  acc.j1_cross_a /= n;
  acc.j1_cross_v /= n;
  acc.j2 /= n;
  acc.j3 /= n;
  acc.corr /= n;
  acc.total /= n;
  return acc;
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

double probe_accuracy(MultiModalAE& model, std::span<const MultiModalSample> train,
                      std::span<const MultiModalSample> validation) {
  int classes = 0;
  for (const auto& s : train) classes = std::max(classes, s.label + 1);
  for (const auto& s : validation) classes = std::max(classes, s.label + 1);
  const LatentBatch tr = extract_representations(model, train, InputMode::Joint);
  ClassifierConfig quick;
  quick.max_iterations = 300;
  const LinearClassifier clf = train_classifier(tr.values, tr.labels, classes, quick);
  const LatentBatch va = extract_representations(model, validation, InputMode::Joint);
  const auto pred = clf.predict(va.values);
  Index hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == va.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

double validation_loss(MultiModalAE& model, std::span<const MultiModalSample> samples, const LossConfig& cfg) {
  if (samples.size() < 2) throw Error("validation needs at least two samples");
  constexpr std::size_t kChunk = 256;
  LossBreakdown acc;
  const auto order = identity_order(samples.size());
  for (std::size_t s = 0; s < samples.size(); s += kChunk) {
    std::size_t n = std::min(kChunk, samples.size() - s);
    if (samples.size() - (s + n) == 1) ++n;  // never leave a single sample behind
    const BatchData b = gather(samples, std::span(order).subspan(s, n));
    accumulate(acc, evaluate_objective(model, b.a, b.v, b.labels, cfg, nullptr, false));
    if (n > kChunk) break;
  }
  return acc.total / static_cast<double>(acc.batch);
}

LossConfig calibrate_loss_weights(MultiModalAE& model, std::span<const MultiModalSample> train,
                                  const TrainConfig& cfg) {
  LossConfig out = cfg.loss;
  const bool proposed = out.variant == Variant::Proposed && (!out.lambda1 || !out.lambda2);
  const bool no_missing = out.variant == Variant::ContrastiveNoMissing && !out.alpha1;
  if (!proposed && !no_missing) return out;

  // Evaluate the untrained terms with unit weights.
  LossConfig probe = out;
  probe.lambda1 = probe.lambda1.value_or(1.0);
  probe.lambda2 = probe.lambda2.value_or(1.0);
  probe.alpha1 = probe.alpha1.value_or(1.0);
  Rng shuffle(derive_seed(cfg.seed, {0xca11b, 1}));
  Rng noise(derive_seed(cfg.seed, {0xca11b, 2}));
  auto order = identity_order(train.size());
  shuffle.shuffle(order);
  double recon_joint = 0.0, recon_all = 0.0, j2 = 0.0, j3 = 0.0;
  int used = 0;
  for (auto idx : batches(order, cfg.batch_size)) {
    if (used++ == cfg.calibration_batches) break;
    const BatchData b = gather(train, idx);
    const auto l = evaluate_objective(model, b.a, b.v, b.labels, probe, &noise, false);
    recon_joint += l.j1_self;
    recon_all += l.j1_self + out.delta1 * l.j1_cross_a + out.delta2 * l.j1_cross_v;
    j2 += l.j2;
    j3 += l.j3;
  }
  constexpr double eps = 1e-12;
  if (proposed) {
    if (!out.lambda1) out.lambda1 = recon_all / (std::abs(j2) + eps);
    if (!out.lambda2) out.lambda2 = recon_all / (std::abs(j3) + eps);
  } else {
    out.alpha1 = recon_joint / (std::abs(j2) + eps);
  }
  return out;
}

TrainHistory train_autoencoder(MultiModalAE& model, std::span<const MultiModalSample> train,
                               std::span<const MultiModalSample> validation, const TrainConfig& cfg,
                               const ValidationFn& metric) {
  validate(cfg);
  if (train.empty()) throw Error("training set is empty");
  if (validation.empty()) throw Error("validation set is empty");
  if (static_cast<Index>(train.size()) < cfg.batch_size)
    throw Error("batch_size " + std::to_string(cfg.batch_size) + " exceeds the training set size " +
                std::to_string(train.size()));
  const auto t0 = std::chrono::steady_clock::now();

  TrainHistory hist;
  hist.loss = calibrate_loss_weights(model, train, cfg);
  const bool higher_better = cfg.validation_metric == ValidationMetric::ValAccuracy;
  auto measure = [&]() -> double {
    if (metric) return metric(model, validation);
    if (higher_better) return probe_accuracy(model, train, validation);
    return validation_loss(model, validation, hist.loss);
  };
  auto better = [&](double x, double best) { return higher_better ? x > best : x < best; };

  Rng shuffle(derive_seed(cfg.seed, {0x5b0ff1e}));
  Rng noise(derive_seed(cfg.seed, {0x0015e}));
  auto order = identity_order(train.size());
  auto& params = model.params();
  nn::ParameterStore<double> best = params;

  // Epoch 0: the untrained model on the first epoch's batches, no updates.
  {
    auto probe_order = order;
    Rng probe_shuffle(derive_seed(cfg.seed, {0x5b0ff1e, 0}));
    Rng probe_noise(derive_seed(cfg.seed, {0x0015e, 0}));
    probe_shuffle.shuffle(probe_order);
    LossBreakdown acc;
    for (auto idx : batches(probe_order, cfg.batch_size)) {
      const BatchData b = gather(train, idx);
      accumulate(acc, evaluate_objective(model, b.a, b.v, b.labels, hist.loss, &probe_noise, false));
    }
    hist.epochs.push_back({0, per_sample(acc), measure()});
    hist.best_metric = hist.epochs.back().val_metric;
    hist.best_epoch = 0;
  }

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle.shuffle(order);
    LossBreakdown acc;
    for (auto idx : batches(order, cfg.batch_size)) {
      const BatchData b = gather(train, idx);
      params.zero_grad();
      accumulate(acc, evaluate_objective(model, b.a, b.v, b.labels, hist.loss, &noise, true));
      nn::adam_update(params, cfg.adam);
    }
    const double m = measure();
    if (!std::isfinite(m)) throw Error("validation metric became non-finite at epoch " + std::to_string(epoch));
    hist.epochs.push_back({epoch, per_sample(acc), m});
    if (better(m, hist.best_metric)) {
      hist.best_metric = m;
      hist.best_epoch = epoch;
      best.copy_values_from(params);
    }
    if (epoch - hist.best_epoch >= cfg.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  params.copy_values_from(best);
  hist.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return hist;
}

LatentBatch extract_representations(const MultiModalAE& model, std::span<const MultiModalSample> samples,
                                    InputMode mode) {
  return encode(model, samples, mode);
}

// --- linear probe ------------------------------------------------------------

std::string_view to_string(ProbeSet s) {
  switch (s) {
    case ProbeSet::Joint: return "h(z)";
    case ProbeSet::SingleA: return "h(a)";
    case ProbeSet::SingleV: return "h(v)";
    case ProbeSet::Union: return "h(a)+h(v)";
  }
  return "unknown";
}

ProbeSet parse_probe_set(std::string_view text) {
  for (ProbeSet s : {ProbeSet::Joint, ProbeSet::SingleA, ProbeSet::SingleV, ProbeSet::Union})
    if (text == to_string(s)) return s;
  throw Error("unknown representation set '" + std::string(text) + "'");
}

MatrixXr LinearClassifier::logits(const MatrixXr& reps) const {
  if (reps.cols() != weights.rows())
    throw ShapeError("classifier expects " + std::to_string(weights.rows()) + "-wide representations, got " +
                     std::to_string(reps.cols()));
  return (reps * weights).rowwise() + bias.transpose();
}

namespace {

MatrixXr softmax_rows(MatrixXr z) {
  for (Index i = 0; i < z.rows(); ++i) {
    z.row(i).array() -= z.row(i).maxCoeff();
    z.row(i) = z.row(i).array().exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

}  // namespace

MatrixXr LinearClassifier::probabilities(const MatrixXr& reps) const { return softmax_rows(logits(reps)); }

std::vector<int> LinearClassifier::predict(const MatrixXr& reps) const {
  const MatrixXr z = logits(reps);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i) {
    Index arg = 0;
    z.row(i).maxCoeff(&arg);  // first maximum on ties
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

LinearClassifier train_classifier(const MatrixXr& reps, std::span<const int> labels, int num_classes,
                                  const ClassifierConfig& cfg, ProbeSet tag) {
  const Index n = reps.rows();
  const Index d = reps.cols();
  if (n == 0 || static_cast<Index>(labels.size()) != n)
    throw ShapeError("classifier: representations and labels are not aligned");
  std::vector<char> present(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  int distinct = 0;
  for (int c : labels) {
    if (c < 0 || c >= num_classes) throw Error("classifier: label " + std::to_string(c) + " out of range");
    distinct += present[static_cast<std::size_t>(c)] == 0;
    present[static_cast<std::size_t>(c)] = 1;
  }
  if (distinct < 2) throw Error("classifier: at least two classes must be present");
  nn::validate(cfg.adam);

  const RowVector<double> mean = reps.colwise().mean();
  RowVector<double> scale = ((reps.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (Index j = 0; j < d; ++j)
    if (!(scale(j) > 1e-12)) scale(j) = 1.0;
  const MatrixXr x = (reps.rowwise() - mean).array().rowwise() / scale.array();

  MatrixXr onehot = MatrixXr::Zero(n, num_classes);
  for (Index i = 0; i < n; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  nn::ParameterStore<double> store;
  store.add("weight", d, num_classes);
  store.add("bias", num_classes, 1);
  double prev = INFINITY;
  LinearClassifier clf;
  clf.trained_on = tag;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const MatrixXr z = (x * store[0].value).rowwise() + store[1].value.col(0).transpose();
    const MatrixXr p = softmax_rows(z);
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) {
      const int c = labels[static_cast<std::size_t>(i)];
      const double zmax = z.row(i).maxCoeff();
      loss += std::log((z.row(i).array() - zmax).exp().sum()) + zmax - z(i, c);
    }
    loss /= static_cast<double>(n);
    clf.iterations = it + 1;
    clf.final_loss = loss;
    if (std::abs(prev - loss) < cfg.tolerance) break;
    prev = loss;
    const MatrixXr g = (p - onehot) / static_cast<double>(n);
    store[0].grad = x.transpose() * g;
    store[1].grad = g.colwise().sum().transpose();
    nn::adam_update(store, cfg.adam);
  }
  // Fold the standardization back: W_raw = W / s, b_raw = b - mean * W_raw.
  clf.weights = store[0].value.array().colwise() / scale.transpose().array();
  clf.bias = store[1].value.col(0) - (mean * clf.weights).transpose();
  return clf;
}

LinearClassifier train_classifier_union(const LatentBatch& a, const LatentBatch& v, int num_classes,
                                        const ClassifierConfig& cfg) {
  if (a.values.cols() != v.values.cols() || a.labels != v.labels)
    throw ShapeError("union classifier: the two representation sets must share samples and labels");
  MatrixXr stacked(a.values.rows() + v.values.rows(), a.values.cols());
  stacked << a.values, v.values;
  std::vector<int> labels = a.labels;
  labels.insert(labels.end(), v.labels.begin(), v.labels.end());
  return train_classifier(stacked, labels, num_classes, cfg, ProbeSet::Union);
}

void save_classifier(const LinearClassifier& clf, const std::filesystem::path& path, const std::string& echo) {
  nlohmann::ordered_json j;
  j["format"] = "mmcae-classifier";
  j["version"] = 1;
  j["trained_on"] = to_string(clf.trained_on);
  j["input_dim"] = clf.input_dim();
  j["num_classes"] = clf.num_classes();
  auto w = nlohmann::ordered_json::array();
  for (Index r = 0; r < clf.weights.rows(); ++r) {
    const VectorXr row = clf.weights.row(r).transpose();
    w.push_back(std::vector<double>(row.data(), row.data() + row.size()));
  }
  j["weights"] = std::move(w);
  j["bias"] = std::vector<double>(clf.bias.data(), clf.bias.data() + clf.bias.size());
  j["config"] = nlohmann::ordered_json::parse(echo);
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << j.dump(1) << "\n";
}

LinearClassifier load_classifier(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open classifier file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
    if (j.at("format") != "mmcae-classifier") throw Error(path.string() + ": not a classifier file");
    LinearClassifier clf;
    clf.trained_on = parse_probe_set(j.at("trained_on").get<std::string>());
    const auto w = j.at("weights").get<std::vector<std::vector<double>>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    const Index rows = static_cast<Index>(w.size());
    const Index cols = static_cast<Index>(b.size());
    clf.weights.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      if (static_cast<Index>(w[static_cast<std::size_t>(r)].size()) != cols)
        throw Error(path.string() + ": ragged classifier weights");
      for (Index c = 0; c < cols; ++c) clf.weights(r, c) = w[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    clf.bias = Eigen::Map<const VectorXr>(b.data(), cols);
    if (!clf.weights.allFinite() || !clf.bias.allFinite()) throw Error(path.string() + ": non-finite parameters");
    return clf;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace mmcae
