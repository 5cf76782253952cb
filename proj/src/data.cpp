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

#include "mmcae/data.hpp"

#include "mmcae/binary_io.hpp"

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mmcae {

using json = nlohmann::ordered_json;

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Synthetic: return "synthetic";
    case Provenance::Segmented: return "segmented";
    case Provenance::Imported: return "imported";
  }
  return "unknown";
}

Provenance parse_provenance(std::string_view text) {
  for (Provenance p : {Provenance::Synthetic, Provenance::Segmented, Provenance::Imported})
    if (text == to_string(p)) return p;
  throw Error("unknown provenance '" + std::string(text) + "'");
}

std::string_view to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view text) {
  if (text == "f32") return Precision::F32;
  if (text == "f64") return Precision::F64;
  throw Error("unknown precision '" + std::string(text) + "' (expected f32 or f64)");
}

void validate(const Dataset& ds) {
  if (ds.signal_length <= 0 && !ds.samples.empty()) throw Error("dataset signal_length must be positive");
  for (const auto& s : ds.samples) {
    if (s.acoustic.size() != ds.signal_length || s.vibration.size() != ds.signal_length)
      throw ShapeError("sample '" + s.id + "' length differs from the dataset signal_length " +
                       std::to_string(ds.signal_length));
    if (s.label < 0 || s.label >= ds.num_classes())
      throw Error("sample '" + s.id + "' has label " + std::to_string(s.label) + " outside " +
                  std::to_string(ds.num_classes()) + " classes");
  }
}

std::vector<Index> class_counts(const Dataset& ds) {
  std::vector<Index> counts(static_cast<std::size_t>(ds.num_classes()), 0);
  for (const auto& s : ds.samples) ++counts.at(static_cast<std::size_t>(s.label));
  return counts;
}

Dataset subset(const Dataset& ds, std::span<const Index> indices) {
  Dataset out;
  out.class_names = ds.class_names;
  out.signal_length = ds.signal_length;
  out.provenance = ds.provenance;
  out.config_echo = ds.config_echo;
  out.samples.reserve(indices.size());
  for (Index i : indices) out.samples.push_back(ds.samples.at(static_cast<std::size_t>(i)));
  return out;
}

// --- synthetic generation ----------------------------------------------------

SyntheticConfig synthetic_preset(std::string_view name) {
  SyntheticConfig cfg;
  if (name == "moderate") return cfg;
  if (name == "easy") {
    cfg.shared_snr_db = 15.0;
    cfg.modality_noise_db = 20.0;
    cfg.cross_correlation = 0.8;
    cfg.class_separation = 2.0;
    cfg.jitter = 0.05;
    return cfg;
  }
  if (name == "hard") {
    cfg.shared_snr_db = 0.0;
    cfg.modality_noise_db = 3.0;
    cfg.cross_correlation = 0.4;
    cfg.class_separation = 0.5;
    cfg.jitter = 0.25;
    return cfg;
  }
  throw Error("unknown synthetic preset '" + std::string(name) + "' (expected easy, moderate or hard)");
}

void validate(const SyntheticConfig& cfg) {
  if (cfg.n_classes < 2) throw Error("synthetic n_classes must be at least 2");
  if (static_cast<int>(cfg.per_class_counts.size()) != cfg.n_classes)
    throw Error("synthetic per_class_counts needs one entry per class (" + std::to_string(cfg.n_classes) + ")");
  for (Index c : cfg.per_class_counts)
    if (c <= 0) throw Error("synthetic per_class_counts must be positive");
  if (cfg.signal_length < 16) throw Error("synthetic signal_length must be at least 16");
  if (!(cfg.cross_correlation >= 0.0 && cfg.cross_correlation <= 1.0))
    throw Error("synthetic cross_correlation must lie in [0, 1]");
  if (!(cfg.class_separation > 0.0) || !std::isfinite(cfg.class_separation))
    throw Error("synthetic class_separation must be positive");
  if (!(cfg.jitter >= 0.0) || !std::isfinite(cfg.jitter)) throw Error("synthetic jitter must be non-negative");
  if (std::isnan(cfg.shared_snr_db) || std::isnan(cfg.modality_noise_db) || cfg.shared_snr_db == -INFINITY ||
      cfg.modality_noise_db == -INFINITY)
    throw Error("synthetic SNR values must be numbers above -inf");
}

namespace {

// Fixed per-modality FIR filters (tap delay, gain).
struct Tap {
  Index delay;
  double gain;
};
const std::vector<Tap> kFilterA = {{0, 0.25}, {1, 0.5}, {2, 0.25}};
const std::vector<Tap> kFilterV = {{4, 0.8}, {12, -0.5}, {20, 0.3}};

VectorXr apply_filter(const VectorXr& x, const std::vector<Tap>& taps) {
  VectorXr y = VectorXr::Zero(x.size());
  for (const auto& t : taps)
    if (t.delay < x.size()) y.tail(x.size() - t.delay) += t.gain * x.head(x.size() - t.delay);
  return y;
}

double rms(const VectorXr& x) { return x.size() == 0 ? 0.0 : std::sqrt(x.squaredNorm() / static_cast<double>(x.size())); }

VectorXr unit_rms(VectorXr x) {
  const double r = rms(x);
  if (r > 0.0) x /= r;
  return x;
}

void add_burst(VectorXr& x, double center, double width, double freq_hz, double amp, double phase,
               double sample_rate) {
  const Index n = x.size();
  const Index lo = std::max<Index>(0, static_cast<Index>(std::floor(center - 5.0 * width)));
  const Index hi = std::min<Index>(n - 1, static_cast<Index>(std::ceil(center + 5.0 * width)));
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate;
  for (Index i = lo; i <= hi; ++i) {
    const double u = (static_cast<double>(i) - center) / width;
    x(i) += amp * std::exp(-0.5 * u * u) * std::sin(w * static_cast<double>(i) + phase);
  }
}

double snr_gain(double signal_power, double snr_db) {
  if (std::isinf(snr_db)) return 0.0;
  return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

// One two-revolution cycle of `n` samples for class `label`.
std::pair<VectorXr, VectorXr> render_cycle(Index n, int label, const SyntheticConfig& cfg, double sample_rate,
                                           Rng& rng) {
  const double len = static_cast<double>(n);
  const double sep = cfg.class_separation;
  const double jit = cfg.jitter;

  // Shared source: four firing bursts. Class c marks burst c % 4, with the
  // direction of the change flipping for every further group of four.
  VectorXr source = VectorXr::Zero(n);
  const int marked = label % 4;
  const double direction = (label / 4) % 2 == 0 ? 1.0 : -0.5;
  for (int k = 0; k < 4; ++k) {
    double freq = 450.0 + 150.0 * k;
    double amp = 1.0;
    if (k == marked) {
      freq *= 1.0 + 0.2 * sep * direction;
      amp *= 1.0 + 0.6 * sep * direction;
    }
    freq *= 1.0 + 0.2 * jit * rng.normal();
    amp *= std::exp(jit * rng.normal());
    const double center = len * ((k + 0.5) / 4.0 + 0.02 * jit * rng.normal());
    const double width = len * 0.025 * std::exp(0.2 * jit * rng.normal());
    add_burst(source, center, width, freq, amp, rng.uniform(0.0, 2.0 * std::numbers::pi), sample_rate);
    // Baseband pressure pulse under the burst (a zero-frequency "burst").
    add_burst(source, center, 1.2 * width, 0.0, amp, 0.5 * std::numbers::pi, sample_rate);
  }

  // Class-independent shared nuisance in the carrier band, above the
  // pressure pulses.
  VectorXr nuisance = VectorXr::Zero(n);
  for (int k = 0; k < 3; ++k) {
    const double f = rng.uniform(300.0, 1500.0);
    const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double a = rng.uniform(0.5, 1.0);
    for (Index i = 0; i < n; ++i) nuisance(i) += a * std::sin(2.0 * std::numbers::pi * f * i / sample_rate + ph);
  }
  const double sp = source.squaredNorm() / len;
  const double nr = rms(nuisance);
  if (nr > 0.0) source += nuisance * (snr_gain(sp, cfg.shared_snr_db) / nr);

  std::pair<VectorXr, VectorXr> out;
  int m = 0;
  for (const auto* taps : {&kFilterA, &kFilterV}) {
    const VectorXr shared = unit_rms(apply_filter(source, *taps));
    // Private high-frequency content, unrelated to the class.
    VectorXr priv = VectorXr::Zero(n);
    for (int k = 0; k < 8; ++k)
      add_burst(priv, rng.uniform(0.0, len), len * 0.01, rng.uniform(4000.0, 9000.0), std::exp(0.5 * rng.normal()),
                rng.uniform(0.0, 2.0 * std::numbers::pi), sample_rate);
    VectorXr x = cfg.cross_correlation * shared + (1.0 - cfg.cross_correlation) * unit_rms(priv);
    const double g = snr_gain(x.squaredNorm() / len, cfg.modality_noise_db);
    if (g > 0.0)
      for (Index i = 0; i < n; ++i) x(i) += g * rng.normal();
    (m++ == 0 ? out.first : out.second) = std::move(x);
  }
  return out;
}

std::string default_class_name(int c) { return "class" + std::to_string(c); }

}  // namespace

VectorXr modality_filter(const VectorXr& x, bool vibration) {
  return apply_filter(x, vibration ? kFilterV : kFilterA);
}

std::string to_json(const SyntheticConfig& cfg) {
  auto num = [](double x) -> json {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
  };
  json j;
  j["n_classes"] = cfg.n_classes;
  j["per_class_counts"] = cfg.per_class_counts;
  j["signal_length"] = cfg.signal_length;
  j["shared_snr_db"] = num(cfg.shared_snr_db);
  j["modality_noise_db"] = num(cfg.modality_noise_db);
  j["cross_correlation"] = cfg.cross_correlation;
  j["class_separation"] = cfg.class_separation;
  j["jitter"] = cfg.jitter;
  j["seed"] = cfg.seed;
  return j.dump();
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  validate(cfg);
  Dataset ds;
  ds.signal_length = cfg.signal_length;
  ds.provenance = Provenance::Synthetic;
  ds.config_echo = to_json(cfg);
  for (int c = 0; c < cfg.n_classes; ++c) ds.class_names.push_back(default_class_name(c));
  for (int c = 0; c < cfg.n_classes; ++c) {
    for (Index i = 0; i < cfg.per_class_counts[static_cast<std::size_t>(c)]; ++i) {
      Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)}));
      auto [a, v] = render_cycle(cfg.signal_length, c, cfg, kSyntheticSampleRate, rng);
      MultiModalSample s;
      s.id = "c" + std::to_string(c) + "-" + std::to_string(i);
      s.acoustic = std::move(a);
      s.vibration = std::move(v);
      s.label = c;
      standardize(s);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

// --- recordings --------------------------------------------------------------

void validate(const RawRecording& rec) {
  if (!(rec.sample_rate > 0.0)) throw Error("recording '" + rec.id + "': sample_rate must be positive");
  if (rec.acoustic.size() != rec.trigger.size() || rec.vibration.size() != rec.trigger.size())
    throw ShapeError("recording '" + rec.id + "': channels differ in length (" + std::to_string(rec.acoustic.size()) +
                     ", " + std::to_string(rec.vibration.size()) + ", " + std::to_string(rec.trigger.size()) + ")");
}

RawRecording generate_recording(const RecordingConfig& cfg) {
  if (!(cfg.duration_s > 0.0) || !(cfg.sample_rate > 0.0) || !(cfg.rpm > 0.0))
    throw Error("recording duration, sample rate and rpm must be positive");
  SyntheticConfig sig = cfg.signal;
  sig.n_classes = std::max(sig.n_classes, cfg.label + 1);
  sig.per_class_counts.assign(static_cast<std::size_t>(sig.n_classes), 1);
  validate(sig);

  Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(cfg.label), 0x5eedULL}));
  const Index total = static_cast<Index>(std::llround(cfg.duration_s * cfg.sample_rate));
  const double rev = cfg.sample_rate * 60.0 / cfg.rpm;
  const double offset = rng.uniform(0.1, 0.9) * rev;

  RawRecording r;
  r.id = "rec-l" + std::to_string(cfg.label) + "-s" + std::to_string(cfg.seed);
  r.sample_rate = cfg.sample_rate;
  r.label = cfg.label;
  r.acoustic = VectorXr::Zero(total);
  r.vibration = VectorXr::Zero(total);
  r.trigger = VectorXr::Constant(total, 0.2);

  // Pulses span 10% of a revolution: the detector thresholds between the
  // 5th and 95th percentiles, so the high level must cover more than 5%.
  const Index width = std::max<Index>(1, static_cast<Index>(0.1 * rev));
  // Cycles start two revolutions before the first mark so the recording
  // opens mid-cycle, as a free-running acquisition would.
  for (Index j = -2;; j += 2) {
    const Index start = static_cast<Index>(std::llround(offset + static_cast<double>(j) * rev));
    const Index end = static_cast<Index>(std::llround(offset + static_cast<double>(j + 2) * rev));
    if (start >= total) break;
    auto [a, v] = render_cycle(end - start, cfg.label, sig, cfg.sample_rate, rng);
    for (Index i = std::max<Index>(start, 0); i < std::min(end, total); ++i) {
      r.acoustic(i) = a(i - start);
      r.vibration(i) = v(i - start);
    }
  }
  for (Index j = 0;; ++j) {
    const Index mark = static_cast<Index>(std::llround(offset + static_cast<double>(j) * rev));
    if (mark >= total) break;
    r.trigger.segment(mark, std::min(width, total - mark)).setConstant(5.0);
  }
  for (Index i = 0; i < total; ++i) r.trigger(i) += 0.05 * rng.normal();
  return r;
}

std::vector<Index> detect_revolution_marks(const VectorXr& trigger, double hysteresis) {
  if (trigger.size() < 2) throw Error("trigger channel too short");
  if (!(hysteresis >= 0.0 && hysteresis < 1.0)) throw Error("trigger hysteresis must lie in [0, 1)");
  std::vector<double> sorted(trigger.data(), trigger.data() + trigger.size());
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double p) { return sorted[static_cast<std::size_t>(p * static_cast<double>(sorted.size() - 1))]; };
  const double lo = pct(0.05);
  const double hi = pct(0.95);
  const double range = hi - lo;
  if (!(range > 0.0)) throw Error("trigger channel is flat; no revolution marks");
  const double mid = 0.5 * (lo + hi);
  const double rise = mid + 0.5 * hysteresis * range;
  const double fall = mid - 0.5 * hysteresis * range;

  std::vector<Index> marks;
  bool high = trigger(0) >= rise;
  for (Index i = 1; i < trigger.size(); ++i) {
    if (!high && trigger(i) >= rise) {
      high = true;
      marks.push_back(i);
    } else if (high && trigger(i) <= fall) {
      high = false;
    }
  }
  return marks;
}

VectorXr resample_linear(const VectorXr& x, Index length) {
  if (x.size() < 2 || length < 2) throw Error("resampling needs at least two points on each side");
  VectorXr y(length);
  const double step = static_cast<double>(x.size() - 1) / static_cast<double>(length - 1);
  for (Index j = 0; j < length; ++j) {
    const double pos = step * static_cast<double>(j);
    const Index i = std::min<Index>(static_cast<Index>(pos), x.size() - 2);
    const double f = pos - static_cast<double>(i);
    y(j) = (1.0 - f) * x(i) + f * x(i + 1);
  }
  return y;
}

std::vector<MultiModalSample> segment_recording(const RawRecording& rec, const SegmentConfig& cfg) {
  validate(rec);
  const auto marks = detect_revolution_marks(rec.trigger, cfg.hysteresis);
  return segment_recording(rec, marks, cfg);
}

std::vector<MultiModalSample> segment_recording(const RawRecording& rec, std::span<const Index> marks,
                                                const SegmentConfig& cfg) {
  validate(rec);
  if (cfg.stride_revolutions < 1) throw Error("segment stride must be at least one revolution");
  if (marks.size() < 3)
    throw Error("recording '" + rec.id + "': found " + std::to_string(marks.size()) +
                " revolution marks, need at least 3 for one two-revolution window");
  for (std::size_t i = 0; i < marks.size(); ++i) {
    if (marks[i] < 0 || marks[i] > rec.trigger.size())
      throw Error("recording '" + rec.id + "': revolution mark " + std::to_string(i) + " at " +
                  std::to_string(marks[i]) + " lies outside the recording");
    if (i > 0 && marks[i] <= marks[i - 1])
      throw Error("recording '" + rec.id + "': revolution marks not increasing at index " + std::to_string(i) +
                  " (" + std::to_string(marks[i - 1]) + " then " + std::to_string(marks[i]) + ")");
  }
  std::vector<MultiModalSample> out;
  const auto stride = static_cast<std::size_t>(cfg.stride_revolutions);
  for (std::size_t i = 0; i + 2 < marks.size(); i += stride) {
    const Index start = marks[i];
    const Index len = marks[i + 2] - start;
    MultiModalSample s;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "/w%03zu", out.size());
    s.id = rec.id + buf;
    s.label = rec.label;
    s.acoustic = resample_linear(rec.acoustic.segment(start, len), cfg.signal_length);
    s.vibration = resample_linear(rec.vibration.segment(start, len), cfg.signal_length);
    out.push_back(std::move(s));
  }
  return out;
}

void standardize(MultiModalSample& s) {
  for (VectorXr* x : {&s.acoustic, &s.vibration}) {
    const double mean = x->mean();
    x->array() -= mean;
    const double sd = std::sqrt(x->squaredNorm() / static_cast<double>(x->size()));
    if (sd > 0.0) *x /= sd;
  }
}

void standardize(std::vector<MultiModalSample>& samples) {
  for (auto& s : samples) standardize(s);
}

// --- outliers ----------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
  const double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2)));
}

// Robust z-scores of `values` (0.6745 * deviation / MAD).
std::vector<double> robust_z(const std::vector<double>& values) {
  const double med = median(values);
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - med);
  const double mad = std::max({median(dev), 1e-6 * std::abs(med), 1e-300});
  for (auto& d : dev) d = 0.6745 * d / mad;
  return dev;
}

}  // namespace

std::vector<MultiModalSample> remove_outliers(const std::vector<MultiModalSample>& samples, double z_threshold,
                                              OutlierReport* report) {
  if (std::isnan(z_threshold)) throw Error("outlier threshold must be a number");
  std::vector<MultiModalSample> kept = samples;
  OutlierReport rep;
  rep.threshold = z_threshold;
  for (bool changed = true; changed && !std::isinf(z_threshold);) {
    changed = false;
    std::vector<int> labels;
    for (const auto& s : kept)
      if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) labels.push_back(s.label);
    std::vector<double> score(kept.size(), 0.0);
    for (int c : labels) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < kept.size(); ++i)
        if (kept[i].label == c) members.push_back(i);
      if (members.size() < 2) continue;
      for (int m = 0; m < 2; ++m) {
        std::vector<double> r;
        for (auto i : members) r.push_back(rms(m == 0 ? kept[i].acoustic : kept[i].vibration));
        const auto z = robust_z(r);
        for (std::size_t t = 0; t < members.size(); ++t) score[members[t]] = std::max(score[members[t]], z[t]);
      }
    }
    std::vector<MultiModalSample> next;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (score[i] > z_threshold) {
        rep.dropped.push_back({kept[i].id, kept[i].label, score[i]});
        changed = true;
      } else {
        next.push_back(std::move(kept[i]));
      }
    }
    kept = std::move(next);
  }
  rep.kept = static_cast<Index>(kept.size());
  if (report != nullptr) *report = std::move(rep);
  return kept;
}

// --- splits ------------------------------------------------------------------

HoldoutSplit split_holdout(const Dataset& ds, Index per_class, std::uint64_t seed) {
  if (per_class < 0) throw Error("holdout per_class must be non-negative");
  HoldoutSplit split;
  std::vector<char> in_validation(ds.samples.size(), 0);
  for (int c = 0; c < ds.num_classes(); ++c) {
    std::vector<Index> members;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (ds.samples[i].label == c) members.push_back(static_cast<Index>(i));
    if (per_class > 0 && static_cast<Index>(members.size()) <= per_class)
      throw Error("class '" + ds.class_names[static_cast<std::size_t>(c)] + "' has " +
                  std::to_string(members.size()) + " samples; the holdout needs more than " +
                  std::to_string(per_class));
    Rng rng(derive_seed(seed, {0x401d0u, static_cast<std::uint64_t>(c)}));
    rng.shuffle(members);
    for (Index i = 0; i < per_class; ++i) in_validation[static_cast<std::size_t>(members[static_cast<std::size_t>(i)])] = 1;
  }
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    (in_validation[i] ? split.validation : split.pool).push_back(static_cast<Index>(i));
  return split;
}

std::vector<Index> FoldPlan::test_counts(const Dataset& ds, int fold) const {
  std::vector<Index> counts(static_cast<std::size_t>(ds.num_classes()), 0);
  for (Index i : test.at(static_cast<std::size_t>(fold))) ++counts[static_cast<std::size_t>(ds.samples[static_cast<std::size_t>(i)].label)];
  return counts;
}

FoldPlan stratified_folds(const Dataset& ds, const HoldoutSplit& split, int k, std::uint64_t seed) {
  if (k < 2) throw Error("stratified folds need k >= 2 (got " + std::to_string(k) + ")");
  FoldPlan plan;
  plan.k = k;
  plan.validation = split.validation;
  plan.pool = split.pool;
  plan.test.assign(static_cast<std::size_t>(k), {});
  std::size_t counter = 0;
  for (int c = 0; c < ds.num_classes(); ++c) {
    std::vector<Index> members;
    for (Index i : split.pool)
      if (ds.samples.at(static_cast<std::size_t>(i)).label == c) members.push_back(i);
    if (members.empty()) continue;
    if (static_cast<int>(members.size()) < k)
      throw Error("class '" + ds.class_names[static_cast<std::size_t>(c)] + "' has " +
                  std::to_string(members.size()) + " pool samples, fewer than k = " + std::to_string(k));
    Rng rng(derive_seed(seed, {0xf01d5u, static_cast<std::uint64_t>(c)}));
    rng.shuffle(members);
    for (Index i : members) plan.test[counter++ % static_cast<std::size_t>(k)].push_back(i);
  }
  for (auto& t : plan.test) std::sort(t.begin(), t.end());
  for (const auto& t : plan.test) {
    std::vector<Index> train;
    std::set_difference(split.pool.begin(), split.pool.end(), t.begin(), t.end(), std::back_inserter(train));
    plan.train.push_back(std::move(train));
  }
  return plan;
}

// --- files -------------------------------------------------------------------

namespace {

void put_values(std::ostream& os, const VectorXr& x, Precision p) {
  for (Index i = 0; i < x.size(); ++i) {
    if (p == Precision::F64)
      io::put_f64(os, x(i));
    else
      io::put_f32(os, static_cast<float>(x(i)));
  }
}

std::size_t value_bytes(Precision p) { return p == Precision::F64 ? 8 : 4; }

VectorXr get_values(const char* data, Index n, Precision p) {
  std::istringstream is(std::string(data, static_cast<std::size_t>(n) * value_bytes(p)));
  VectorXr x(n);
  for (Index i = 0; i < n; ++i) x(i) = p == Precision::F64 ? io::get_f64(is) : static_cast<double>(io::get_f32(is));
  return x;
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is), {});
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("failed writing " + path.string());
}

VectorXr read_raw_impl(const std::filesystem::path& path, Precision p) {
  const std::string bytes = slurp(path);
  if (bytes.size() % value_bytes(p) != 0)
    throw io::FormatError(path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of " +
                          std::to_string(value_bytes(p)) + " bytes");
  return get_values(bytes.data(), static_cast<Index>(bytes.size() / value_bytes(p)), p);
}

void write_raw_impl(const std::filesystem::path& path, const VectorXr& x, Precision p) {
  std::ostringstream os;
  put_values(os, x, p);
  write_file(path, os.str());
}

json parse_manifest(const std::filesystem::path& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw io::FormatError(path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw io::FormatError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw io::FormatError(where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& path, Precision precision) {
  validate(ds);
  std::ostringstream payload;
  json records = json::array();
  for (const auto& s : ds.samples) {
    const auto offset = static_cast<std::uint64_t>(payload.tellp());
    std::ostringstream one;
    put_values(one, s.acoustic, precision);
    put_values(one, s.vibration, precision);
    const std::string bytes = one.str();
    payload << bytes;
    records.push_back({{"id", s.id}, {"label", s.label}, {"offset", offset}, {"bytes", bytes.size()},
                       {"crc32", crc32_of(bytes)}});
  }
  json m;
  m["format_version"] = kDatasetFormatVersion;
  m["precision"] = to_string(precision);
  m["byte_order"] = "little";
  m["class_names"] = ds.class_names;
  m["signal_length"] = ds.signal_length;
  m["counts"] = class_counts(ds);
  m["provenance"] = to_string(ds.provenance);
  m["config"] = json::parse(ds.config_echo);
  m["samples"] = std::move(records);
  const std::string manifest = m.dump(1);
  std::string out = std::string(kDatasetMagic) + "\n" + std::to_string(manifest.size()) + "\n" + manifest;
  out += payload.str();
  write_file(path, out);
}

Dataset read_dataset(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const std::string where = path.string();
  const std::string magic = std::string(kDatasetMagic) + "\n";
  if (bytes.compare(0, magic.size(), magic) != 0) throw io::FormatError(where + ": not a dataset file (bad magic)");
  const std::size_t eol = bytes.find('\n', magic.size());
  if (eol == std::string::npos) throw io::FormatError(where + ": truncated header");
  std::size_t manifest_len = 0;
  try {
    manifest_len = std::stoull(bytes.substr(magic.size(), eol - magic.size()));
  } catch (const std::exception&) {
    throw io::FormatError(where + ": malformed manifest length");
  }
  const std::size_t payload_start = eol + 1 + manifest_len;
  if (payload_start > bytes.size()) throw io::FormatError(where + ": truncated manifest");
  json m;
  try {
    m = json::parse(bytes.substr(eol + 1, manifest_len));
  } catch (const json::exception& e) {
    throw io::FormatError(where + ": manifest: " + e.what());
  }
  const int version = field<int>(m, "format_version", where);
  if (version != kDatasetFormatVersion)
    throw io::FormatError(where + ": format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kDatasetFormatVersion) + ")");
  const Precision precision = parse_precision(field<std::string>(m, "precision", where));

  Dataset ds;
  ds.class_names = field<std::vector<std::string>>(m, "class_names", where);
  ds.signal_length = field<Index>(m, "signal_length", where);
  ds.provenance = parse_provenance(field<std::string>(m, "provenance", where));
  ds.config_echo = m.contains("config") ? m["config"].dump() : "{}";
  const std::string_view payload(bytes.data() + payload_start, bytes.size() - payload_start);
  const std::size_t expect = 2 * static_cast<std::size_t>(ds.signal_length) * value_bytes(precision);
  for (const auto& r : field<json>(m, "samples", where)) {
    MultiModalSample s;
    s.id = field<std::string>(r, "id", where);
    s.label = field<int>(r, "label", where);
    const auto offset = field<std::uint64_t>(r, "offset", where);
    const auto size = field<std::uint64_t>(r, "bytes", where);
    if (size != expect)
      throw io::FormatError(where + ": sample '" + s.id + "' has " + std::to_string(size) + " bytes, expected " +
                            std::to_string(expect));
    if (offset + size > payload.size()) throw io::FormatError(where + ": truncated payload at sample '" + s.id + "'");
    const std::string_view chunk = payload.substr(offset, size);
    if (crc32_of(chunk) != field<std::uint32_t>(r, "crc32", where))
      throw io::FormatError(where + ": checksum mismatch in sample '" + s.id + "'");
    s.acoustic = get_values(chunk.data(), ds.signal_length, precision);
    s.vibration = get_values(chunk.data() + size / 2, ds.signal_length, precision);
    ds.samples.push_back(std::move(s));
  }
  validate(ds);
  return ds;
}

VectorXr read_signal(const std::filesystem::path& path, Precision precision) {
  return read_raw_impl(path, precision);
}

void write_signal(const std::filesystem::path& path, const VectorXr& x, Precision precision) {
  write_raw_impl(path, x, precision);
}

Dataset import_sample_directory(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  if (!std::filesystem::exists(mpath)) throw Error(dir.string() + ": no manifest.json");
  const json m = parse_manifest(mpath);
  const std::string where = mpath.string();
  const Precision precision = parse_precision(m.value("precision", std::string("f32")));
  Dataset ds;
  ds.provenance = Provenance::Imported;
  ds.signal_length = field<Index>(m, "signal_length", where);
  ds.class_names = field<std::vector<std::string>>(m, "class_names", where);
  ds.config_echo = json{{"source", dir.string()}}.dump();
  for (const auto& r : field<json>(m, "samples", where)) {
    MultiModalSample s;
    s.id = field<std::string>(r, "id", where);
    s.label = field<int>(r, "label", where);
    s.acoustic = read_raw_impl(dir / field<std::string>(r, "acoustic", where), precision);
    s.vibration = read_raw_impl(dir / field<std::string>(r, "vibration", where), precision);
    ds.samples.push_back(std::move(s));
  }
  validate(ds);
  return ds;
}

void export_sample_directory(const Dataset& ds, const std::filesystem::path& dir, Precision precision) {
  validate(ds);
  std::filesystem::create_directories(dir);
  json m;
  m["format"] = "mmcae-samples";
  m["precision"] = to_string(precision);
  m["signal_length"] = ds.signal_length;
  m["class_names"] = ds.class_names;
  json list = json::array();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const std::string stem = "s" + std::to_string(i);
    write_raw_impl(dir / (stem + ".a.bin"), s.acoustic, precision);
    write_raw_impl(dir / (stem + ".v.bin"), s.vibration, precision);
    list.push_back({{"id", s.id}, {"label", s.label}, {"acoustic", stem + ".a.bin"}, {"vibration", stem + ".v.bin"}});
  }
  m["samples"] = std::move(list);
  write_file(dir / "manifest.json", m.dump(1));
}

std::vector<RawRecording> read_recording_directory(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  if (!std::filesystem::exists(mpath)) throw Error(dir.string() + ": no manifest.json");
  const json m = parse_manifest(mpath);
  const std::string where = mpath.string();
  const Precision precision = parse_precision(m.value("precision", std::string("f32")));
  std::vector<RawRecording> out;
  for (const auto& r : field<json>(m, "recordings", where)) {
    RawRecording rec;
    rec.id = field<std::string>(r, "id", where);
    rec.label = field<int>(r, "label", where);
    rec.sample_rate = field<double>(r, "sample_rate", where);
    rec.acoustic = read_raw_impl(dir / field<std::string>(r, "acoustic", where), precision);
    rec.vibration = read_raw_impl(dir / field<std::string>(r, "vibration", where), precision);
    rec.trigger = read_raw_impl(dir / field<std::string>(r, "trigger", where), precision);
    validate(rec);
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw Error(where + ": no recordings listed");
  return out;
}

void write_recording_directory(std::span<const RawRecording> recordings, const std::filesystem::path& dir,
                               Precision precision) {
  std::filesystem::create_directories(dir);
  json list = json::array();
  int max_label = 0;
  for (const auto& rec : recordings) {
    validate(rec);
    max_label = std::max(max_label, rec.label);
    const std::string stem = rec.id;
    write_raw_impl(dir / (stem + ".acoustic.bin"), rec.acoustic, precision);
    write_raw_impl(dir / (stem + ".vibration.bin"), rec.vibration, precision);
    write_raw_impl(dir / (stem + ".trigger.bin"), rec.trigger, precision);
    list.push_back({{"id", rec.id},
                    {"label", rec.label},
                    {"sample_rate", rec.sample_rate},
                    {"acoustic", stem + ".acoustic.bin"},
                    {"vibration", stem + ".vibration.bin"},
                    {"trigger", stem + ".trigger.bin"}});
  }
  json m;
  m["format"] = "mmcae-recordings";
  m["precision"] = to_string(precision);
  std::vector<std::string> names;
  for (int c = 0; c <= max_label; ++c) names.push_back(default_class_name(c));
  m["class_names"] = names;
  m["recordings"] = std::move(list);
  write_file(dir / "manifest.json", m.dump(1));
}

}  // namespace mmcae
