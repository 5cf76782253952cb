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

#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mmcae::cli {

json default_run_config() {
  return json::parse(R"({
  "seed": 1,
  "out": ".",
  "data": {
    "preset": "moderate",
    "n_classes": null,
    "per_class_counts": null,
    "signal_length": null,
    "shared_snr_db": null,
    "modality_noise_db": null,
    "cross_correlation": null,
    "class_separation": null,
    "jitter": null,
    "seed": 2026,
    "precision": "f64"
  },
  "recordings": {
    "per_class": 2,
    "n_classes": 4,
    "duration_s": 5.0,
    "rpm": 867.0,
    "sample_rate": 32768.0
  },
  "ingest": {
    "signal_length": 4800,
    "stride_revolutions": 2,
    "hysteresis": 0.1,
    "outlier_z": 4.0
  },
  "model": {
    "architecture": "paper",
    "init_seed": null
  },
  "train": {
    "batch_size": 32,
    "max_epochs": 300,
    "patience": 20,
    "learning_rate": 0.001,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "weight_decay": 1e-5,
    "validation_metric": "val_loss",
    "calibration_batches": 4
  },
  "loss": {
    "variant": "proposed",
    "delta1": 1.0,
    "delta2": 1.0,
    "lambda1": null,
    "lambda2": null,
    "alpha1": null,
    "noise_low": -0.05,
    "noise_high": 0.05,
    "margin": null,
    "corr_weight": 1.0
  },
  "probe": {
    "train_on": "joint",
    "max_iterations": 3000,
    "tolerance": 1e-6,
    "learning_rate": 0.01
  },
  "evaluation": {
    "folds": 7,
    "holdout_per_class": 10,
    "averaging": "weighted",
    "variants": ["proposed", "vanilla", "no-missing", "corrnet"],
    "jobs": 1,
    "cutoff_hz": 250.0,
    "sample_rate": 32768.0
  }
})");
}

double as_double(const json& j, const std::string& key) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
  }
  throw Error("config key '" + key + "' must be a number");
}

namespace {

bool fits(const json& def, const json& v) {
  if (v.is_null()) return def.is_null();
  if (def.is_null()) return v.is_number() || v.is_string() || v.is_array();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number_float()) return v.is_number() || v.is_string();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_boolean()) return v.is_boolean();
  return false;
}

// Keys whose default is null but which take a value.
bool nullable(const std::string& key) {
  static const char* keys[] = {"/data/n_classes",      "/data/per_class_counts", "/data/signal_length",
                               "/data/shared_snr_db",  "/data/modality_noise_db", "/data/cross_correlation",
                               "/data/class_separation", "/data/jitter",         "/model/init_seed",
                               "/loss/lambda1",        "/loss/lambda2",          "/loss/alpha1",
                               "/loss/margin"};
  for (const char* k : keys)
    if (key == k) return true;
  return false;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

json scalar_from_text(const std::string& text, bool integer, const std::string& key) {
  try {
    std::size_t used = 0;
    if (integer) {
      const long long v = std::stoll(text, &used);
      if (used == text.size()) return v;
    } else {
      if (text == "inf" || text == "+inf" || text == "-inf") return text;
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw Error("option for '" + key + "' expects " + (integer ? "an integer" : "a number") + ", got '" + text + "'");
}

std::uint64_t as_u64(const json& j, const std::string& key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  throw Error("config key '" + key + "' must be a non-negative integer");
}

int as_int(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw Error("config key '" + key + "' must be an integer");
  return j.get<int>();
}

std::optional<double> as_optional(const json& j, const std::string& key) {
  if (j.is_null()) return std::nullopt;
  return as_double(j, key);
}

}  // namespace

namespace {

// "/train/patience" -> "train.patience"
std::string dotted(const std::string& pointer) {
  std::string k = pointer.substr(pointer.starts_with('/') ? 1 : 0);
  std::replace(k.begin(), k.end(), '/', '.');
  return k;
}

}  // namespace

void merge_checked(json& base, const json& overlay, const std::string& where) {
  if (!overlay.is_object()) throw Error("config " + (where.empty() ? std::string("document") : "'" + dotted(where) + "'") +
                                        " must be an object");
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = where + "/" + it.key();
    if (!base.contains(it.key())) throw Error("unknown config key '" + dotted(key) + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
      continue;
    }
    const bool ok = nullable(key) ? (it.value().is_null() || fits(json(nullptr), it.value())) : fits(slot, it.value());
    if (!ok) throw Error("config key '" + dotted(key) + "' has the wrong type");
    slot = it.value();
  }
}

json parse_flag_value(const json& defaults, const std::string& pointer, const std::string& text) {
  const json& def = defaults.at(json::json_pointer(pointer));
  const std::string key = dotted(pointer);
  if (text == "none" && nullable(pointer)) return nullptr;
  if (def.is_array() || pointer == "/data/per_class_counts") {
    json arr = json::array();
    const bool numbers = pointer == "/data/per_class_counts";
    for (const auto& item : split(text, ',')) arr.push_back(numbers ? scalar_from_text(item, true, key) : json(item));
    return arr;
  }
  if (def.is_string()) return text;
  const bool integer = def.is_number_integer() || pointer == "/data/n_classes" || pointer == "/data/signal_length" ||
                       pointer == "/model/init_seed";
  return scalar_from_text(text, integer, key);
}

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& file, const json& overrides) {
  RunConfig rc;
  rc.doc_ = default_run_config();
  if (file) {
    std::ifstream is(*file);
    if (!is) throw Error("cannot open config file " + file->string());
    json parsed;
    try {
      parsed = json::parse(is);
    } catch (const json::exception& e) {
      throw Error(file->string() + ": " + e.what());
    }
    merge_checked(rc.doc_, parsed);
  }
  merge_checked(rc.doc_, overrides);

  // Fill derived synthetic fields from the preset.
  json& d = rc.doc_["data"];
  const SyntheticConfig preset = synthetic_preset(d["preset"].get<std::string>());
  auto fill = [&](const char* k, const json& v) {
    if (d[k].is_null()) d[k] = v;
  };
  fill("n_classes", preset.n_classes);
  if (d["per_class_counts"].is_null()) {
    // A custom class count without counts gets 10 samples per class.
    const int n = d["n_classes"].get<int>();
    d["per_class_counts"] = n == preset.n_classes ? json(preset.per_class_counts) : json(std::vector<Index>(n, 10));
  }
  fill("signal_length", preset.signal_length);
  fill("shared_snr_db", preset.shared_snr_db);
  fill("modality_noise_db", preset.modality_noise_db);
  fill("cross_correlation", preset.cross_correlation);
  fill("class_separation", preset.class_separation);
  fill("jitter", preset.jitter);
  if (rc.doc_["model"]["init_seed"].is_null())
    rc.doc_["model"]["init_seed"] = derive_seed(rc.seed(), {0x1417, 0});

  // Convert everything once so invalid values fail early.
  validate(rc.synthetic());
  (void)rc.precision();
  (void)rc.segment();
  (void)rc.outlier_z();
  (void)rc.recording();
  validate(rc.cross_validation());
  (void)rc.variants();
  (void)rc.probe_set();
  const double cut = rc.cutoff_hz();
  const double sr = rc.band_sample_rate();
  if (!(sr > 0.0) || !(cut > 0.0 && cut < sr / 2.0))
    throw Error("evaluation.cutoff_hz must lie in (0, evaluation.sample_rate / 2)");
  return rc;
}

std::filesystem::path RunConfig::out_dir() const { return doc_["out"].get<std::string>(); }

std::uint64_t RunConfig::seed() const { return as_u64(doc_["seed"], "seed"); }

SyntheticConfig RunConfig::synthetic() const {
  const json& d = doc_["data"];
  SyntheticConfig c;
  c.n_classes = as_int(d["n_classes"], "data.n_classes");
  c.per_class_counts.clear();
  for (const auto& v : d["per_class_counts"]) {
    if (!v.is_number_integer()) throw Error("config key 'data.per_class_counts' must hold integers");
    c.per_class_counts.push_back(v.get<Index>());
  }
  c.signal_length = as_int(d["signal_length"], "data.signal_length");
  c.shared_snr_db = as_double(d["shared_snr_db"], "data.shared_snr_db");
  c.modality_noise_db = as_double(d["modality_noise_db"], "data.modality_noise_db");
  c.cross_correlation = as_double(d["cross_correlation"], "data.cross_correlation");
  c.class_separation = as_double(d["class_separation"], "data.class_separation");
  c.jitter = as_double(d["jitter"], "data.jitter");
  c.seed = as_u64(d["seed"], "data.seed");
  return c;
}

Precision RunConfig::precision() const { return parse_precision(doc_["data"]["precision"].get<std::string>()); }

SegmentConfig RunConfig::segment() const {
  const json& g = doc_["ingest"];
  SegmentConfig s;
  s.signal_length = as_int(g["signal_length"], "ingest.signal_length");
  s.stride_revolutions = as_int(g["stride_revolutions"], "ingest.stride_revolutions");
  s.hysteresis = as_double(g["hysteresis"], "ingest.hysteresis");
  if (s.signal_length < 2) throw Error("ingest.signal_length must be at least 2");
  if (s.stride_revolutions < 1) throw Error("ingest.stride_revolutions must be at least 1");
  if (!(s.hysteresis >= 0.0 && s.hysteresis < 1.0)) throw Error("ingest.hysteresis must lie in [0, 1)");
  return s;
}

double RunConfig::outlier_z() const {
  const double z = as_double(doc_["ingest"]["outlier_z"], "ingest.outlier_z");
  if (!(z > 0.0)) throw Error("ingest.outlier_z must be positive (inf disables screening)");
  return z;
}

RecordingConfig RunConfig::recording() const {
  const json& r = doc_["recordings"];
  RecordingConfig c;
  c.duration_s = as_double(r["duration_s"], "recordings.duration_s");
  c.rpm = as_double(r["rpm"], "recordings.rpm");
  c.sample_rate = as_double(r["sample_rate"], "recordings.sample_rate");
  c.signal = synthetic();
  if (!(c.duration_s > 0.0) || !(c.rpm > 0.0) || !(c.sample_rate > 0.0))
    throw Error("recordings duration, rpm and sample rate must be positive");
  if (recordings_per_class() < 1 || recording_classes() < 1)
    throw Error("recordings.per_class and recordings.n_classes must be positive");
  return c;
}

int RunConfig::recordings_per_class() const { return as_int(doc_["recordings"]["per_class"], "recordings.per_class"); }
int RunConfig::recording_classes() const { return as_int(doc_["recordings"]["n_classes"], "recordings.n_classes"); }

std::string RunConfig::architecture() const { return doc_["model"]["architecture"].get<std::string>(); }

std::uint64_t RunConfig::init_seed() const { return as_u64(doc_["model"]["init_seed"], "model.init_seed"); }

TrainConfig RunConfig::train() const {
  const json& t = doc_["train"];
  const json& l = doc_["loss"];
  TrainConfig c;
  c.batch_size = as_int(t["batch_size"], "train.batch_size");
  c.max_epochs = as_int(t["max_epochs"], "train.max_epochs");
  c.patience = as_int(t["patience"], "train.patience");
  c.adam.learning_rate = as_double(t["learning_rate"], "train.learning_rate");
  c.adam.beta1 = as_double(t["beta1"], "train.beta1");
  c.adam.beta2 = as_double(t["beta2"], "train.beta2");
  c.adam.epsilon = as_double(t["epsilon"], "train.epsilon");
  c.adam.weight_decay = as_double(t["weight_decay"], "train.weight_decay");
  c.validation_metric = parse_validation_metric(t["validation_metric"].get<std::string>());
  c.calibration_batches = as_int(t["calibration_batches"], "train.calibration_batches");
  c.seed = seed();
  c.loss.variant = parse_variant(l["variant"].get<std::string>());
  c.loss.delta1 = as_double(l["delta1"], "loss.delta1");
  c.loss.delta2 = as_double(l["delta2"], "loss.delta2");
  c.loss.lambda1 = as_optional(l["lambda1"], "loss.lambda1");
  c.loss.lambda2 = as_optional(l["lambda2"], "loss.lambda2");
  c.loss.alpha1 = as_optional(l["alpha1"], "loss.alpha1");
  c.loss.noise_low = as_double(l["noise_low"], "loss.noise_low");
  c.loss.noise_high = as_double(l["noise_high"], "loss.noise_high");
  c.loss.margin = as_optional(l["margin"], "loss.margin");
  c.loss.corr_weight = as_double(l["corr_weight"], "loss.corr_weight");
  validate(c);
  return c;
}

ClassifierConfig RunConfig::probe() const {
  const json& p = doc_["probe"];
  ClassifierConfig c;
  c.max_iterations = as_int(p["max_iterations"], "probe.max_iterations");
  c.tolerance = as_double(p["tolerance"], "probe.tolerance");
  c.adam.learning_rate = as_double(p["learning_rate"], "probe.learning_rate");
  if (c.max_iterations < 1) throw Error("probe.max_iterations must be positive");
  nn::validate(c.adam);
  return c;
}

ProbeSet RunConfig::probe_set() const {
  const auto s = doc_["probe"]["train_on"].get<std::string>();
  if (s == "joint") return ProbeSet::Joint;
  if (s == "a") return ProbeSet::SingleA;
  if (s == "v") return ProbeSet::SingleV;
  if (s == "union") return ProbeSet::Union;
  throw Error("probe.train_on must be joint, a, v or union");
}

CrossValidationConfig RunConfig::cross_validation() const {
  const json& e = doc_["evaluation"];
  CrossValidationConfig c;
  c.folds = as_int(e["folds"], "evaluation.folds");
  c.holdout_per_class = as_int(e["holdout_per_class"], "evaluation.holdout_per_class");
  c.seed = seed();
  c.architecture = architecture();
  c.train = train();
  c.probe = probe();
  c.averaging = parse_averaging(e["averaging"].get<std::string>());
  c.jobs = as_int(e["jobs"], "evaluation.jobs");
  return c;
}

std::vector<Variant> RunConfig::variants() const {
  std::vector<Variant> out;
  for (const auto& v : doc_["evaluation"]["variants"]) {
    if (!v.is_string()) throw Error("config key 'evaluation.variants' must hold strings");
    const Variant x = parse_variant(v.get<std::string>());
    for (Variant y : out)
      if (y == x) throw Error("variant '" + v.get<std::string>() + "' listed twice");
    out.push_back(x);
  }
  if (out.empty()) throw Error("evaluation.variants must not be empty");
  return out;
}

double RunConfig::cutoff_hz() const { return as_double(doc_["evaluation"]["cutoff_hz"], "evaluation.cutoff_hz"); }
double RunConfig::band_sample_rate() const {
  return as_double(doc_["evaluation"]["sample_rate"], "evaluation.sample_rate");
}

json RunConfig::echo() const {
  json e = doc_;
  e.erase("out");
  e["evaluation"].erase("jobs");
  return e;
}

}  // namespace mmcae::cli
