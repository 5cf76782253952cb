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

#include "mmcae/evaluation.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mmcae::cli {

using json = nlohmann::ordered_json;

/// Every documented key with its default. Null means "derived": synthetic
/// fields come from data.preset, loss weights are calibrated, margin is off.
json default_run_config();

/// Recursively overlays `overlay` onto `base`. Throws on keys absent from
/// `base` or on values whose JSON type does not fit the default.
void merge_checked(json& base, const json& overlay, const std::string& where = "");

/// Parses a flag value into the JSON type of the default at `pointer`.
json parse_flag_value(const json& defaults, const std::string& pointer, const std::string& text);

/// Effective configuration: defaults, then the file, then flag overrides,
/// with derived fields filled in. Throws Error on any invalid value.
class RunConfig {
 public:
  static RunConfig load(const std::optional<std::filesystem::path>& file, const json& overrides);

  const json& doc() const { return doc_; }
  std::filesystem::path out_dir() const;
  std::uint64_t seed() const;

  SyntheticConfig synthetic() const;
  Precision precision() const;
  SegmentConfig segment() const;
  double outlier_z() const;
  RecordingConfig recording() const;
  int recordings_per_class() const;
  int recording_classes() const;
  std::string architecture() const;
  std::uint64_t init_seed() const;
  TrainConfig train() const;
  ClassifierConfig probe() const;
  ProbeSet probe_set() const;
  CrossValidationConfig cross_validation() const;
  std::vector<Variant> variants() const;
  double cutoff_hz() const;
  double band_sample_rate() const;

  /// The configuration echoed into artifacts: everything that can change a
  /// number (no output directory, no thread count).
  json echo() const;
  std::string echo_text() const { return echo().dump(); }

 private:
  json doc_;
};

/// Number or one of the strings "inf", "+inf", "-inf".
double as_double(const json& j, const std::string& key);

}  // namespace mmcae::cli
