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

#include <doctest.h>

#include "mmcae/binary_io.hpp"
#include "mmcae/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace mmcae;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mmcae_data_" + name);
  fs::remove_all(p);
  return p;
}

SyntheticConfig small_config(Index per_class = 6, Index length = 256) {
  SyntheticConfig cfg;
  cfg.per_class_counts.assign(4, per_class);
  cfg.signal_length = length;
  return cfg;
}

double pearson(const VectorXr& x, const VectorXr& y) {
  const VectorXr xc = x.array() - x.mean();
  const VectorXr yc = y.array() - y.mean();
  return xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm());
}

bool same_samples(const Dataset& a, const Dataset& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto& x = a.samples[i];
    const auto& y = b.samples[i];
    if (x.id != y.id || x.label != y.label) return false;
    if (!(x.acoustic.array() == y.acoustic.array()).all() || !(x.vibration.array() == y.vibration.array()).all())
      return false;
  }
  return true;
}

// A trigger with rectangular pulses starting at `marks`.
VectorXr pulse_train(Index n, const std::vector<Index>& marks, Index width = 5) {
  VectorXr t = VectorXr::Zero(n);
  for (Index m : marks) t.segment(m, std::min(width, n - m)).setConstant(1.0);
  return t;
}

RawRecording ramp_recording(Index n) {
  RawRecording r;
  r.id = "ramp";
  r.acoustic = VectorXr::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  r.vibration = -r.acoustic;
  r.trigger = VectorXr::Zero(n);
  return r;
}

}  // namespace

TEST_CASE("default synthetic dataset has 705 samples with counts 244/120/173/168") {
  const Dataset ds = generate_synthetic(SyntheticConfig{});
  CHECK(ds.size() == 705);
  CHECK(class_counts(ds) == std::vector<Index>{244, 120, 173, 168});
  CHECK(ds.signal_length == 4800);
  CHECK(ds.samples.front().acoustic.size() == 4800);
}

TEST_CASE("synthetic signals are standardized per signal") {
  const Dataset ds = generate_synthetic(small_config());
  for (const auto& s : ds.samples)
    for (const VectorXr* x : {&s.acoustic, &s.vibration}) {
      CHECK(std::abs(x->mean()) < 1e-9);
      const double var = (x->array() - x->mean()).square().mean();
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("synthetic generation is deterministic in the seed") {
  const auto cfg = small_config();
  CHECK(same_samples(generate_synthetic(cfg), generate_synthetic(cfg)));
  auto other = cfg;
  other.seed += 1;
  CHECK_FALSE(same_samples(generate_synthetic(cfg), generate_synthetic(other)));
}

TEST_CASE("with full coupling and no noise both modalities are filters of one source") {
  SyntheticConfig cfg = small_config(3, 512);
  cfg.cross_correlation = 1.0;
  cfg.modality_noise_db = INFINITY;
  const Dataset ds = generate_synthetic(cfg);
  for (const auto& s : ds.samples) {
    // Causal FIR filters commute, so filtering each modality by the other's
    // filter yields affine images of one sequence once the taps have filled.
    const VectorXr lhs = modality_filter(s.acoustic, true).tail(400);
    const VectorXr rhs = modality_filter(s.vibration, false).tail(400);
    CHECK(pearson(lhs, rhs) == doctest::Approx(1.0).epsilon(1e-9));
  }
  // With the private component and noise on, the identity breaks.
  const Dataset noisy = generate_synthetic(small_config(3, 512));
  const auto& s = noisy.samples[0];
  CHECK(pearson(modality_filter(s.acoustic, true).tail(400), modality_filter(s.vibration, false).tail(400)) < 0.99);
}

TEST_CASE("degenerate synthetic configs are rejected") {
  SyntheticConfig cfg;
  cfg.n_classes = 1;
  cfg.per_class_counts = {10};
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = SyntheticConfig{};
  cfg.per_class_counts = {1, 2, 3};
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = SyntheticConfig{};
  cfg.cross_correlation = 1.5;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = SyntheticConfig{};
  cfg.class_separation = 0.0;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  CHECK_THROWS_AS(synthetic_preset("trivial"), Error);
  CHECK(synthetic_preset("moderate").class_separation == SyntheticConfig{}.class_separation);
}

TEST_CASE("two-class config with ten samples each") {
  SyntheticConfig cfg;
  cfg.n_classes = 2;
  cfg.per_class_counts = {10, 10};
  cfg.signal_length = 128;
  const Dataset ds = generate_synthetic(cfg);
  CHECK(ds.size() == 20);
  CHECK(ds.num_classes() == 2);
}

TEST_CASE("recording fixture: 867 rpm at 32768 Hz gives two-revolution windows of about 4535 samples") {
  RecordingConfig rc;
  rc.label = 2;
  const RawRecording rec = generate_recording(rc);
  CHECK(rec.acoustic.size() == 5 * 32768);
  const auto marks = detect_revolution_marks(rec.trigger);
  REQUIRE(marks.size() >= 70);
  for (std::size_t i = 0; i + 2 < marks.size(); ++i) {
    const Index len = marks[i + 2] - marks[i];
    CHECK(std::abs(static_cast<double>(len) - 4535.4) <= 2.0);
  }
  const auto windows = segment_recording(rec, SegmentConfig{});
  CHECK(windows.size() == (marks.size() - 1) / 2);
  for (const auto& w : windows) {
    CHECK(w.acoustic.size() == 4800);
    CHECK(w.vibration.size() == 4800);
    CHECK(w.label == 2);
  }
}

TEST_CASE("segmentation counts windows from revolution marks") {
  const RawRecording rec = ramp_recording(100);
  SegmentConfig one;
  one.signal_length = 16;
  one.stride_revolutions = 1;
  SegmentConfig two = one;
  two.stride_revolutions = 2;
  const std::vector<Index> four = {10, 30, 50, 70};
  const std::vector<Index> three = {10, 30, 50};
  CHECK(segment_recording(rec, four, one).size() == 2);
  CHECK(segment_recording(rec, four, two).size() == 1);
  CHECK(segment_recording(rec, three, one).size() == 1);
  CHECK(segment_recording(rec, three, two).size() == 1);
  CHECK_THROWS_AS(segment_recording(rec, std::vector<Index>{10, 30}, one), Error);
}

TEST_CASE("segmented windows stay inside the recording and end at or before the final mark") {
  const RawRecording rec = ramp_recording(100);
  SegmentConfig cfg;
  cfg.signal_length = 21;
  cfg.stride_revolutions = 1;
  const std::vector<Index> marks = {3, 23, 43, 63, 83};
  const auto w = segment_recording(rec, marks, cfg);
  REQUIRE(w.size() == 3);
  // The ramp's value is its index, so the window bounds can be read off.
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w[i].acoustic(0) == doctest::Approx(static_cast<double>(marks[i])));
    CHECK(w[i].acoustic(20) == doctest::Approx(static_cast<double>(marks[i + 2] - 1)));
    CHECK(w[i].acoustic(20) < static_cast<double>(marks.back()));
  }
}

TEST_CASE("segmentation diagnostics: non-increasing marks, flat trigger, too few marks") {
  RawRecording rec = ramp_recording(100);
  SegmentConfig cfg;
  cfg.signal_length = 8;
  try {
    segment_recording(rec, std::vector<Index>{10, 40, 30, 60}, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("not increasing at index 2") != std::string::npos);
  }
  CHECK_THROWS_AS(segment_recording(rec, cfg), Error);  // flat trigger
  rec.trigger = pulse_train(100, {10, 50});
  CHECK_THROWS_AS(segment_recording(rec, cfg), Error);
  rec.trigger = pulse_train(100, {10, 30, 50, 70});
  CHECK(segment_recording(rec, cfg).size() == 1);
  rec.vibration.resize(99);
  CHECK_THROWS_AS(segment_recording(rec, cfg), ShapeError);
}

TEST_CASE("trigger detection uses rising edges with hysteresis") {
  VectorXr t = pulse_train(200, {20, 80, 140}, 10);
  t.array() = 2.0 + 3.0 * t.array();  // offset and scale do not matter
  t(85) = 3.4;  // a dip that stays above the low threshold
  CHECK(detect_revolution_marks(t) == std::vector<Index>{20, 80, 140});
  VectorXr high_start = pulse_train(100, {0, 40, 80}, 10);
  CHECK(detect_revolution_marks(high_start) == std::vector<Index>{40, 80});
}

TEST_CASE("linear resampling keeps endpoints and linear functions") {
  const VectorXr x = VectorXr::LinSpaced(10, 1.0, 10.0);
  const VectorXr y = resample_linear(x, 19);
  CHECK(y(0) == 1.0);
  CHECK(y(18) == doctest::Approx(10.0));
  for (Index j = 0; j < 19; ++j) CHECK(y(j) == doctest::Approx(1.0 + 0.5 * static_cast<double>(j)));
}

TEST_CASE("outlier removal: homogeneous data is untouched, one scaled sample is dropped") {
  const Dataset ds = generate_synthetic(small_config(12, 128));
  OutlierReport rep;
  CHECK(remove_outliers(ds.samples, 4.0, &rep).size() == ds.size());
  CHECK(rep.dropped.empty());

  Rng rng(3);
  std::vector<MultiModalSample> batch;
  for (int i = 0; i < 50; ++i) {
    MultiModalSample s;
    s.id = "s" + std::to_string(i);
    s.acoustic = VectorXr::NullaryExpr(64, [&] { return rng.normal(); });
    s.vibration = VectorXr::NullaryExpr(64, [&] { return rng.normal(); });
    batch.push_back(std::move(s));
  }
  batch[17].acoustic *= 100.0;
  const auto kept = remove_outliers(batch, 4.0, &rep);
  CHECK(kept.size() == 49);
  REQUIRE(rep.dropped.size() == 1);
  CHECK(rep.dropped[0].id == "s17");
  CHECK(rep.dropped[0].score > 4.0);
  CHECK(rep.kept == 49);

  CHECK(remove_outliers(batch, INFINITY).size() == 50);
  CHECK(remove_outliers(kept, 4.0).size() == kept.size());
}

TEST_CASE("outlier removal is idempotent on heavy-tailed data") {
  Rng rng(9);
  std::vector<MultiModalSample> batch;
  for (int i = 0; i < 80; ++i) {
    MultiModalSample s;
    s.id = std::to_string(i);
    s.label = i % 2;
    const double scale = std::exp(1.5 * rng.normal());
    s.acoustic = VectorXr::NullaryExpr(32, [&] { return scale * rng.normal(); });
    s.vibration = VectorXr::NullaryExpr(32, [&] { return rng.normal(); });
    batch.push_back(std::move(s));
  }
  const auto once = remove_outliers(batch, 2.5);
  CHECK(once.size() < batch.size());
  const auto twice = remove_outliers(once, 2.5);
  REQUIRE(twice.size() == once.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i].id == once[i].id);
}

TEST_CASE("holdout split: 10 per class, seeded, disjoint from the pool") {
  const Dataset ds = generate_synthetic(SyntheticConfig{});
  const auto split = split_holdout(ds, 10, 5);
  CHECK(split.validation.size() == 40);
  CHECK(split.pool.size() == 665);
  std::vector<Index> per_class(4, 0);
  for (Index i : split.validation) ++per_class[static_cast<std::size_t>(ds.samples[static_cast<std::size_t>(i)].label)];
  CHECK(per_class == std::vector<Index>{10, 10, 10, 10});
  std::set<Index> all(split.validation.begin(), split.validation.end());
  for (Index i : split.pool) CHECK(all.insert(i).second);
  CHECK(all.size() == 705);

  const auto again = split_holdout(ds, 10, 5);
  CHECK(again.validation == split.validation);
  CHECK(split_holdout(ds, 10, 6).validation != split.validation);

  const auto none = split_holdout(ds, 0, 5);
  CHECK(none.validation.empty());
  CHECK(none.pool.size() == 705);
  CHECK_THROWS_AS(split_holdout(ds, 120, 5), Error);
}

TEST_CASE("stratified folds partition the pool with balanced class counts") {
  const Dataset ds = generate_synthetic(SyntheticConfig{});
  const auto split = split_holdout(ds, 10, 1);
  const FoldPlan plan = stratified_folds(ds, split, 7, 2);
  REQUIRE(plan.test.size() == 7);
  std::set<Index> seen;
  const std::vector<double> expected = {234.0 / 7, 110.0 / 7, 163.0 / 7, 158.0 / 7};
  for (int f = 0; f < 7; ++f) {
    CHECK(plan.test[static_cast<std::size_t>(f)].size() == 95);
    CHECK(plan.train[static_cast<std::size_t>(f)].size() == 570);
    const auto counts = plan.test_counts(ds, f);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(static_cast<double>(counts[static_cast<std::size_t>(c)]) - expected[static_cast<std::size_t>(c)]) < 1.0);
    for (Index i : plan.test[static_cast<std::size_t>(f)]) CHECK(seen.insert(i).second);
    std::set<Index> train(plan.train[static_cast<std::size_t>(f)].begin(), plan.train[static_cast<std::size_t>(f)].end());
    for (Index i : plan.test[static_cast<std::size_t>(f)]) CHECK(train.count(i) == 0);
    for (Index i : split.validation) CHECK(train.count(i) == 0);
  }
  CHECK(seen == std::set<Index>(split.pool.begin(), split.pool.end()));
  CHECK(stratified_folds(ds, split, 7, 2).test == plan.test);
}

TEST_CASE("stratified folds reject k < 2 and classes smaller than k") {
  const Dataset ds = generate_synthetic(small_config(5, 64));
  const auto split = split_holdout(ds, 0, 1);
  CHECK_THROWS_AS(stratified_folds(ds, split, 1, 0), Error);
  CHECK_THROWS_AS(stratified_folds(ds, split, 6, 0), Error);
  CHECK_NOTHROW(stratified_folds(ds, split, 5, 0));
}

TEST_CASE("dataset file round trip: f64 exact, f32 within single-precision rounding") {
  const Dataset ds = generate_synthetic(small_config(3, 64));
  const fs::path p = scratch("rt.mmds");
  write_dataset(ds, p, Precision::F64);
  const Dataset back = read_dataset(p);
  CHECK(same_samples(ds, back));
  CHECK(back.class_names == ds.class_names);
  CHECK(back.provenance == Provenance::Synthetic);
  CHECK(back.config_echo == ds.config_echo);

  write_dataset(ds, p, Precision::F32);
  const Dataset single = read_dataset(p);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& a = ds.samples[i].acoustic;
    CHECK(((single.samples[i].acoustic - a).array().abs() <= 1e-6 * (a.array().abs() + 1.0)).all());
  }
  fs::remove(p);
}

TEST_CASE("dataset file guards: checksum names the sample, version, magic, truncation") {
  const Dataset ds = generate_synthetic(small_config(2, 32));
  const fs::path p = scratch("bad.mmds");
  write_dataset(ds, p);
  std::string bytes;
  {
    std::ifstream is(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os << b;
  };
  // Flip a byte inside the last sample's payload.
  std::string corrupt = bytes;
  corrupt[corrupt.size() - 10] ^= 0x40;
  write(corrupt);
  try {
    read_dataset(p);
    FAIL("expected a checksum error");
  } catch (const io::FormatError& e) {
    CHECK(std::string(e.what()).find("checksum mismatch in sample '" + ds.samples.back().id + "'") !=
          std::string::npos);
  }
  write(bytes.substr(0, bytes.size() - 100));
  CHECK_THROWS_AS(read_dataset(p), io::FormatError);
  std::string wrong_version = bytes;
  const auto at = wrong_version.find("\"format_version\": 1");
  REQUIRE(at != std::string::npos);
  wrong_version[at + 18] = '7';
  write(wrong_version);
  CHECK_THROWS_WITH_AS(read_dataset(p), doctest::Contains("format version 7"), io::FormatError);
  write("NOT-A-DATASET\n");
  CHECK_THROWS_AS(read_dataset(p), io::FormatError);
  fs::remove(p);
}

TEST_CASE("empty dataset writes a valid file and reads back empty") {
  Dataset ds;
  ds.class_names = {"a", "b"};
  ds.signal_length = 16;
  const fs::path p = scratch("empty.mmds");
  write_dataset(ds, p);
  const Dataset back = read_dataset(p);
  CHECK(back.samples.empty());
  CHECK(back.class_names == ds.class_names);
  fs::remove(p);
}

TEST_CASE("sample directory import and recording directory round trip") {
  const Dataset ds = generate_synthetic(small_config(2, 32));
  const fs::path dir = scratch("samples");
  export_sample_directory(ds, dir, Precision::F64);
  const Dataset back = import_sample_directory(dir);
  CHECK(same_samples(ds, back));
  CHECK(back.provenance == Provenance::Imported);
  fs::remove_all(dir);
  CHECK_THROWS_AS(import_sample_directory(dir), Error);

  RecordingConfig rc;
  rc.duration_s = 0.5;
  const RawRecording rec = generate_recording(rc);
  const fs::path rdir = scratch("recs");
  write_recording_directory(std::vector<RawRecording>{rec}, rdir, Precision::F64);
  const auto recs = read_recording_directory(rdir);
  REQUIRE(recs.size() == 1);
  CHECK((recs[0].trigger.array() == rec.trigger.array()).all());
  CHECK(recs[0].sample_rate == rec.sample_rate);
  fs::remove_all(rdir);
}
