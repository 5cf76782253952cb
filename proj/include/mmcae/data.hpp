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

#include "mmcae/model.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmcae {

enum class Provenance { Synthetic, Segmented, Imported };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

/// Labeled two-modality samples of one signal length.
struct Dataset {
  std::vector<MultiModalSample> samples;
  std::vector<std::string> class_names;
  Index signal_length = 0;
  Provenance provenance = Provenance::Synthetic;
  /// Generator or ingestion configuration, as compact JSON text.
  std::string config_echo = "{}";

  std::size_t size() const { return samples.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// Throws Error when a sample length or label is inconsistent.
void validate(const Dataset& ds);

/// Per-class sample counts (length num_classes()).
std::vector<Index> class_counts(const Dataset& ds);

/// Copies the selected samples, keeping every other field.
Dataset subset(const Dataset& ds, std::span<const Index> indices);

// --- synthetic generation ----------------------------------------------------

/// Sample rate the synthetic signals are rendered at.
inline constexpr double kSyntheticSampleRate = 32768.0;

/// Parameters of the correlated two-modality generator.
///
/// Each sample carries a shared source made of four windowed harmonic bursts
/// (one per cylinder firing); class c shifts the carrier frequency and
/// amplitude of burst c by amounts proportional to class_separation. A
/// smooth baseband pulse with the burst's amplitude sits under each burst,
/// so the cycle structure is visible below ~300 Hz. Each
/// modality sees the source through its own fixed FIR filter, mixed with a
/// class-independent high-frequency private component weighted by
/// (1 - cross_correlation), plus white noise.
struct SyntheticConfig {
  int n_classes = 4;
  std::vector<Index> per_class_counts = {244, 120, 173, 168};
  Index signal_length = 4800;
  /// Power of the class-bearing bursts over a class-independent shared
  /// nuisance (in dB). +inf disables the nuisance.
  double shared_snr_db = 6.0;
  /// Power of each modality's clean signal over its white noise (in dB).
  /// +inf disables the noise.
  double modality_noise_db = 10.0;
  double cross_correlation = 0.6;
  double class_separation = 1.0;
  /// Relative per-sample spread of burst amplitude, frequency and timing.
  double jitter = 0.15;
  std::uint64_t seed = 2026;
};

/// "easy" | "moderate" | "hard"; moderate equals a default-constructed config.
SyntheticConfig synthetic_preset(std::string_view name);

void validate(const SyntheticConfig& cfg);

/// Deterministic in cfg.seed; every signal has zero mean and unit variance.
Dataset generate_synthetic(const SyntheticConfig& cfg);

/// The fixed causal FIR filter through which modality A (vibration = false)
/// or V (vibration = true) observes the shared source.
VectorXr modality_filter(const VectorXr& x, bool vibration);

/// JSON form of a config (used for provenance echoes).
std::string to_json(const SyntheticConfig& cfg);

// --- raw recordings and segmentation ----------------------------------------

/// One continuous recording with a crank-position trigger channel.
struct RawRecording {
  std::string id;
  VectorXr acoustic;
  VectorXr vibration;
  VectorXr trigger;
  double sample_rate = 32768.0;
  int label = 0;
};

void validate(const RawRecording& rec);

struct RecordingConfig {
  double duration_s = 5.0;
  double sample_rate = 32768.0;
  double rpm = 867.0;
  int label = 0;
  SyntheticConfig signal;  // burst, noise and coupling parameters
  std::uint64_t seed = 1;
};

/// Synthetic recording whose two-revolution cycles follow the synthetic
/// generator; the trigger emits one rectangular pulse per revolution.
RawRecording generate_recording(const RecordingConfig& cfg);

struct SegmentConfig {
  Index signal_length = 4800;
  /// Revolutions between consecutive window starts.
  Index stride_revolutions = 2;
  /// Fraction of the trigger range used as hysteresis around the threshold.
  double hysteresis = 0.1;
};

/// Rising-edge threshold crossings of the trigger: threshold halfway between
/// the 5th and 95th percentiles, with hysteresis. Throws when the trigger is
/// flat.
std::vector<Index> detect_revolution_marks(const VectorXr& trigger, double hysteresis = 0.1);

/// Cuts every two-revolution window [m_i, m_{i+2}) (i stepping by the
/// stride) and linearly resamples it to cfg.signal_length. Windows are not
/// standardized, so outlier screening can still see signal energy. Throws
/// when fewer than 3 marks are found or the marks are not increasing.
std::vector<MultiModalSample> segment_recording(const RawRecording& rec, const SegmentConfig& cfg);
std::vector<MultiModalSample> segment_recording(const RawRecording& rec, std::span<const Index> marks,
                                                const SegmentConfig& cfg);

/// Linear interpolation of `x` onto `length` evenly spaced points spanning
/// its first and last sample.
VectorXr resample_linear(const VectorXr& x, Index length);

/// Per-signal standardization to zero mean and unit variance.
void standardize(MultiModalSample& s);
void standardize(std::vector<MultiModalSample>& samples);

// --- outliers ----------------------------------------------------------------

struct DroppedSample {
  std::string id;
  int label = 0;
  double score = 0.0;
};

struct OutlierReport {
  double threshold = 4.0;
  std::vector<DroppedSample> dropped;
  Index kept = 0;
};

/// Robust RMS screening: within each class, a signal's score is
/// 0.6745 * |rms - median| / MAD; a sample scores the larger of its two
/// signals. Samples above `z_threshold` are dropped and the screen is
/// repeated until nothing more is dropped, so a second call is a no-op.
std::vector<MultiModalSample> remove_outliers(const std::vector<MultiModalSample>& samples,
                                              double z_threshold = 4.0, OutlierReport* report = nullptr);

// --- splits ------------------------------------------------------------------

struct HoldoutSplit {
  std::vector<Index> validation;  // ascending dataset indices
  std::vector<Index> pool;        // ascending dataset indices
};

/// Seeded per-class draw of `per_class` validation samples.
HoldoutSplit split_holdout(const Dataset& ds, Index per_class = 10, std::uint64_t seed = 0);

struct FoldPlan {
  int k = 7;
  std::vector<Index> validation;
  std::vector<Index> pool;
  std::vector<std::vector<Index>> test;   // ascending, per fold
  std::vector<std::vector<Index>> train;  // pool minus test, ascending

  /// Test size of fold f by class.
  std::vector<Index> test_counts(const Dataset& ds, int fold) const;
};

/// Class-wise shuffle, then round-robin over folds with one counter running
/// across classes; fold test sizes differ by at most one overall and per
/// class.
FoldPlan stratified_folds(const Dataset& ds, const HoldoutSplit& split, int k = 7, std::uint64_t seed = 0);

// --- files -------------------------------------------------------------------

enum class Precision { F32, F64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

inline constexpr char kDatasetMagic[] = "MMCAE-DATASET";
inline constexpr int kDatasetFormatVersion = 1;

/// Container: a magic line, the manifest byte length, a JSON manifest
/// (version, classes, signal length, counts, provenance, config echo, and
/// per-sample id, label, offset, byte count and CRC-32), then the payload of
/// little-endian floats, acoustic then vibration per sample.
void write_dataset(const Dataset& ds, const std::filesystem::path& path, Precision precision = Precision::F64);
Dataset read_dataset(const std::filesystem::path& path);

/// One signal as raw little-endian floats.
VectorXr read_signal(const std::filesystem::path& path, Precision precision = Precision::F64);
void write_signal(const std::filesystem::path& path, const VectorXr& x, Precision precision = Precision::F64);

/// Directory of samples: manifest.json listing per sample an id, a label and
/// two raw little-endian float files.
Dataset import_sample_directory(const std::filesystem::path& dir);
void export_sample_directory(const Dataset& ds, const std::filesystem::path& dir, Precision precision = Precision::F32);

/// Directory of recordings: manifest.json listing per recording an id,
/// label, sample rate and three raw little-endian float files.
std::vector<RawRecording> read_recording_directory(const std::filesystem::path& dir);
void write_recording_directory(std::span<const RawRecording> recordings, const std::filesystem::path& dir,
                               Precision precision = Precision::F32);

}  // namespace mmcae
