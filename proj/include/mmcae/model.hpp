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

#include "mmcae/architecture.hpp"
#include "mmcae/nn/stack.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmcae {

/// One labeled pair of equal-length signals: modality A (acoustic) and
/// modality V (vibration).
struct MultiModalSample {
  std::string id;
  VectorXr acoustic;
  VectorXr vibration;
  int label = 0;
};

/// How a sample is presented: both modalities, or one with the other encoder
/// fed an exact zero vector.
enum class InputMode { Joint, SingleA, SingleV };

inline constexpr InputMode kAllModes[] = {InputMode::Joint, InputMode::SingleA, InputMode::SingleV};

std::string_view to_string(InputMode mode);
/// Accepts joint|a|v and the long names joint/single-a/single-v.
InputMode parse_input_mode(std::string_view text);

/// Common representations, one row per sample.
struct LatentBatch {
  MatrixXr values;  // N x latent_dim
  InputMode mode = InputMode::Joint;
  std::vector<int> labels;
};

using SignalBatch = Batch<double>;

/// Two encoders, fusion layer and two decoders over one parameter store.
class MultiModalAE {
 public:
  /// Builds the stacks and runs the shape self-check; parameters are zero.
  explicit MultiModalAE(Architecture arch);

  /// Seeded, reproducible initialization.
  static MultiModalAE init(const Architecture& arch, std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  Index signal_length() const { return arch_.signal_length; }
  Index latent_dim() const { return arch_.latent_dim; }
  Index encoder_width() const { return encoder_a_.output_shape().channels; }

  nn::ParameterStore<double>& params() { return params_; }
  const nn::ParameterStore<double>& params() const { return params_; }

  const nn::Stack& encoder_a() const { return encoder_a_; }
  const nn::Stack& encoder_v() const { return encoder_v_; }
  const nn::Stack& fusion() const { return fusion_; }
  const nn::Stack& decoder_a() const { return decoder_a_; }
  const nn::Stack& decoder_v() const { return decoder_v_; }

  /// Hash of every parameter value, for "did anything change" checks.
  std::uint64_t parameter_hash() const;

 private:
  Architecture arch_;
  nn::ParameterStore<double> params_;
  nn::Stack encoder_a_;
  nn::Stack encoder_v_;
  nn::Stack fusion_;
  nn::Stack decoder_a_;
  nn::Stack decoder_v_;
};

// --- differentiable passes ---------------------------------------------------

struct EncodeTrace {
  InputMode mode = InputMode::Joint;
  Index batch = 0;
  // The masked branch is evaluated once on a single zero signal and
  // broadcast, so its trace has batch size 1.
  nn::Trace<double> encoder_a;
  nn::Trace<double> encoder_v;
  nn::Trace<double> fusion;
};

/// Latent matrix (latent_dim x N) for signal batches [N, 1, L]. The batch for
/// a masked modality is ignored and may be empty.
MatrixXr encode_batch(const MultiModalAE& model, const SignalBatch& a, const SignalBatch& v, InputMode mode,
                      EncodeTrace* trace = nullptr);

/// Accumulates parameter gradients for d(objective)/d(latent).
void encode_backward(MultiModalAE& model, const EncodeTrace& trace, const MatrixXr& latent_grad);

struct DecodeTrace {
  nn::Trace<double> decoder_a;
  nn::Trace<double> decoder_v;
};

/// Both decoders on the same latent matrix (latent_dim x N).
std::pair<SignalBatch, SignalBatch> decode_batch(const MultiModalAE& model, const MatrixXr& latent,
                                                 DecodeTrace* trace = nullptr);

/// Accumulates parameter gradients and returns d(objective)/d(latent).
MatrixXr decode_backward(MultiModalAE& model, const DecodeTrace& trace, const SignalBatch& grad_a,
                         const SignalBatch& grad_v);

// --- inference API -----------------------------------------------------------

/// Packs one modality of `samples` into a [N, 1, L] batch.
SignalBatch acoustic_batch(std::span<const MultiModalSample> samples);
SignalBatch vibration_batch(std::span<const MultiModalSample> samples);

/// Common representations of clean inputs. Throws ShapeError on signal
/// length mismatch.
LatentBatch encode(const MultiModalAE& model, std::span<const MultiModalSample> samples, InputMode mode);

struct Reconstruction {
  MatrixXr acoustic;   // N x signal_length
  MatrixXr vibration;  // N x signal_length
};

Reconstruction decode(const MultiModalAE& model, const LatentBatch& latent);

// --- checkpoints -------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'M', 'M', 'C', 'A', 'E', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const MultiModalAE& model, const std::filesystem::path& path);
MultiModalAE load_checkpoint(const std::filesystem::path& path);

}  // namespace mmcae
