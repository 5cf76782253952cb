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

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace mmcae {

/// Training objective family.
///   Proposed             denoising self + cross reconstruction, joint and
///                        single-modal supervised contrastive terms
///   VanillaMissing       self + cross reconstruction only
///   ContrastiveNoMissing joint reconstruction + alpha1 * joint contrastive
///   CorrNetStyle         self + cross reconstruction minus the summed
///                        per-coordinate correlation of h(a) and h(v)
enum class Variant { Proposed, VanillaMissing, ContrastiveNoMissing, CorrNetStyle };

inline constexpr Variant kAllVariants[] = {Variant::Proposed, Variant::VanillaMissing,
                                           Variant::ContrastiveNoMissing, Variant::CorrNetStyle};

std::string_view to_string(Variant v);
/// proposed | vanilla | no-missing | corrnet
std::string_view cli_name(Variant v);
Variant parse_variant(std::string_view text);

struct LossConfig {
  double delta1 = 1.0;
  double delta2 = 1.0;
  /// Unset means "calibrate at training start"; the loss functions require
  /// them to be set.
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> alpha1;
  double noise_low = -0.05;
  double noise_high = 0.05;
  /// When set, a different-class pair contributes max(0, margin - d)
  /// instead of -d.
  std::optional<double> margin;
  double corr_weight = 1.0;
  Variant variant = Variant::Proposed;
};

void validate(const LossConfig& cfg);

/// Raw (unnormalized) batch sums. The gradients an evaluation leaves in the
/// parameter store are those of total / N.
struct LossBreakdown {
  double j1_self = 0.0;
  double j1_cross_a = 0.0;
  double j1_cross_v = 0.0;
  double j2 = 0.0;
  double j3 = 0.0;
  /// CorrNet-style term: minus the summed correlation (batch level).
  double corr = 0.0;
  double total = 0.0;
  Index batch = 0;
};

/// Smoothing inside the distance square root.
inline constexpr double kDistanceEpsilon = 1e-12;

/// sqrt(|x|^2 + eps) - sqrt(eps): zero at zero, differentiable everywhere.
double smoothed_distance(double squared_norm);

/// +1 when the classes match, -1 otherwise.
inline int indicator(int ci, int cj) { return ci == cj ? 1 : -1; }

struct CorruptedBatch {
  SignalBatch acoustic;
  SignalBatch vibration;
};

/// Adds independent uniform(noise_low, noise_high) noise to every element.
CorruptedBatch corrupt(const SignalBatch& acoustic, const SignalBatch& vibration, const LossConfig& cfg, Rng& rng);

/// Per-sample mean squared error over both modalities (2L elements).
VectorXr pair_mse(const SignalBatch& a, const SignalBatch& v, const SignalBatch& ra, const SignalBatch& rv);

struct ReconstructionTerms {
  double self = 0.0;
  double cross_a = 0.0;
  double cross_v = 0.0;
};

/// Self and cross reconstruction sums from corrupted inputs against clean
/// targets. Value only.
ReconstructionTerms reconstruction_loss(const MultiModalAE& model, const SignalBatch& clean_a,
                                        const SignalBatch& clean_v, const SignalBatch& noisy_a,
                                        const SignalBatch& noisy_v);

/// sum_i sum_j I(c_i, c_j) d(x_i, y_j) over columns of `x` and `y`, with the
/// i == j pairs skipped when `skip_diagonal`. When gradient buffers are given,
/// `grad_scale` * d(value)/dx and d(value)/dy are added to them.
double signed_distance_sum(const MatrixXr& x, const MatrixXr& y, std::span<const int> labels, bool skip_diagonal,
                           std::optional<double> margin, double grad_scale = 1.0, MatrixXr* grad_x = nullptr,
                           MatrixXr* grad_y = nullptr);

/// Joint-modal contrastive term over latent columns (latent_dim x N).
double joint_contrastive(const MatrixXr& joint, std::span<const int> labels, std::optional<double> margin = {},
                         double grad_scale = 1.0, MatrixXr* grad = nullptr);

/// Single-modal contrastive term over both single-modal latent sets; the
/// i == j pair is excluded only within the same modality.
double single_contrastive(const MatrixXr& latent_a, const MatrixXr& latent_v, std::span<const int> labels,
                          std::optional<double> margin = {}, double grad_scale = 1.0, MatrixXr* grad_a = nullptr,
                          MatrixXr* grad_v = nullptr);

/// Minus the sum over latent coordinates of the Pearson correlation between
/// the two latent sets across the batch.
double correlation_term(const MatrixXr& latent_a, const MatrixXr& latent_v, double grad_scale = 1.0,
                        MatrixXr* grad_a = nullptr, MatrixXr* grad_v = nullptr);

/// Evaluates cfg.variant on a clean batch. With an rng, inputs are corrupted
/// first (training); without, the clean inputs are used (validation). When
/// `gradients` is set, parameter gradients of total / N are accumulated into
/// the model's store (callers zero them first).
LossBreakdown evaluate_objective(MultiModalAE& model, const SignalBatch& clean_a, const SignalBatch& clean_v,
                                 std::span<const int> labels, const LossConfig& cfg, Rng* rng, bool gradients);

/// The proposed objective; rejects other variants.
LossBreakdown total_loss(MultiModalAE& model, const SignalBatch& clean_a, const SignalBatch& clean_v,
                         std::span<const int> labels, const LossConfig& cfg, Rng* rng, bool gradients);

/// Baseline objectives; rejects Variant::Proposed.
LossBreakdown baseline_loss(MultiModalAE& model, const SignalBatch& clean_a, const SignalBatch& clean_v,
                            std::span<const int> labels, const LossConfig& cfg, Rng* rng, bool gradients);

}  // namespace mmcae
