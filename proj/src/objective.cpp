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

#include "mmcae/objective.hpp"

#include <cmath>

namespace mmcae {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Proposed: return "Proposed";
    case Variant::VanillaMissing: return "VanillaMissing";
    case Variant::ContrastiveNoMissing: return "ContrastiveNoMissing";
    case Variant::CorrNetStyle: return "CorrNetStyle";
  }
  return "unknown";
}

std::string_view cli_name(Variant v) {
  switch (v) {
    case Variant::Proposed: return "proposed";
    case Variant::VanillaMissing: return "vanilla";
    case Variant::ContrastiveNoMissing: return "no-missing";
    case Variant::CorrNetStyle: return "corrnet";
  }
  return "unknown";
}

Variant parse_variant(std::string_view text) {
  for (Variant v : kAllVariants)
    if (text == cli_name(v) || text == to_string(v)) return v;
  throw Error("unknown variant '" + std::string(text) + "' (expected proposed, vanilla, no-missing or corrnet)");
}

void validate(const LossConfig& cfg) {
  auto finite_nonneg = [](double x, const char* what) {
    if (!std::isfinite(x) || x < 0.0) throw Error(std::string("loss ") + what + " must be finite and non-negative");
  };
  finite_nonneg(cfg.delta1, "delta1");
  finite_nonneg(cfg.delta2, "delta2");
  if (cfg.lambda1) finite_nonneg(*cfg.lambda1, "lambda1");
  if (cfg.lambda2) finite_nonneg(*cfg.lambda2, "lambda2");
  if (cfg.alpha1) finite_nonneg(*cfg.alpha1, "alpha1");
  if (cfg.margin) finite_nonneg(*cfg.margin, "margin");
  finite_nonneg(cfg.corr_weight, "corr_weight");
  if (!std::isfinite(cfg.noise_low) || !std::isfinite(cfg.noise_high) || cfg.noise_low > cfg.noise_high)
    throw Error("loss noise range must be finite with noise_low <= noise_high");
}

double smoothed_distance(double squared_norm) {
  static const double root_eps = std::sqrt(kDistanceEpsilon);
  return std::sqrt(squared_norm + kDistanceEpsilon) - root_eps;
}

CorruptedBatch corrupt(const SignalBatch& acoustic, const SignalBatch& vibration, const LossConfig& cfg, Rng& rng) {
  CorruptedBatch out{acoustic, vibration};
  if (cfg.noise_low == 0.0 && cfg.noise_high == 0.0) return out;
  for (SignalBatch* b : {&out.acoustic, &out.vibration})
    for (Index i = 0; i < b->data.size(); ++i) b->data.data()[i] += rng.uniform(cfg.noise_low, cfg.noise_high);
  return out;
}

VectorXr pair_mse(const SignalBatch& a, const SignalBatch& v, const SignalBatch& ra, const SignalBatch& rv) {
  VectorXr out(a.size);
  const double denom = static_cast<double>(a.length + v.length);
  for (Index n = 0; n < a.size; ++n)
    out(n) = ((ra.sample(n) - a.sample(n)).squaredNorm() + (rv.sample(n) - v.sample(n)).squaredNorm()) / denom;
  return out;
}

ReconstructionTerms reconstruction_loss(const MultiModalAE& model, const SignalBatch& clean_a,
                                        const SignalBatch& clean_v, const SignalBatch& noisy_a,
                                        const SignalBatch& noisy_v) {
  if (clean_a.size != noisy_a.size || clean_v.size != noisy_v.size || clean_a.size != clean_v.size ||
      clean_a.shape() != noisy_a.shape() || clean_v.shape() != noisy_v.shape())
    throw ShapeError("reconstruction_loss: clean and corrupted batches are not aligned");
  ReconstructionTerms t;
  auto term = [&](InputMode mode) {
    const auto [ra, rv] = decode_batch(model, encode_batch(model, noisy_a, noisy_v, mode));
    return pair_mse(clean_a, clean_v, ra, rv).sum();
  };
  t.self = term(InputMode::Joint);
  t.cross_a = term(InputMode::SingleA);
  t.cross_v = term(InputMode::SingleV);
  return t;
}

double signed_distance_sum(const MatrixXr& x, const MatrixXr& y, std::span<const int> labels, bool skip_diagonal,
                           std::optional<double> margin, double grad_scale, MatrixXr* grad_x, MatrixXr* grad_y) {
  const Index n = x.cols();
  if (y.cols() != n || y.rows() != x.rows() || static_cast<Index>(labels.size()) != n)
    throw ShapeError("signed_distance_sum: latent sets and labels are not aligned");
  const double root_eps = std::sqrt(kDistanceEpsilon);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const MatrixXr diff = y.colwise() - x.col(i);  // y_j - x_i
    const RowVector<double> radius = (diff.colwise().squaredNorm().array() + kDistanceEpsilon).sqrt().matrix();
    RowVector<double> coeff(n);  // d(value)/d(distance_ij)
    for (Index j = 0; j < n; ++j) {
      if (skip_diagonal && i == j) {
        coeff(j) = 0.0;
        continue;
      }
      const double d = radius(j) - root_eps;
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        total += d;
        coeff(j) = 1.0;
      } else if (margin) {
        total += std::max(0.0, *margin - d);
        coeff(j) = d < *margin ? -1.0 : 0.0;
      } else {
        total -= d;
        coeff(j) = -1.0;
      }
    }
    if (grad_x == nullptr && grad_y == nullptr) continue;
    const RowVector<double> w = grad_scale * coeff.cwiseQuotient(radius);
    // d/dx_i = sum_j w_ij (x_i - y_j);  d/dy_j = w_ij (y_j - x_i)
    if (grad_x != nullptr) grad_x->col(i) -= diff * w.transpose();
    if (grad_y != nullptr) *grad_y += diff * w.asDiagonal();
  }
  return total;
}

double joint_contrastive(const MatrixXr& joint, std::span<const int> labels, std::optional<double> margin,
                         double grad_scale, MatrixXr* grad) {
  return signed_distance_sum(joint, joint, labels, true, margin, grad_scale, grad, grad);
}

double single_contrastive(const MatrixXr& latent_a, const MatrixXr& latent_v, std::span<const int> labels,
                          std::optional<double> margin, double grad_scale, MatrixXr* grad_a, MatrixXr* grad_v) {
  double total = signed_distance_sum(latent_a, latent_a, labels, true, margin, grad_scale, grad_a, grad_a);
  total += signed_distance_sum(latent_v, latent_v, labels, true, margin, grad_scale, grad_v, grad_v);
  total += signed_distance_sum(latent_a, latent_v, labels, false, margin, grad_scale, grad_a, grad_v);
  total += signed_distance_sum(latent_v, latent_a, labels, false, margin, grad_scale, grad_v, grad_a);
  return total;
}

double correlation_term(const MatrixXr& latent_a, const MatrixXr& latent_v, double grad_scale, MatrixXr* grad_a,
                        MatrixXr* grad_v) {
  if (latent_a.rows() != latent_v.rows() || latent_a.cols() != latent_v.cols())
    throw ShapeError("correlation_term: latent sets differ in shape");
  const MatrixXr xc = latent_a.colwise() - latent_a.rowwise().mean();
  const MatrixXr yc = latent_v.colwise() - latent_v.rowwise().mean();
  double total = 0.0;
  for (Index k = 0; k < xc.rows(); ++k) {
    const double sx = std::sqrt(xc.row(k).squaredNorm() + kDistanceEpsilon);
    const double sy = std::sqrt(yc.row(k).squaredNorm() + kDistanceEpsilon);
    const double rho = xc.row(k).dot(yc.row(k)) / (sx * sy);
    total -= rho;
    // Both expressions are already zero-mean, so centering adds nothing.
    if (grad_a != nullptr) grad_a->row(k) -= grad_scale * (yc.row(k) / (sx * sy) - rho * xc.row(k) / (sx * sx));
    if (grad_v != nullptr) grad_v->row(k) -= grad_scale * (xc.row(k) / (sx * sy) - rho * yc.row(k) / (sy * sy));
  }
  return total;
}

namespace {

double require(const std::optional<double>& v, const char* name) {
  if (!v) throw Error(std::string("loss weight ") + name + " is not set (calibrate before evaluating)");
  return *v;
}

// One encode + decode pass with its reconstruction error and traces.
struct ModePass {
  EncodeTrace enc;
  DecodeTrace dec;
  MatrixXr latent;
  SignalBatch recon_a;
  SignalBatch recon_v;
  double recon = 0.0;
  MatrixXr latent_grad;
};

ModePass run_mode(const MultiModalAE& model, const SignalBatch& in_a, const SignalBatch& in_v,
                  const SignalBatch& clean_a, const SignalBatch& clean_v, InputMode mode) {
  ModePass p;
  p.latent = encode_batch(model, in_a, in_v, mode, &p.enc);
  auto [ra, rv] = decode_batch(model, p.latent, &p.dec);
  p.recon_a = std::move(ra);
  p.recon_v = std::move(rv);
  p.recon = pair_mse(clean_a, clean_v, p.recon_a, p.recon_v).sum();
  p.latent_grad = MatrixXr::Zero(p.latent.rows(), p.latent.cols());
  return p;
}

// d(weight * sum_i mse_i / N)/d(recon) pushed back to the latent, then the
// latent gradient (including contrastive parts) back through the encoders.
void backprop_mode(MultiModalAE& model, ModePass& p, const SignalBatch& clean_a, const SignalBatch& clean_v,
                   double weight) {
  const double n = static_cast<double>(clean_a.size);
  const double scale = weight * 2.0 / (n * static_cast<double>(clean_a.length + clean_v.length));
  SignalBatch ga = p.recon_a;
  SignalBatch gv = p.recon_v;
  ga.data = scale * (p.recon_a.data - clean_a.data);
  gv.data = scale * (p.recon_v.data - clean_v.data);
  p.latent_grad += decode_backward(model, p.dec, ga, gv);
  encode_backward(model, p.enc, p.latent_grad);
}

}  // namespace

LossBreakdown evaluate_objective(MultiModalAE& model, const SignalBatch& clean_a, const SignalBatch& clean_v,
                                 std::span<const int> labels, const LossConfig& cfg, Rng* rng, bool gradients) {
  validate(cfg);
  const Index n = clean_a.size;
  if (n < 1 || clean_v.size != n || static_cast<Index>(labels.size()) != n)
    throw ShapeError("objective: modalities and labels must share a non-empty batch");

  const CorruptedBatch in = rng != nullptr ? corrupt(clean_a, clean_v, cfg, *rng) : CorruptedBatch{clean_a, clean_v};
  const double inv_n = 1.0 / static_cast<double>(n);

  LossBreakdown out;
  out.batch = n;

  ModePass joint = run_mode(model, in.acoustic, in.vibration, clean_a, clean_v, InputMode::Joint);
  out.j1_self = joint.recon;

  if (cfg.variant == Variant::ContrastiveNoMissing) {
    const double alpha = require(cfg.alpha1, "alpha1");
    out.j2 = joint_contrastive(joint.latent, labels, cfg.margin, alpha * inv_n, gradients ? &joint.latent_grad : nullptr);
    out.total = out.j1_self + alpha * out.j2;
    if (gradients) backprop_mode(model, joint, clean_a, clean_v, 1.0);
    return out;
  }

  ModePass only_a = run_mode(model, in.acoustic, in.vibration, clean_a, clean_v, InputMode::SingleA);
  ModePass only_v = run_mode(model, in.acoustic, in.vibration, clean_a, clean_v, InputMode::SingleV);
  out.j1_cross_a = only_a.recon;
  out.j1_cross_v = only_v.recon;
  out.total = out.j1_self + cfg.delta1 * out.j1_cross_a + cfg.delta2 * out.j1_cross_v;

  if (cfg.variant == Variant::Proposed) {
    const double l1 = require(cfg.lambda1, "lambda1");
    const double l2 = require(cfg.lambda2, "lambda2");
    out.j2 = joint_contrastive(joint.latent, labels, cfg.margin, l1 * inv_n, gradients ? &joint.latent_grad : nullptr);
    out.j3 = single_contrastive(only_a.latent, only_v.latent, labels, cfg.margin, l2 * inv_n,
                                gradients ? &only_a.latent_grad : nullptr, gradients ? &only_v.latent_grad : nullptr);
    out.total += l1 * out.j2 + l2 * out.j3;
  } else if (cfg.variant == Variant::CorrNetStyle) {
    if (n < 2) throw ShapeError("objective: the correlation term needs at least two samples");
    // Batch-level term, multiplied by N so total / N carries it at corr_weight.
    out.corr = correlation_term(only_a.latent, only_v.latent, cfg.corr_weight,
                                gradients ? &only_a.latent_grad : nullptr, gradients ? &only_v.latent_grad : nullptr);
    out.total += cfg.corr_weight * static_cast<double>(n) * out.corr;
  }

  if (gradients) {
    backprop_mode(model, joint, clean_a, clean_v, 1.0);
    backprop_mode(model, only_a, clean_a, clean_v, cfg.delta1);
    backprop_mode(model, only_v, clean_a, clean_v, cfg.delta2);
  }
  return out;
}

LossBreakdown total_loss(MultiModalAE& model, const SignalBatch& clean_a, const SignalBatch& clean_v,
                         std::span<const int> labels, const LossConfig& cfg, Rng* rng, bool gradients) {
  if (cfg.variant != Variant::Proposed) throw Error("total_loss: variant must be Proposed");
  return evaluate_objective(model, clean_a, clean_v, labels, cfg, rng, gradients);
}

LossBreakdown baseline_loss(MultiModalAE& model, const SignalBatch& clean_a, const SignalBatch& clean_v,
                            std::span<const int> labels, const LossConfig& cfg, Rng* rng, bool gradients) {
  if (cfg.variant == Variant::Proposed) throw Error("baseline_loss: variant must be a baseline");
  return evaluate_objective(model, clean_a, clean_v, labels, cfg, rng, gradients);
}

}  // namespace mmcae
