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

#include "mmcae/nn/stack.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

namespace mmcae::nn {

struct BlockGradientError {
  std::string name;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradientReport {
  std::vector<BlockGradientError> blocks;
  double tolerance = 0.0;
  bool passed = true;

  const BlockGradientError* find(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return &b;
    return nullptr;
  }
};

// Relative error of one element, with the denominator floored at a small
// fraction of the block's gradient scale so near-zero entries are judged
// against the block rather than against rounding noise.
inline double relative_error(double analytic, double numeric, double block_scale) {
  const double denom = std::max({std::abs(analytic) + std::abs(numeric), 1e-3 * block_scale, 1e-12});
  return std::abs(analytic - numeric) / denom;
}

/// Default central-difference step, eps^(1/3) of the scalar type. Larger
/// steps let ReLU pre-activations cross zero inside the stencil.
template <typename Scalar>
inline double default_fd_step() {
  return std::cbrt(static_cast<double>(std::numeric_limits<Scalar>::epsilon()));
}

/// Central finite-difference check of the gradients left in `store` by
/// `analytic` against `loss`. `analytic` must zero and then fill the
/// gradient buffers; `loss` must evaluate with the current values only.
template <typename Scalar>
GradientReport check_gradients(ParameterStore<Scalar>& store, const std::function<double()>& loss,
                               const std::function<void()>& analytic, double tolerance,
                               double step = default_fd_step<Scalar>()) {
  analytic();
  std::vector<Matrix<Scalar>> grads;
  for (const auto& b : store) grads.push_back(b.grad);

  GradientReport report;
  report.tolerance = tolerance;
  for (Index bi = 0; bi < store.size(); ++bi) {
    auto& block = store[bi];
    Matrix<Scalar> numeric(block.value.rows(), block.value.cols());
    for (Index i = 0; i < block.value.size(); ++i) {
      const Scalar saved = block.value.data()[i];
      block.value.data()[i] = saved + static_cast<Scalar>(step);
      store.touch();
      const double up = loss();
      block.value.data()[i] = saved - static_cast<Scalar>(step);
      store.touch();
      const double down = loss();
      block.value.data()[i] = saved;
      store.touch();
      numeric.data()[i] = static_cast<Scalar>((up - down) / (2.0 * step));
    }
    const auto& a = grads[static_cast<std::size_t>(bi)];
    const double scale = (a.cwiseAbs() + numeric.cwiseAbs()).maxCoeff();
    BlockGradientError e{block.name, 0.0, true};
    for (Index i = 0; i < a.size(); ++i)
      e.max_relative_error = std::max(e.max_relative_error, relative_error(a.data()[i], numeric.data()[i], scale));
    e.passed = e.max_relative_error < tolerance;
    report.passed = report.passed && e.passed;
    report.blocks.push_back(std::move(e));
  }
  return report;
}

/// Checks one stack on `input` with the scalar probe loss sum(output * probe),
/// where `probe` is a fixed random tensor. `tamper` runs after the analytic
/// pass and may corrupt gradients (used to confirm the check catches bugs).
template <typename Scalar>
GradientReport check_gradients(const Stack& stack, ParameterStore<Scalar>& store, const Batch<Scalar>& input,
                               double tolerance, std::uint64_t seed = 1,
                               const std::type_identity_t<std::function<void(ParameterStore<Scalar>&)>>& tamper = {}) {
  Rng rng(seed);
  Batch<Scalar> probe = Batch<Scalar>::zeros(input.size, stack.output_shape());
  for (Index i = 0; i < probe.data.size(); ++i) probe.data.data()[i] = static_cast<Scalar>(rng.uniform(-1.0, 1.0));

  auto loss = [&] {
    const auto tr = forward(stack, store, input);
    return static_cast<double>((tr.output().data.array() * probe.data.array()).sum());
  };
  auto analytic = [&] {
    store.zero_grad();
    const auto tr = forward(stack, store, input);
    backward(stack, store, tr, probe, false);
    if (tamper) tamper(store);
  };
  return check_gradients<Scalar>(store, loss, analytic, tolerance);
}

/// Finite-difference check of the input gradient of a stack under the same
/// probe loss; returns the max relative error.
template <typename Scalar>
double check_input_gradient(const Stack& stack, ParameterStore<Scalar>& store, Batch<Scalar> input,
                            std::uint64_t seed = 1, double step = 1e-4) {
  Rng rng(seed);
  Batch<Scalar> probe = Batch<Scalar>::zeros(input.size, stack.output_shape());
  for (Index i = 0; i < probe.data.size(); ++i) probe.data.data()[i] = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
  auto loss = [&] {
    const auto tr = forward(stack, store, input);
    return static_cast<double>((tr.output().data.array() * probe.data.array()).sum());
  };
  store.zero_grad();
  const auto tr = forward(stack, store, input);
  const Batch<Scalar> analytic = backward(stack, store, tr, probe, true);
  Matrix<Scalar> numeric(input.data.rows(), input.data.cols());
  for (Index i = 0; i < input.data.size(); ++i) {
    const Scalar saved = input.data.data()[i];
    input.data.data()[i] = saved + static_cast<Scalar>(step);
    const double up = loss();
    input.data.data()[i] = saved - static_cast<Scalar>(step);
    const double down = loss();
    input.data.data()[i] = saved;
    numeric.data()[i] = static_cast<Scalar>((up - down) / (2.0 * step));
  }
  const double scale = (analytic.data.cwiseAbs() + numeric.cwiseAbs()).maxCoeff();
  double worst = 0.0;
  for (Index i = 0; i < numeric.size(); ++i)
    worst = std::max(worst, relative_error(analytic.data.data()[i], numeric.data()[i], scale));
  return worst;
}

}  // namespace mmcae::nn
