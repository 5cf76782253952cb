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

#include "mmcae/nn/parameters.hpp"

#include <cmath>

namespace mmcae::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled (AdamW-style) decay, applied to every block.
  double weight_decay = 1e-5;
};

void validate(const AdamConfig& cfg);

/// One ADAM step with bias correction over every block of `store`.
/// Rejects non-finite gradients before touching any parameter.
template <typename Scalar>
void adam_update(ParameterStore<Scalar>& store, const AdamConfig& cfg) {
  for (const auto& b : store)
    if (!b.grad.allFinite()) throw Error("non-finite gradient in parameter block '" + b.name + "'");

  const std::int64_t t = store.step() + 1;
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);
  const Scalar wd = static_cast<Scalar>(cfg.weight_decay);
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t));

  for (auto& b : store) {
    b.m = b1 * b.m + (Scalar(1) - b1) * b.grad;
    b.v = b2 * b.v + (Scalar(1) - b2) * b.grad.cwiseAbs2();
    if (lr == Scalar(0)) continue;
    if (wd != Scalar(0)) b.value -= (lr * wd) * b.value;
    b.value.array() -= lr * (b.m.array() / c1) / ((b.v.array() / c2).sqrt() + eps);
  }
  store.set_step(t);
  store.touch();
}

}  // namespace mmcae::nn
