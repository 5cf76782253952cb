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

#include "mmcae/nn/layers.hpp"
#include "mmcae/nn/parameters.hpp"
#include "mmcae/nn/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mmcae::nn {

/// A chain of layers bound to parameter blocks in a ParameterStore. The
/// stack itself holds no values, so one store can back several stacks.
class Stack {
 public:
  Stack() = default;

  /// Registers `<name>.<i>.weight` / `<name>.<i>.bias` blocks in `store` and
  /// runs the shape algebra over the chain. Throws ShapeError naming the
  /// first violating layer.
  template <typename Scalar>
  Stack(std::string name, Shape input, std::vector<LayerSpec> layers, ParameterStore<Scalar>& store)
      : name_(std::move(name)), input_(input), layers_(std::move(layers)) {
    shapes_.push_back(input_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& spec = layers_[i];
      try {
        validate(spec);
        shapes_.push_back(nn::output_shape(spec, shapes_.back()));
      } catch (const ShapeError& e) {
        throw ShapeError(name_ + " layer " + std::to_string(i) + " (" + spec.describe() + "): " + e.what());
      }
      if (spec.has_parameters()) {
        const std::string prefix = name_ + "." + std::to_string(i);
        weight_.push_back(store.add(prefix + ".weight", spec.weight_rows(), spec.weight_cols()));
        bias_.push_back(store.add(prefix + ".bias", spec.out_channels, 1));
      } else {
        weight_.push_back(-1);
        bias_.push_back(-1);
      }
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  Shape input_shape() const { return input_; }
  Shape output_shape() const { return shapes_.back(); }
  /// shapes()[i] is the input to layer i; shapes().back() the output.
  const std::vector<Shape>& shapes() const { return shapes_; }
  Index weight_block(std::size_t layer) const { return weight_[layer]; }
  Index bias_block(std::size_t layer) const { return bias_[layer]; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
  }

  /// Uniform He-style fan-in initialization; biases start at zero.
  template <typename Scalar>
  void initialize(ParameterStore<Scalar>& store, Rng& rng) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (weight_[i] < 0) continue;
      auto& w = store[weight_[i]].value;
      const double bound = std::sqrt(6.0 / static_cast<double>(layers_[i].fan_in()));
      for (Index c = 0; c < w.cols(); ++c)
        for (Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
      store[bias_[i]].value.setZero();
    }
    store.touch();
  }

 private:
  std::string name_;
  Shape input_{};
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<Index> weight_;
  std::vector<Index> bias_;
};

/// Every intermediate activation of one forward call; activations[0] is the
/// input and activations.back() the output.
template <typename Scalar>
struct Trace {
  const Stack* stack = nullptr;
  std::uint64_t version = 0;
  std::vector<Batch<Scalar>> activations;
  std::vector<ArgmaxMatrix> argmax;

  const Batch<Scalar>& output() const { return activations.back(); }
};

template <typename Scalar>
Trace<Scalar> forward(const Stack& stack, const ParameterStore<Scalar>& store, const Batch<Scalar>& input) {
  if (input.shape() != stack.input_shape())
    throw ShapeError(stack.name() + " layer 0: input " + to_string(input.shape()) + " does not match expected " +
                     to_string(stack.input_shape()));
  Trace<Scalar> tr;
  tr.stack = &stack;
  tr.version = store.version();
  tr.activations.reserve(stack.layers().size() + 1);
  tr.argmax.resize(stack.layers().size());
  tr.activations.push_back(input);
  for (std::size_t i = 0; i < stack.layers().size(); ++i) {
    const auto& spec = stack.layers()[i];
    const auto& x = tr.activations.back();
    const Shape out = stack.shapes()[i + 1];
    Batch<Scalar> y;
    switch (spec.kind) {
      case LayerKind::Conv1d:
        y = conv1d_forward(x, store[stack.weight_block(i)].value, store[stack.bias_block(i)].value, spec, out.length);
        break;
      case LayerKind::Deconv1d:
        y = deconv1d_forward(x, store[stack.weight_block(i)].value, store[stack.bias_block(i)].value, spec,
                             out.length);
        break;
      case LayerKind::Dense:
        y = dense_forward(x, store[stack.weight_block(i)].value, store[stack.bias_block(i)].value);
        break;
      case LayerKind::Relu:
        y = relu_forward(x);
        break;
      case LayerKind::MaxPool1d:
        y = maxpool1d_forward(x, spec.pool_size, out.length, tr.argmax[i]);
        break;
      case LayerKind::Unpool1d:
        y = unpool1d_forward(x, spec.pool_size);
        break;
      case LayerKind::Flatten:
        y = flatten_forward(x);
        break;
      case LayerKind::Reshape:
        y = reshape_forward(x, spec.target);
        break;
    }
    tr.activations.push_back(std::move(y));
  }
  return tr;
}

/// Accumulates parameter gradients into `store` and returns the gradient
/// with respect to the input (empty batch when `input_grad` is false).
template <typename Scalar>
Batch<Scalar> backward(const Stack& stack, ParameterStore<Scalar>& store, const Trace<Scalar>& tr,
                       const Batch<Scalar>& output_grad, bool input_grad = true) {
  if (tr.stack != &stack || tr.activations.size() != stack.layers().size() + 1)
    throw Error(stack.name() + ": backward called without a matching forward trace");
  if (tr.version != store.version())
    throw Error(stack.name() + ": stale trace, parameters changed since forward");
  if (output_grad.shape() != tr.output().shape() || output_grad.size != tr.output().size)
    throw ShapeError(stack.name() + ": output gradient shape " + to_string(output_grad.shape()) +
                     " does not match output " + to_string(tr.output().shape()));

  Batch<Scalar> g = output_grad;
  for (std::size_t ii = stack.layers().size(); ii-- > 0;) {
    const auto& spec = stack.layers()[ii];
    const auto& x = tr.activations[ii];
    const bool need_dx = input_grad || ii > 0;
    Batch<Scalar> dx;
    switch (spec.kind) {
      case LayerKind::Conv1d: {
        auto& w = store[stack.weight_block(ii)];
        auto& b = store[stack.bias_block(ii)];
        conv1d_backward(x, g, w.value, spec, w.grad, b.grad, need_dx ? &dx : nullptr);
        break;
      }
      case LayerKind::Deconv1d: {
        auto& w = store[stack.weight_block(ii)];
        auto& b = store[stack.bias_block(ii)];
        deconv1d_backward(x, g, w.value, spec, w.grad, b.grad, need_dx ? &dx : nullptr);
        break;
      }
      case LayerKind::Dense: {
        auto& w = store[stack.weight_block(ii)];
        auto& b = store[stack.bias_block(ii)];
        dense_backward(x, g, w.value, w.grad, b.grad, need_dx ? &dx : nullptr);
        break;
      }
      case LayerKind::Relu:
        dx = relu_backward(tr.activations[ii + 1], g);
        break;
      case LayerKind::MaxPool1d:
        dx = maxpool1d_backward(x, g, spec.pool_size, tr.argmax[ii]);
        break;
      case LayerKind::Unpool1d:
        dx = unpool1d_backward(g, spec.pool_size);
        break;
      case LayerKind::Flatten:
        dx = reshape_forward(g, x.shape());
        break;
      case LayerKind::Reshape:
        dx = flatten_forward(g);
        break;
    }
    if (!need_dx) return {};
    g = std::move(dx);
  }
  return g;
}

}  // namespace mmcae::nn
