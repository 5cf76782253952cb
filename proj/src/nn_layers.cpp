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

#include "mmcae/nn/adam.hpp"
#include "mmcae/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace mmcae::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::Deconv1d: return "deconv1d";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool1d: return "maxpool1d";
    case LayerKind::Unpool1d: return "unpool1d";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Reshape: return "reshape";
  }
  return "unknown";
}

Index LayerSpec::weight_rows() const {
  switch (kind) {
    case LayerKind::Conv1d: return out_channels;
    case LayerKind::Deconv1d: return kernel_size * out_channels;
    case LayerKind::Dense: return out_channels;
    default: return 0;
  }
}

Index LayerSpec::weight_cols() const {
  switch (kind) {
    case LayerKind::Conv1d: return kernel_size * in_channels;
    case LayerKind::Deconv1d: return in_channels;
    case LayerKind::Dense: return in_channels;
    default: return 0;
  }
}

Index LayerSpec::parameter_count() const {
  return has_parameters() ? weight_rows() * weight_cols() + out_channels : 0;
}

Index LayerSpec::fan_in() const {
  switch (kind) {
    case LayerKind::Conv1d: return kernel_size * in_channels;
    // Each transposed-conv output sees about k/s taps per input channel.
    case LayerKind::Deconv1d: return std::max<Index>(1, in_channels * kernel_size / stride);
    case LayerKind::Dense: return in_channels;
    default: return 1;
  }
}

std::string LayerSpec::describe() const {
  std::string s(to_string(kind));
  switch (kind) {
    case LayerKind::Conv1d:
    case LayerKind::Deconv1d:
      s += "(k=" + std::to_string(kernel_size) + ", s=" + std::to_string(stride) + ", " +
           std::to_string(in_channels) + "->" + std::to_string(out_channels) + ")";
      break;
    case LayerKind::Dense:
      s += "(" + std::to_string(in_channels) + "->" + std::to_string(out_channels) + ")";
      break;
    case LayerKind::MaxPool1d:
    case LayerKind::Unpool1d:
      s += "(" + std::to_string(pool_size) + ", " + std::to_string(pool_size) + ")";
      break;
    case LayerKind::Reshape:
      s += to_string(target);
      break;
    default:
      break;
  }
  return s;
}

void validate(const LayerSpec& spec) {
  if (spec.kernel_size < 1) throw ShapeError("kernel_size must be >= 1");
  if (spec.stride < 1) throw ShapeError("stride must be >= 1");
  if (spec.in_channels < 1 || spec.out_channels < 1) throw ShapeError("channel counts must be >= 1");
  if ((spec.kind == LayerKind::MaxPool1d || spec.kind == LayerKind::Unpool1d) && spec.pool_size < 1)
    throw ShapeError("pool_size must be >= 1");
  if (spec.kind == LayerKind::Reshape && (spec.target.channels < 1 || spec.target.length < 1))
    throw ShapeError("reshape target must be positive");
}

Shape output_shape(const LayerSpec& spec, Shape in) {
  auto need_channels = [&](Index c) {
    if (in.channels != c)
      throw ShapeError("expected " + std::to_string(c) + " input channels, got " + std::to_string(in.channels));
  };
  switch (spec.kind) {
    case LayerKind::Conv1d:
      need_channels(spec.in_channels);
      if (in.length < spec.kernel_size)
        throw ShapeError("input length " + std::to_string(in.length) + " shorter than kernel " +
                         std::to_string(spec.kernel_size));
      return {spec.out_channels, (in.length - spec.kernel_size) / spec.stride + 1};
    case LayerKind::Deconv1d:
      need_channels(spec.in_channels);
      return {spec.out_channels, (in.length - 1) * spec.stride + spec.kernel_size};
    case LayerKind::Dense:
      if (in.length != 1) throw ShapeError("dense layer needs a flat input, got " + to_string(in));
      need_channels(spec.in_channels);
      return {spec.out_channels, 1};
    case LayerKind::Relu:
      return in;
    case LayerKind::MaxPool1d:
      if (in.length < spec.pool_size) throw ShapeError("input shorter than pooling window");
      return {in.channels, in.length / spec.pool_size};
    case LayerKind::Unpool1d:
      return {in.channels, in.length * spec.pool_size};
    case LayerKind::Flatten:
      return {in.channels * in.length, 1};
    case LayerKind::Reshape:
      if (in.length != 1 || in.channels != spec.target.numel())
        throw ShapeError("cannot reshape " + to_string(in) + " to " + to_string(spec.target));
      return spec.target;
  }
  throw ShapeError("unknown layer kind");
}

void validate(const AdamConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
    throw Error("adam learning_rate must be finite and non-negative");
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0)) throw Error("adam beta1 must lie in (0, 1)");
  if (!(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) throw Error("adam beta2 must lie in (0, 1)");
  if (!(cfg.epsilon > 0.0)) throw Error("adam epsilon must be positive");
  if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay))
    throw Error("adam weight_decay must be finite and non-negative");
}

}  // namespace mmcae::nn
