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

#include "mmcae/nn/tensor.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mmcae::nn {

template <typename Scalar>
struct ParameterBlock {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  // ADAM first and second moments.
  Matrix<Scalar> m;
  Matrix<Scalar> v;
};

/// Ordered named parameter blocks with paired gradient and moment buffers.
/// `version()` changes whenever values change so stale traces can be caught.
template <typename Scalar>
class ParameterStore {
 public:
  Index add(std::string name, Index rows, Index cols) {
    if (find(name) >= 0) throw Error("duplicate parameter block '" + name + "'");
    ParameterBlock<Scalar> b;
    b.name = std::move(name);
    b.value = Matrix<Scalar>::Zero(rows, cols);
    b.grad = Matrix<Scalar>::Zero(rows, cols);
    b.m = Matrix<Scalar>::Zero(rows, cols);
    b.v = Matrix<Scalar>::Zero(rows, cols);
    blocks_.push_back(std::move(b));
    ++version_;
    return static_cast<Index>(blocks_.size()) - 1;
  }

  Index find(std::string_view name) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (blocks_[i].name == name) return static_cast<Index>(i);
    return -1;
  }

  Index size() const { return static_cast<Index>(blocks_.size()); }
  ParameterBlock<Scalar>& operator[](Index i) { return blocks_[static_cast<std::size_t>(i)]; }
  const ParameterBlock<Scalar>& operator[](Index i) const { return blocks_[static_cast<std::size_t>(i)]; }
  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  Index total_parameters() const {
    Index n = 0;
    for (const auto& b : blocks_) n += b.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& b : blocks_) b.grad.setZero();
  }

  /// Call after mutating values in place.
  void touch() { ++version_; }
  std::uint64_t version() const { return version_; }

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  /// Copies values only (not gradients or moments).
  void copy_values_from(const ParameterStore& other) {
    if (other.blocks_.size() != blocks_.size()) throw Error("parameter store layout mismatch");
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].value = other.blocks_[i].value;
    touch();
  }

  bool all_finite() const {
    for (const auto& b : blocks_)
      if (!b.value.allFinite()) return false;
    return true;
  }

 private:
  std::vector<ParameterBlock<Scalar>> blocks_;
  std::uint64_t version_ = 0;
  std::int64_t step_ = 0;
};

}  // namespace mmcae::nn
