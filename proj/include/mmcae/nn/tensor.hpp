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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mmcae {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXr = Matrix<double>;
using VectorXr = Vector<double>;

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape algebra or tensor shape violation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Per-sample shape of a 1-D multichannel signal. Feature vectors are
/// signals of length 1.
struct Shape {
  Index channels = 0;
  Index length = 0;

  friend bool operator==(const Shape&, const Shape&) = default;
  Index numel() const { return channels * length; }
};

inline std::string to_string(const Shape& s) {
  return "(-1, " + std::to_string(s.channels) + ", " + std::to_string(s.length) + ")";
}

// A batch of N signals of shape [C, L], stored as a C x (N*L) matrix. Column
// n*L + t holds every channel of sample n at time t, so a feature batch
// (L == 1) is the familiar features x N matrix.
template <typename Scalar>
struct Batch {
  Index size = 0;
  Index channels = 0;
  Index length = 0;
  Matrix<Scalar> data;

  Batch() = default;
  Batch(Index n, Index c, Index l) : size(n), channels(c), length(l), data(Matrix<Scalar>::Zero(c, n * l)) {}

  static Batch zeros(Index n, Shape s) { return Batch(n, s.channels, s.length); }

  /// Wraps a features x N matrix.
  static Batch features(Matrix<Scalar> m) {
    Batch b;
    b.size = m.cols();
    b.channels = m.rows();
    b.length = 1;
    b.data = std::move(m);
    return b;
  }

  Shape shape() const { return {channels, length}; }

  auto sample(Index n) { return data.middleCols(n * length, length); }
  auto sample(Index n) const { return data.middleCols(n * length, length); }
};

}  // namespace mmcae
