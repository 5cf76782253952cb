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

namespace mmcae::nn {

enum class LayerKind { Conv1d, Deconv1d, Dense, Relu, MaxPool1d, Unpool1d, Flatten, Reshape };

std::string_view to_string(LayerKind kind);

/// One layer of a stack. Dense layers reuse in_channels/out_channels as
/// feature counts; Reshape uses `target`.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  Index kernel_size = 1;
  Index stride = 1;
  Index in_channels = 1;
  Index out_channels = 1;
  Index pool_size = 2;
  Shape target{};

  static LayerSpec conv1d(Index kernel, Index stride, Index in_ch, Index out_ch) {
    return {LayerKind::Conv1d, kernel, stride, in_ch, out_ch, 2, {}};
  }
  static LayerSpec deconv1d(Index kernel, Index stride, Index in_ch, Index out_ch) {
    return {LayerKind::Deconv1d, kernel, stride, in_ch, out_ch, 2, {}};
  }
  static LayerSpec dense(Index in_features, Index out_features) {
    return {LayerKind::Dense, 1, 1, in_features, out_features, 2, {}};
  }
  static LayerSpec relu() { return {LayerKind::Relu, 1, 1, 1, 1, 2, {}}; }
  static LayerSpec maxpool1d(Index pool = 2) { return {LayerKind::MaxPool1d, 1, 1, 1, 1, pool, {}}; }
  static LayerSpec unpool1d(Index pool = 2) { return {LayerKind::Unpool1d, 1, 1, 1, 1, pool, {}}; }
  static LayerSpec flatten() { return {LayerKind::Flatten, 1, 1, 1, 1, 2, {}}; }
  static LayerSpec reshape(Index channels, Index length) {
    return {LayerKind::Reshape, 1, 1, 1, 1, 2, {channels, length}};
  }

  bool has_parameters() const {
    return kind == LayerKind::Conv1d || kind == LayerKind::Deconv1d || kind == LayerKind::Dense;
  }

  /// Rows/cols of the weight matrix as stored; see the kernels below.
  Index weight_rows() const;
  Index weight_cols() const;
  /// Weights plus biases.
  Index parameter_count() const;
  /// Inputs feeding each output unit, for initialization scaling.
  Index fan_in() const;

  std::string describe() const;
};

/// Throws ShapeError if the spec's own fields are out of range.
void validate(const LayerSpec& spec);

/// Output shape for the given input shape. Throws ShapeError on mismatch.
Shape output_shape(const LayerSpec& spec, Shape in);

// ---------------------------------------------------------------------------
// Kernels. Weight layouts:
//   conv1d    W: out x (k*in), column index kk*in + ci
//   deconv1d  W: (k*out) x in, row index kk*out + co
//   dense     W: out x in
// Biases are out x 1.
// ---------------------------------------------------------------------------

template <typename Scalar>
Matrix<Scalar> im2col(const Batch<Scalar>& x, Index kernel, Index stride, Index out_len) {
  const Index c = x.channels;
  Matrix<Scalar> cols(kernel * c, x.size * out_len);
  for (Index n = 0; n < x.size; ++n) {
    for (Index t = 0; t < out_len; ++t) {
      const Index src = n * x.length + t * stride;
      const Index dst = n * out_len + t;
      // Columns src..src+kernel-1 are contiguous in the channel-major layout.
      cols.col(dst) = Eigen::Map<const Vector<Scalar>>(x.data.col(src).data(), kernel * c);
    }
  }
  return cols;
}

// Scatter-add of im2col columns back onto a [channels, length] batch.
template <typename Scalar>
void col2im_add(const Matrix<Scalar>& cols, Index kernel, Index stride, Index in_len, Batch<Scalar>& y) {
  const Index c = y.channels;
  for (Index n = 0; n < y.size; ++n) {
    for (Index t = 0; t < in_len; ++t) {
      const Index src = n * in_len + t;
      const Index dst = n * y.length + t * stride;
      Eigen::Map<Vector<Scalar>>(y.data.col(dst).data(), kernel * c) += cols.col(src);
    }
  }
}

template <typename Scalar>
Batch<Scalar> conv1d_forward(const Batch<Scalar>& x, const Matrix<Scalar>& w, const Matrix<Scalar>& b,
                             const LayerSpec& spec, Index out_len) {
  Batch<Scalar> y;
  y.size = x.size;
  y.channels = spec.out_channels;
  y.length = out_len;
  y.data.noalias() = w * im2col(x, spec.kernel_size, spec.stride, out_len);
  y.data.colwise() += b.col(0);
  return y;
}

template <typename Scalar>
void conv1d_backward(const Batch<Scalar>& x, const Batch<Scalar>& dy, const Matrix<Scalar>& w,
                     const LayerSpec& spec, Matrix<Scalar>& dw, Matrix<Scalar>& db, Batch<Scalar>* dx) {
  const Matrix<Scalar> cols = im2col(x, spec.kernel_size, spec.stride, dy.length);
  dw.noalias() += dy.data * cols.transpose();
  db.col(0) += dy.data.rowwise().sum();
  if (dx != nullptr) {
    *dx = Batch<Scalar>(x.size, x.channels, x.length);
    const Matrix<Scalar> dcols = w.transpose() * dy.data;
    col2im_add(dcols, spec.kernel_size, spec.stride, dy.length, *dx);
  }
}

template <typename Scalar>
Batch<Scalar> deconv1d_forward(const Batch<Scalar>& x, const Matrix<Scalar>& w, const Matrix<Scalar>& b,
                               const LayerSpec& spec, Index out_len) {
  Batch<Scalar> y(x.size, spec.out_channels, out_len);
  const Matrix<Scalar> cols = w * x.data;
  col2im_add(cols, spec.kernel_size, spec.stride, x.length, y);
  y.data.colwise() += b.col(0);
  return y;
}

template <typename Scalar>
void deconv1d_backward(const Batch<Scalar>& x, const Batch<Scalar>& dy, const Matrix<Scalar>& w,
                       const LayerSpec& spec, Matrix<Scalar>& dw, Matrix<Scalar>& db, Batch<Scalar>* dx) {
  const Matrix<Scalar> dcols = im2col(dy, spec.kernel_size, spec.stride, x.length);
  dw.noalias() += dcols * x.data.transpose();
  db.col(0) += dy.data.rowwise().sum();
  if (dx != nullptr) {
    *dx = Batch<Scalar>(x.size, x.channels, x.length);
    dx->data.noalias() = w.transpose() * dcols;
  }
}

template <typename Scalar>
Batch<Scalar> dense_forward(const Batch<Scalar>& x, const Matrix<Scalar>& w, const Matrix<Scalar>& b) {
  Batch<Scalar> y;
  y.size = x.size;
  y.channels = w.rows();
  y.length = 1;
  y.data.noalias() = w * x.data;
  y.data.colwise() += b.col(0);
  return y;
}

template <typename Scalar>
void dense_backward(const Batch<Scalar>& x, const Batch<Scalar>& dy, const Matrix<Scalar>& w,
                    Matrix<Scalar>& dw, Matrix<Scalar>& db, Batch<Scalar>* dx) {
  dw.noalias() += dy.data * x.data.transpose();
  db.col(0) += dy.data.rowwise().sum();
  if (dx != nullptr) {
    dx->size = x.size;
    dx->channels = x.channels;
    dx->length = 1;
    dx->data.noalias() = w.transpose() * dy.data;
  }
}

template <typename Scalar>
Batch<Scalar> relu_forward(const Batch<Scalar>& x) {
  Batch<Scalar> y;
  y.size = x.size;
  y.channels = x.channels;
  y.length = x.length;
  y.data = x.data.cwiseMax(Scalar(0));
  return y;
}

// Gradient is taken from the output: y > 0 exactly where x > 0.
template <typename Scalar>
Batch<Scalar> relu_backward(const Batch<Scalar>& y, const Batch<Scalar>& dy) {
  Batch<Scalar> dx;
  dx.size = dy.size;
  dx.channels = dy.channels;
  dx.length = dy.length;
  dx.data = (y.data.array() > Scalar(0)).select(dy.data, Scalar(0));
  return dx;
}

using ArgmaxMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
Batch<Scalar> maxpool1d_forward(const Batch<Scalar>& x, Index pool, Index out_len, ArgmaxMatrix& argmax) {
  Batch<Scalar> y(x.size, x.channels, out_len);
  argmax.resize(x.channels, x.size * out_len);
  for (Index n = 0; n < x.size; ++n) {
    for (Index t = 0; t < out_len; ++t) {
      const Index src = n * x.length + t * pool;
      const Index dst = n * out_len + t;
      y.data.col(dst) = x.data.col(src);
      argmax.col(dst).setZero();
      for (Index r = 1; r < pool; ++r) {
        for (Index c = 0; c < x.channels; ++c) {
          // Strict comparison keeps the first maximum on ties.
          if (x.data(c, src + r) > y.data(c, dst)) {
            y.data(c, dst) = x.data(c, src + r);
            argmax(c, dst) = static_cast<std::int32_t>(r);
          }
        }
      }
    }
  }
  return y;
}

template <typename Scalar>
Batch<Scalar> maxpool1d_backward(const Batch<Scalar>& x, const Batch<Scalar>& dy, Index pool,
                                 const ArgmaxMatrix& argmax) {
  Batch<Scalar> dx(x.size, x.channels, x.length);
  for (Index n = 0; n < dy.size; ++n) {
    for (Index t = 0; t < dy.length; ++t) {
      const Index src = n * dy.length + t;
      const Index dst = n * x.length + t * pool;
      for (Index c = 0; c < x.channels; ++c) dx.data(c, dst + argmax(c, src)) += dy.data(c, src);
    }
  }
  return dx;
}

// Nearest-neighbour upsampling: every input step is repeated `pool` times.
template <typename Scalar>
Batch<Scalar> unpool1d_forward(const Batch<Scalar>& x, Index pool) {
  Batch<Scalar> y(x.size, x.channels, x.length * pool);
  for (Index n = 0; n < x.size; ++n)
    for (Index t = 0; t < x.length; ++t)
      for (Index r = 0; r < pool; ++r) y.data.col(n * y.length + t * pool + r) = x.data.col(n * x.length + t);
  return y;
}

template <typename Scalar>
Batch<Scalar> unpool1d_backward(const Batch<Scalar>& dy, Index pool) {
  Batch<Scalar> dx(dy.size, dy.channels, dy.length / pool);
  for (Index n = 0; n < dx.size; ++n)
    for (Index t = 0; t < dx.length; ++t)
      for (Index r = 0; r < pool; ++r) dx.data.col(n * dx.length + t) += dy.data.col(n * dy.length + t * pool + r);
  return dx;
}

// [C, L] -> [C*L, 1], channel-major.
template <typename Scalar>
Batch<Scalar> flatten_forward(const Batch<Scalar>& x) {
  if (x.length == 1) return x;
  Batch<Scalar> y(x.size, x.channels * x.length, 1);
  for (Index n = 0; n < x.size; ++n)
    for (Index c = 0; c < x.channels; ++c)
      y.data.col(n).segment(c * x.length, x.length) = x.data.block(c, n * x.length, 1, x.length).transpose();
  return y;
}

// [C*L, 1] -> [C, L]; inverse of flatten_forward.
template <typename Scalar>
Batch<Scalar> reshape_forward(const Batch<Scalar>& x, Shape target) {
  if (target.length == 1) {
    Batch<Scalar> y = x;
    y.channels = target.channels;
    return y;
  }
  Batch<Scalar> y(x.size, target.channels, target.length);
  for (Index n = 0; n < x.size; ++n)
    for (Index c = 0; c < target.channels; ++c)
      y.data.block(c, n * target.length, 1, target.length) =
          x.data.col(n).segment(c * target.length, target.length).transpose();
  return y;
}

}  // namespace mmcae::nn
