/*
 * Copyright 2026 The ARMIN Toolkit Authors
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

// Forward kernels shared by the recording tape and the tape-free inference
// path. Both routes call these so that they agree bit for bit.

#include <cmath>
#include <vector>

#include "armin/tensor.hpp"

namespace armin::kernels {

template <typename Scalar>
void require_same_shape(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

template <typename Scalar>
MatrixX<Scalar> matmul(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a) + " x " +
                         shape_string(b));
  }
  MatrixX<Scalar> out(a.rows(), b.cols());
  out.noalias() = a * b;
  return out;
}

/// x * W^T + b with b broadcast over rows. x: [B x in], W: [out x in], b: [1 x out].
template <typename Scalar>
MatrixX<Scalar> affine(const MatrixX<Scalar>& x, const MatrixX<Scalar>& w,
                       const MatrixX<Scalar>& b) {
  if (x.cols() != w.cols() || b.size() != w.rows()) {
    throw DimensionError("affine: input " + shape_string(x) + ", weight " + shape_string(w) +
                         ", bias " + shape_string(b));
  }
  MatrixX<Scalar> out(x.rows(), w.rows());
  out.noalias() = x * w.transpose();
  out.rowwise() += Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(b.data(), b.size());
  return out;
}

/// x * W^T without bias.
template <typename Scalar>
MatrixX<Scalar> linear(const MatrixX<Scalar>& x, const MatrixX<Scalar>& w) {
  if (x.cols() != w.cols()) {
    throw DimensionError("linear: input " + shape_string(x) + ", weight " + shape_string(w));
  }
  MatrixX<Scalar> out(x.rows(), w.rows());
  out.noalias() = x * w.transpose();
  return out;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
MatrixX<Scalar> sigmoid(const MatrixX<Scalar>& a) {
  return a.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <typename Scalar>
MatrixX<Scalar> tanh(const MatrixX<Scalar>& a) {
  return a.unaryExpr([](Scalar v) { return std::tanh(v); });
}

template <typename Scalar>
MatrixX<Scalar> add(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  require_same_shape(a, b, "add");
  return a + b;
}

template <typename Scalar>
MatrixX<Scalar> sub(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  require_same_shape(a, b, "sub");
  return a - b;
}

template <typename Scalar>
MatrixX<Scalar> mul(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  require_same_shape(a, b, "mul");
  return a.cwiseProduct(b);
}

/// Column-wise concatenation of row-aligned blocks.
template <typename Scalar>
MatrixX<Scalar> concat_cols(const std::vector<const MatrixX<Scalar>*>& parts) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  const Index rows = parts.front()->rows();
  Index cols = 0;
  for (const auto* p : parts) {
    if (p->rows() != rows) {
      throw DimensionError("concat: row count mismatch " + shape_string(*parts.front()) + " vs " +
                           shape_string(*p));
    }
    cols += p->cols();
  }
  MatrixX<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto* p : parts) {
    out.middleCols(at, p->cols()) = *p;
    at += p->cols();
  }
  return out;
}

template <typename Scalar>
MatrixX<Scalar> concat_rows(const std::vector<const MatrixX<Scalar>*>& parts) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  const Index cols = parts.front()->cols();
  Index rows = 0;
  for (const auto* p : parts) {
    if (p->cols() != cols) {
      throw DimensionError("concat: column count mismatch " + shape_string(*parts.front()) +
                           " vs " + shape_string(*p));
    }
    rows += p->rows();
  }
  MatrixX<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto* p : parts) {
    out.middleRows(at, p->rows()) = *p;
    at += p->rows();
  }
  return out;
}

template <typename Scalar>
MatrixX<Scalar> slice_cols(const MatrixX<Scalar>& a, Index start, Index len) {
  if (start < 0 || len <= 0 || start + len > a.cols()) {
    throw DimensionError("slice: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + shape_string(a));
  }
  return a.middleCols(start, len);
}

/// Row-wise softmax with max subtraction.
template <typename Scalar>
MatrixX<Scalar> softmax(const MatrixX<Scalar>& a) {
  MatrixX<Scalar> out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    const Scalar m = a.row(r).maxCoeff();
    out.row(r) = (a.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// Index of the first maximum in each row.
template <typename Scalar>
std::vector<Index> argmax_rows(const MatrixX<Scalar>& a) {
  std::vector<Index> idx(static_cast<std::size_t>(a.rows()));
  for (Index r = 0; r < a.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < a.cols(); ++c) {
      if (a(r, c) > a(r, best)) best = c;
    }
    idx[static_cast<std::size_t>(r)] = best;
  }
  return idx;
}

}  // namespace armin::kernels
