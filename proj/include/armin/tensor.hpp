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

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "armin/errors.hpp"

namespace armin {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = MatrixX<double>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  return shape_string(Shape{m.rows(), m.cols()});
}

/// Dense row-major tensor of rank 0..3.
///
/// Storage is a row-major Eigen matrix. Rank 0 and rank 1 tensors are held as
/// a single row; rank >= 2 tensors fold every trailing axis into the columns,
/// so a [B, n, d] tensor is a B x (n*d) matrix. The flat data order is always
/// the row-major order of the shape.
template <typename Scalar>
class BasicTensor {
 public:
  using Storage = MatrixX<Scalar>;

  /// Rank-0 zero scalar.
  BasicTensor() : shape_{}, data_(Storage::Zero(1, 1)) {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = Storage::Zero(rows_for(shape_), cols_for(shape_));
  }

  /// Wraps a matrix as a rank-2 tensor.
  explicit BasicTensor(Storage m) : shape_{m.rows(), m.cols()}, data_(std::move(m)) {
    check_shape(shape_);
  }

  BasicTensor(Shape shape, Storage m) : shape_(std::move(shape)), data_(std::move(m)) {
    check_shape(shape_);
    if (shape_size(shape_) != data_.size()) {
      throw DimensionError("tensor shape " + shape_string(shape_) + " does not match storage " +
                           shape_string(data_));
    }
    data_.resize(rows_for(shape_), cols_for(shape_));
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor scalar(Scalar v) {
    BasicTensor t;
    t.data_(0, 0) = v;
    return t;
  }

  static BasicTensor vector(std::initializer_list<Scalar> values) {
    BasicTensor t(Shape{static_cast<Index>(values.size())});
    Index i = 0;
    for (Scalar v : values) t.data_(0, i++) = v;
    return t;
  }

  static BasicTensor matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r ? static_cast<Index>(rows.begin()->size()) : 0;
    Storage m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c) throw DimensionError("ragged matrix literal");
      Index j = 0;
      for (Scalar v : row) m(i, j++) = v;
      ++i;
    }
    return BasicTensor(std::move(m));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }

  Storage& matrix() { return data_; }
  const Storage& matrix() const { return data_; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// Flat row-major element access.
  Scalar& operator[](Index i) { return data_.data()[i]; }
  Scalar operator[](Index i) const { return data_.data()[i]; }

  Scalar item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
    return data_(0, 0);
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const Shape& shape) {
    for (Index d : shape) {
      if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_string(shape));
    }
  }
  static Index rows_for(const Shape& shape) { return shape.size() >= 2 ? shape[0] : 1; }
  static Index cols_for(const Shape& shape) { return shape_size(shape) / rows_for(shape); }

  Shape shape_;
  Storage data_;
};

using Tensor = BasicTensor<double>;

}  // namespace armin
