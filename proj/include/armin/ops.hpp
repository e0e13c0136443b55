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

// Two interchangeable evaluation policies for model code written once:
// TapeOps records onto a Tape for training, ValueOps evaluates plain matrices
// for inference. Both forward through armin::kernels.

#include <vector>

#include "armin/kernels.hpp"
#include "armin/tape.hpp"

namespace armin {

template <typename Scalar>
struct TapeOps {
  using Value = BasicVar<Scalar>;

  Tape<Scalar>& tape;

  static Index cols(const Value& v) { return v.matrix().cols(); }
  static Index rows(const Value& v) { return v.matrix().rows(); }

  Value affine(const Value& x, const Value& w, const Value& b) { return ad::affine(x, w, b); }
  Value linear(const Value& x, const Value& w) { return ad::linear(x, w); }
  Value sigmoid(const Value& a) { return ad::sigmoid(a); }
  Value tanh(const Value& a) { return ad::tanh(a); }
  Value add(const Value& a, const Value& b) { return ad::add(a, b); }
  Value mul(const Value& a, const Value& b) { return ad::mul(a, b); }
  Value concat_cols(std::vector<Value> parts) { return ad::concat(parts, 1); }
  Value slice_cols(const Value& a, Index start, Index len) { return ad::slice(a, start, len, 1); }
};

template <typename Scalar>
struct ValueOps {
  using Value = MatrixX<Scalar>;

  static Index cols(const Value& v) { return v.cols(); }
  static Index rows(const Value& v) { return v.rows(); }

  Value affine(const Value& x, const Value& w, const Value& b) { return kernels::affine(x, w, b); }
  Value linear(const Value& x, const Value& w) { return kernels::linear(x, w); }
  Value sigmoid(const Value& a) { return kernels::sigmoid(a); }
  Value tanh(const Value& a) { return kernels::tanh(a); }
  Value add(const Value& a, const Value& b) { return kernels::add(a, b); }
  Value mul(const Value& a, const Value& b) { return kernels::mul(a, b); }
  Value concat_cols(const std::vector<Value>& parts) {
    std::vector<const Value*> ptrs;
    ptrs.reserve(parts.size());
    for (const auto& p : parts) ptrs.push_back(&p);
    return kernels::concat_cols(ptrs);
  }
  Value slice_cols(const Value& a, Index start, Index len) { return kernels::slice_cols(a, start, len); }
};

}  // namespace armin
