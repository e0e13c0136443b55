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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "armin/kernels.hpp"
#include "armin/tensor.hpp"

namespace armin {

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// is alive and has not been cleared.
template <typename Scalar>
class BasicVar {
 public:
  BasicVar() = default;
  BasicVar(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  std::size_t id() const { return id_; }
  Tape<Scalar>& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

  const BasicTensor<Scalar>& value() const { return tape_->value(*this); }
  const MatrixX<Scalar>& matrix() const { return value().matrix(); }
  const Shape& shape() const { return value().shape(); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape.
///
/// Every operation appends a node holding its forward value and a closure that
/// pushes the node's adjoint to its operands. Nodes are appended in evaluation
/// order, so a reverse sweep over the node list is a reverse topological
/// traversal. Adjoints are allocated lazily, only for nodes that lie on a path
/// from a variable.
template <typename Scalar>
class Tape {
 public:
  using Tensor = BasicTensor<Scalar>;
  using Matrix = MatrixX<Scalar>;
  using Var = BasicVar<Scalar>;
  using BackwardFn = std::function<void(Tape&, const Var& self, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf with no gradient.
  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }
  Var constant(Matrix value) { return constant(Tensor(std::move(value))); }

  /// Leaf that accumulates a gradient.
  Var variable(Tensor value) { return push(std::move(value), true, nullptr); }

  /// Records a result computed from `inputs`. `backward` runs only when the
  /// result requires a gradient and received a nonzero adjoint path.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    const bool needs =
        std::any_of(inputs.begin(), inputs.end(), [this](const Var& v) { return requires_grad(v); });
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  const Tensor& value(const Var& v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }

  /// Adjoint buffer of `v`, allocated as zeros on first use.
  Matrix& grad_ref(const Var& v) {
    Node& n = nodes_.at(v.id());
    if (!n.has_grad) {
      n.grad = Matrix::Zero(n.value.matrix().rows(), n.value.matrix().cols());
      n.has_grad = true;
      account(n.grad.size());
    }
    return n.grad;
  }

  template <typename Derived>
  void accumulate(const Var& v, const Eigen::MatrixBase<Derived>& g) {
    if (!requires_grad(v)) return;
    grad_ref(v) += g;
  }

  /// Adjoint of `v` after backward(); zeros when no gradient reached it.
  Tensor grad(const Var& v) const {
    const Node& n = nodes_.at(v.id());
    if (!n.has_grad) return Tensor::zeros(n.value.shape());
    return Tensor(n.value.shape(), n.grad);
  }

  void backward(const Var& loss) {
    if (value(loss).size() != 1) {
      throw ContractError("backward: loss must be a scalar, got shape " +
                          shape_string(value(loss).shape()));
    }
    if (!requires_grad(loss)) return;
    grad_ref(loss).setConstant(Scalar(1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, Var(this, i), n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    bytes_ = 0;
  }

  /// Bytes currently held by recorded values and adjoints.
  std::size_t allocated_bytes() const { return bytes_; }
  /// High-water mark of allocated_bytes() since construction or reset_peak().
  std::size_t peak_bytes() const { return peak_; }
  void reset_peak() { peak_ = bytes_; }

 private:
  struct Node {
    Tensor value;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward) {
    account(value.size());
    nodes_.push_back(Node{std::move(value), Matrix(), false, requires_grad, std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  void account(Index elements) {
    bytes_ += static_cast<std::size_t>(elements) * sizeof(Scalar);
    peak_ = std::max(peak_, bytes_);
  }

  std::deque<Node> nodes_;
  std::size_t bytes_ = 0;
  std::size_t peak_ = 0;
};

using Var = BasicVar<double>;

namespace ad {

enum class LogBase { natural, two };

namespace detail {

template <typename Scalar>
Shape elementwise_shape(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  return a.shape();
}

/// Rank-1 operands stay rank-1; everything else becomes [rows, cols].
template <typename Scalar>
Shape result_shape(const BasicVar<Scalar>& like, const MatrixX<Scalar>& out) {
  if (like.value().rank() <= 1 && out.rows() == 1) return Shape{out.cols()};
  return Shape{out.rows(), out.cols()};
}

template <typename Scalar>
using G = const MatrixX<Scalar>&;

}  // namespace detail

template <typename Scalar>
BasicVar<Scalar> matmul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  MatrixX<Scalar> out = kernels::matmul(a.matrix(), b.matrix());
  Shape shape{out.rows(), out.cols()};
  return a.tape().record(BasicTensor<Scalar>(std::move(shape), std::move(out)), {a, b},
                         [a, b](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
                           if (t.requires_grad(a)) t.grad_ref(a).noalias() += g * b.matrix().transpose();
                           if (t.requires_grad(b)) t.grad_ref(b).noalias() += a.matrix().transpose() * g;
                         });
}

/// x * W^T + b, with b broadcast over the leading (batch) dimension. This is
/// the only broadcasting operation on the tape.
template <typename Scalar>
BasicVar<Scalar> affine(const BasicVar<Scalar>& x, const BasicVar<Scalar>& w,
                        const BasicVar<Scalar>& b) {
  MatrixX<Scalar> out = kernels::affine(x.matrix(), w.matrix(), b.matrix());
  Shape shape = detail::result_shape(x, out);
  return x.tape().record(
      BasicTensor<Scalar>(std::move(shape), std::move(out)), {x, w, b},
      [x, w, b](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
        if (t.requires_grad(x)) t.grad_ref(x).noalias() += g * w.matrix();
        if (t.requires_grad(w)) t.grad_ref(w).noalias() += g.transpose() * x.matrix();
        if (t.requires_grad(b)) t.grad_ref(b).reshaped(1, g.cols()) += g.colwise().sum();
      });
}

/// x * W^T.
template <typename Scalar>
BasicVar<Scalar> linear(const BasicVar<Scalar>& x, const BasicVar<Scalar>& w) {
  MatrixX<Scalar> out = kernels::linear(x.matrix(), w.matrix());
  Shape shape = detail::result_shape(x, out);
  return x.tape().record(BasicTensor<Scalar>(std::move(shape), std::move(out)), {x, w},
                         [x, w](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
                           if (t.requires_grad(x)) t.grad_ref(x).noalias() += g * w.matrix();
                           if (t.requires_grad(w)) t.grad_ref(w).noalias() += g.transpose() * x.matrix();
                         });
}

template <typename Scalar>
BasicVar<Scalar> add(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  Shape shape = detail::elementwise_shape(a, b, "add");
  return a.tape().record(BasicTensor<Scalar>(std::move(shape), kernels::add(a.matrix(), b.matrix())),
                         {a, b}, [a, b](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
                           t.accumulate(a, g);
                           t.accumulate(b, g);
                         });
}

template <typename Scalar>
BasicVar<Scalar> sub(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  Shape shape = detail::elementwise_shape(a, b, "sub");
  return a.tape().record(BasicTensor<Scalar>(std::move(shape), kernels::sub(a.matrix(), b.matrix())),
                         {a, b}, [a, b](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
                           t.accumulate(a, g);
                           t.accumulate(b, -g);
                         });
}

/// Elementwise product.
template <typename Scalar>
BasicVar<Scalar> mul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  Shape shape = detail::elementwise_shape(a, b, "mul");
  return a.tape().record(BasicTensor<Scalar>(std::move(shape), kernels::mul(a.matrix(), b.matrix())),
                         {a, b}, [a, b](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
                           if (t.requires_grad(a)) t.grad_ref(a) += g.cwiseProduct(b.matrix());
                           if (t.requires_grad(b)) t.grad_ref(b) += g.cwiseProduct(a.matrix());
                         });
}

template <typename Scalar>
BasicVar<Scalar> neg(const BasicVar<Scalar>& a) {
  return a.tape().record(BasicTensor<Scalar>(a.shape(), -a.matrix()), {a},
                         [a](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
                           t.accumulate(a, -g);
                         });
}

/// Same value as `a`, cut off from the graph: no gradient flows back through it.
template <typename Scalar>
BasicVar<Scalar> detach(const BasicVar<Scalar>& a) {
  return a.tape().constant(a.value());
}

template <typename Scalar>
BasicVar<Scalar> scale(const BasicVar<Scalar>& a, Scalar c) {
  return a.tape().record(BasicTensor<Scalar>(a.shape(), a.matrix() * c), {a},
                         [a, c](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
                           t.accumulate(a, g * c);
                         });
}

template <typename Scalar>
BasicVar<Scalar> sigmoid(const BasicVar<Scalar>& a) {
  return a.tape().record(BasicTensor<Scalar>(a.shape(), kernels::sigmoid(a.matrix())), {a},
                         [a](Tape<Scalar>& t, const BasicVar<Scalar>& self, detail::G<Scalar> g) {
                           const auto& y = self.matrix().array();
                           t.grad_ref(a).array() += g.array() * y * (Scalar(1) - y);
                         });
}

template <typename Scalar>
BasicVar<Scalar> tanh(const BasicVar<Scalar>& a) {
  return a.tape().record(BasicTensor<Scalar>(a.shape(), kernels::tanh(a.matrix())), {a},
                         [a](Tape<Scalar>& t, const BasicVar<Scalar>& self, detail::G<Scalar> g) {
                           const auto& y = self.matrix().array();
                           t.grad_ref(a).array() += g.array() * (Scalar(1) - y * y);
                         });
}

/// Sum of all elements, as a rank-0 scalar.
template <typename Scalar>
BasicVar<Scalar> sum(const BasicVar<Scalar>& a) {
  return a.tape().record(BasicTensor<Scalar>::scalar(a.matrix().sum()), {a},
                         [a](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
                           t.grad_ref(a).array() += g(0, 0);
                         });
}

/// Concatenates along `axis`. Rank-1 operands only have axis 0; for rank-2
/// operands axis 0 stacks rows and axis 1 stacks columns.
template <typename Scalar>
BasicVar<Scalar> concat(const std::vector<BasicVar<Scalar>>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  const Index rank = parts.front().value().rank();
  for (const auto& p : parts) {
    if (p.value().rank() != rank) throw DimensionError("concat: operands differ in rank");
  }
  if (rank < 1 || rank > 2 || axis < 0 || axis >= rank) {
    throw DimensionError("concat: unsupported axis " + std::to_string(axis) + " for rank " +
                         std::to_string(rank));
  }
  const bool by_cols = (rank == 1) || axis == 1;
  std::vector<const MatrixX<Scalar>*> ms;
  ms.reserve(parts.size());
  for (const auto& p : parts) ms.push_back(&p.matrix());
  MatrixX<Scalar> out = by_cols ? kernels::concat_cols(ms) : kernels::concat_rows(ms);
  Shape shape = rank == 1 ? Shape{out.cols()} : Shape{out.rows(), out.cols()};
  return parts.front().tape().record(
      BasicTensor<Scalar>(std::move(shape), std::move(out)),
      std::span<const BasicVar<Scalar>>(parts.data(), parts.size()),
      [parts, by_cols](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
        Index at = 0;
        for (const auto& p : parts) {
          const auto& m = p.matrix();
          if (by_cols) {
            if (t.requires_grad(p)) t.grad_ref(p) += g.middleCols(at, m.cols());
            at += m.cols();
          } else {
            if (t.requires_grad(p)) t.grad_ref(p) += g.middleRows(at, m.rows());
            at += m.rows();
          }
        }
      });
}

/// Contiguous slice [start, start+len) along `axis` (same axis rules as concat).
template <typename Scalar>
BasicVar<Scalar> slice(const BasicVar<Scalar>& a, Index start, Index len, int axis) {
  const Index rank = a.value().rank();
  if (rank < 1 || rank > 2 || axis < 0 || axis >= rank) {
    throw DimensionError("slice: unsupported axis " + std::to_string(axis) + " for rank " +
                         std::to_string(rank));
  }
  const bool by_cols = (rank == 1) || axis == 1;
  const auto& m = a.matrix();
  const Index extent = by_cols ? m.cols() : m.rows();
  if (start < 0 || len <= 0 || start + len > extent) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside axis of length " +
                         std::to_string(extent));
  }
  MatrixX<Scalar> out = by_cols ? MatrixX<Scalar>(m.middleCols(start, len))
                                : MatrixX<Scalar>(m.middleRows(start, len));
  Shape shape = rank == 1 ? Shape{len} : Shape{out.rows(), out.cols()};
  return a.tape().record(BasicTensor<Scalar>(std::move(shape), std::move(out)), {a},
                         [a, start, len, by_cols](Tape<Scalar>& t, const BasicVar<Scalar>&,
                                                  detail::G<Scalar> g) {
                           if (by_cols) {
                             t.grad_ref(a).middleCols(start, len) += g;
                           } else {
                             t.grad_ref(a).middleRows(start, len) += g;
                           }
                         });
}

template <typename Scalar>
std::vector<BasicVar<Scalar>> split(const BasicVar<Scalar>& a, const std::vector<Index>& sizes,
                                    int axis) {
  const Index rank = a.value().rank();
  const bool by_cols = (rank == 1) || axis == 1;
  const Index extent = by_cols ? a.matrix().cols() : a.matrix().rows();
  Index total = 0;
  for (Index s : sizes) total += s;
  if (total != extent) {
    throw DimensionError("split: sizes sum to " + std::to_string(total) + " but axis has length " +
                         std::to_string(extent));
  }
  std::vector<BasicVar<Scalar>> out;
  out.reserve(sizes.size());
  Index at = 0;
  for (Index s : sizes) {
    out.push_back(slice(a, at, s, axis));
    at += s;
  }
  return out;
}

/// Row-wise softmax.
template <typename Scalar>
BasicVar<Scalar> softmax(const BasicVar<Scalar>& a) {
  if (!a.matrix().allFinite()) throw NanError("softmax: non-finite logits");
  return a.tape().record(
      BasicTensor<Scalar>(a.shape(), kernels::softmax(a.matrix())), {a},
      [a](Tape<Scalar>& t, const BasicVar<Scalar>& self, detail::G<Scalar> g) {
        const auto& y = self.matrix();
        auto& ga = t.grad_ref(a);
        for (Index r = 0; r < y.rows(); ++r) {
          const Scalar dot = g.row(r).dot(y.row(r));
          ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
        }
      });
}

inline constexpr double kLogClamp = 1e-12;

/// Masked mean binary cross-entropy (natural log) of probabilities `pred`
/// against binary `target`. Probabilities are clamped to [1e-12, 1-1e-12].
template <typename Scalar>
BasicVar<Scalar> bce_loss(const BasicVar<Scalar>& pred, const MatrixX<Scalar>& target,
                          const MatrixX<Scalar>& mask) {
  const auto& p = pred.matrix();
  kernels::require_same_shape(p, target, "bce_loss");
  kernels::require_same_shape(p, mask, "bce_loss");
  const Scalar denom = mask.sum();
  if (denom <= Scalar(0)) throw ContractError("empty loss mask");
  const Scalar lo = Scalar(kLogClamp), hi = Scalar(1) - Scalar(kLogClamp);
  MatrixX<Scalar> pc = p.cwiseMax(lo).cwiseMin(hi);
  Scalar total = 0;
  for (Index i = 0; i < p.size(); ++i) {
    const Scalar m = mask.data()[i];
    if (m == Scalar(0)) continue;
    const Scalar q = pc.data()[i], y = target.data()[i];
    total -= m * (y * std::log(q) + (Scalar(1) - y) * std::log(Scalar(1) - q));
  }
  return pred.tape().record(
      BasicTensor<Scalar>::scalar(total / denom), {pred},
      [pred, target, mask, pc, denom](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
        const auto q = pc.array();
        const auto d = mask.array() *
                       (-target.array() / q + (Scalar(1) - target.array()) / (Scalar(1) - q)) / denom;
        t.grad_ref(pred).array() += g(0, 0) * d;
      });
}

/// Mean negative log-likelihood of integer `targets` under row-wise softmax of
/// `logits` [N x V], in nats or bits.
template <typename Scalar>
BasicVar<Scalar> ce_loss(const BasicVar<Scalar>& logits, std::span<const int> targets,
                         LogBase base = LogBase::natural) {
  const auto& z = logits.matrix();
  if (static_cast<Index>(targets.size()) != z.rows()) {
    throw DimensionError("ce_loss: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_string(z));
  }
  for (int y : targets) {
    if (y < 0 || y >= z.cols()) {
      throw IndexError("ce_loss: target " + std::to_string(y) + " outside [0, " +
                       std::to_string(z.cols()) + ")");
    }
  }
  const Scalar unit = base == LogBase::two ? Scalar(std::numbers::ln2) : Scalar(1);
  const Scalar n = static_cast<Scalar>(z.rows());
  MatrixX<Scalar> probs = kernels::softmax(z);
  Scalar total = 0;
  for (Index r = 0; r < z.rows(); ++r) {
    const Scalar m = z.row(r).maxCoeff();
    const Scalar lse = m + std::log((z.row(r).array() - m).exp().sum());
    total += lse - z(r, targets[static_cast<std::size_t>(r)]);
  }
  std::vector<int> ys(targets.begin(), targets.end());
  return logits.tape().record(
      BasicTensor<Scalar>::scalar(total / (n * unit)), {logits},
      [logits, probs, ys, n, unit](Tape<Scalar>& t, const BasicVar<Scalar>&, detail::G<Scalar> g) {
        MatrixX<Scalar> d = probs;
        for (std::size_t r = 0; r < ys.size(); ++r) d(static_cast<Index>(r), ys[r]) -= Scalar(1);
        t.grad_ref(logits) += d * (g(0, 0) / (n * unit));
      });
}

}  // namespace ad

template <typename Scalar>
BasicVar<Scalar> operator+(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  return ad::add(a, b);
}
template <typename Scalar>
BasicVar<Scalar> operator-(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  return ad::sub(a, b);
}
template <typename Scalar>
BasicVar<Scalar> operator*(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  return ad::mul(a, b);
}
template <typename Scalar>
BasicVar<Scalar> operator-(const BasicVar<Scalar>& a) {
  return ad::neg(a);
}

}  // namespace armin
