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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "armin/ops.hpp"
#include "armin/rng.hpp"
#include "armin/tensor.hpp"

namespace armin {

struct ArminDims {
  Index d_i = 0;
  Index d_h = 0;
  Index d_r = 0;
  Index n_mem = 0;

  /// Width of the cell input [x, h, r].
  Index cell_in() const { return d_i + d_h + d_r; }
  /// Width of the addressing input [x, h].
  Index address_in() const { return d_i + d_h; }
  bool projects_writes() const { return d_h != d_r; }
};

/// Trainable weights of one ARMIN cell together with its addressing layer and
/// the state-to-slot write projection.
///
///   w_ig  [(d_h+d_r) x (d_i+d_h+d_r)]   b_ig  [d_h+d_r]
///   w_go  [(4 d_h+d_r) x (d_i+d_h+d_r)] b_go  [4 d_h+d_r]   (blocks i, f, g, o_h, o_r)
///   w_s   [n_mem x (d_i+d_h)]           b_s   [n_mem]
///   w_m   [d_r x d_h], only when d_h != d_r
struct ArminParams {
  ArminDims dims;
  Tensor w_ig, b_ig, w_go, b_go;
  std::optional<Tensor> w_s, b_s;
  std::optional<Tensor> w_m;

  /// Uniform(±1/sqrt(fan_in)) weights, zero biases, +1 on the forget block of b_go.
  static ArminParams init(const ArminDims& dims, Rng& rng, bool auto_addressing = true);
  static ArminParams zeros(const ArminDims& dims, bool auto_addressing = true);

  /// Throws DimensionError when a tensor disagrees with `dims`.
  void validate() const;

  std::vector<std::pair<std::string, Tensor*>> tensors();
  std::vector<std::pair<std::string, const Tensor*>> tensors() const;
};

/// Fused-gate LSTM: w [4 d_h x (d_i+d_h)], b [4 d_h], gate blocks i, f, g, o.
struct LstmParams {
  Index d_i = 0;
  Index d_h = 0;
  Tensor w, b;

  static LstmParams init(Index d_i, Index d_h, Rng& rng);
  static LstmParams zeros(Index d_i, Index d_h);

  void validate() const;

  std::vector<std::pair<std::string, Tensor*>> tensors();
  std::vector<std::pair<std::string, const Tensor*>> tensors() const;
};

Index param_count(const ArminParams& params);
Index param_count(const LstmParams& params);
/// Core ARMIN count from the shape formulas alone.
Index armin_param_count(const ArminDims& dims, bool auto_addressing = true);
Index lstm_param_count(Index d_i, Index d_h);

void fill_uniform(Tensor& t, double bound, Rng& rng);

// ---------------------------------------------------------------------------
// Cell computation, written once over an evaluation policy (TapeOps/ValueOps).

template <typename V>
struct ArminWeights {
  V w_ig, b_ig, w_go, b_go;
  std::optional<V> w_s, b_s, w_m;
};

template <typename V>
struct LstmWeights {
  V w, b;
};

/// Registers every ARMIN tensor as a tape variable.
template <typename Scalar>
ArminWeights<BasicVar<Scalar>> bind(Tape<Scalar>& tape, const ArminParams& p);
template <typename Scalar>
LstmWeights<BasicVar<Scalar>> bind(Tape<Scalar>& tape, const LstmParams& p);

inline ArminWeights<Matrix> values(const ArminParams& p) {
  ArminWeights<Matrix> w{p.w_ig.matrix(), p.b_ig.matrix(), p.w_go.matrix(), p.b_go.matrix(), {}, {}, {}};
  if (p.w_s) w.w_s = p.w_s->matrix();
  if (p.b_s) w.b_s = p.b_s->matrix();
  if (p.w_m) w.w_m = p.w_m->matrix();
  return w;
}

inline LstmWeights<Matrix> values(const LstmParams& p) { return {p.w.matrix(), p.b.matrix()}; }

template <typename V>
struct GatedInputs {
  V g_h, g_r;
  V h_gated, r_gated;
};

template <typename V>
struct ArminGates {
  V g_h, g_r;
  V i, f, g, o_h, o_r;
};

template <typename V>
struct ArminCellOutput {
  V o;      // [o_h ∘ tanh(h_new), o_r ∘ tanh(r)]
  V h_new;
};

template <typename V>
struct LstmCellOutput {
  V h_new, c_new;
};

/// [g_h; g_r] = σ(W_ig [x, h_prev, r] + b_ig), then gates the two states.
template <class Ops, typename V = typename Ops::Value>
GatedInputs<V> armin_gates_phase1(Ops& ops, const V& x, const V& h_prev, const V& r,
                                  const ArminWeights<V>& w) {
  const Index d_h = Ops::cols(h_prev), d_r = Ops::cols(r);
  if (Ops::rows(w.w_ig) != d_h + d_r) {
    throw DimensionError("armin_gates_phase1: w_ig has " + std::to_string(Ops::rows(w.w_ig)) +
                         " rows, expected d_h+d_r = " + std::to_string(d_h + d_r));
  }
  V gates = ops.sigmoid(ops.affine(ops.concat_cols({x, h_prev, r}), w.w_ig, w.b_ig));
  V g_h = ops.slice_cols(gates, 0, d_h);
  V g_r = ops.slice_cols(gates, d_h, d_r);
  V h_gated = ops.mul(g_h, h_prev);
  V r_gated = ops.mul(g_r, r);
  return {g_h, g_r, h_gated, r_gated};
}

/// [i; f; g; o_h; o_r] = {σ, σ, tanh, σ, σ}(W_go [x, h_gated, r_gated] + b_go).
template <class Ops, typename V = typename Ops::Value>
ArminGates<V> armin_gates_phase2(Ops& ops, const V& x, const V& h_gated, const V& r_gated,
                                 const ArminWeights<V>& w) {
  const Index d_h = Ops::cols(h_gated), d_r = Ops::cols(r_gated);
  if (Ops::rows(w.w_go) != 4 * d_h + d_r) {
    throw DimensionError("armin_gates_phase2: w_go has " + std::to_string(Ops::rows(w.w_go)) +
                         " rows, expected 4*d_h+d_r = " + std::to_string(4 * d_h + d_r));
  }
  V pre = ops.affine(ops.concat_cols({x, h_gated, r_gated}), w.w_go, w.b_go);
  ArminGates<V> out;
  out.i = ops.sigmoid(ops.slice_cols(pre, 0, d_h));
  out.f = ops.sigmoid(ops.slice_cols(pre, d_h, d_h));
  out.g = ops.tanh(ops.slice_cols(pre, 2 * d_h, d_h));
  out.o_h = ops.sigmoid(ops.slice_cols(pre, 3 * d_h, d_h));
  out.o_r = ops.sigmoid(ops.slice_cols(pre, 4 * d_h, d_r));
  return out;
}

/// h_new = f ∘ h_prev + i ∘ g. Note h_prev here is the ungated state.
template <class Ops, typename V = typename Ops::Value>
V state_combine(Ops& ops, const V& h_prev, const V& f, const V& i, const V& g) {
  return ops.add(ops.mul(f, h_prev), ops.mul(i, g));
}

/// o = [o_h ∘ tanh(h_new), o_r ∘ tanh(r)], with tanh on the ungated read.
template <class Ops, typename V = typename Ops::Value>
V output_combine(Ops& ops, const V& h_new, const V& r, const V& o_h, const V& o_r) {
  return ops.concat_cols({ops.mul(o_h, ops.tanh(h_new)), ops.mul(o_r, ops.tanh(r))});
}

template <class Ops, typename V = typename Ops::Value>
ArminCellOutput<V> armin_cell_forward(Ops& ops, const V& x, const V& h_prev, const V& r,
                                      const ArminWeights<V>& w, ArminGates<V>* gates_out = nullptr) {
  GatedInputs<V> p1 = armin_gates_phase1(ops, x, h_prev, r, w);
  ArminGates<V> gates = armin_gates_phase2(ops, x, p1.h_gated, p1.r_gated, w);
  gates.g_h = p1.g_h;
  gates.g_r = p1.g_r;
  V h_new = state_combine(ops, h_prev, gates.f, gates.i, gates.g);
  V o = output_combine(ops, h_new, r, gates.o_h, gates.o_r);
  if (gates_out) *gates_out = gates;
  return {o, h_new};
}

template <class Ops, typename V = typename Ops::Value>
LstmCellOutput<V> lstm_cell_forward(Ops& ops, const V& x, const V& h_prev, const V& c_prev,
                                    const LstmWeights<V>& w) {
  const Index d_h = Ops::cols(h_prev);
  if (Ops::rows(w.w) != 4 * d_h) {
    throw DimensionError("lstm_cell_forward: w has " + std::to_string(Ops::rows(w.w)) +
                         " rows, expected 4*d_h = " + std::to_string(4 * d_h));
  }
  V pre = ops.affine(ops.concat_cols({x, h_prev}), w.w, w.b);
  V i = ops.sigmoid(ops.slice_cols(pre, 0, d_h));
  V f = ops.sigmoid(ops.slice_cols(pre, d_h, d_h));
  V g = ops.tanh(ops.slice_cols(pre, 2 * d_h, d_h));
  V o = ops.sigmoid(ops.slice_cols(pre, 3 * d_h, d_h));
  V c_new = ops.add(ops.mul(f, c_prev), ops.mul(i, g));
  V h_new = ops.mul(o, ops.tanh(c_new));
  return {h_new, c_new};
}

template <typename Scalar>
ArminWeights<BasicVar<Scalar>> bind(Tape<Scalar>& tape, const ArminParams& p) {
  ArminWeights<BasicVar<Scalar>> w{tape.variable(p.w_ig), tape.variable(p.b_ig),
                                   tape.variable(p.w_go), tape.variable(p.b_go), {}, {}, {}};
  if (p.w_s) w.w_s = tape.variable(*p.w_s);
  if (p.b_s) w.b_s = tape.variable(*p.b_s);
  if (p.w_m) w.w_m = tape.variable(*p.w_m);
  return w;
}

template <typename Scalar>
LstmWeights<BasicVar<Scalar>> bind(Tape<Scalar>& tape, const LstmParams& p) {
  return {tape.variable(p.w), tape.variable(p.b)};
}

}  // namespace armin
