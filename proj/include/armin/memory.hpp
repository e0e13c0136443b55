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
#include <string_view>
#include <vector>

#include "armin/rng.hpp"
#include "armin/tape.hpp"
#include "armin/tensor.hpp"

namespace armin {

/// How a sampled address drives the read.
///   soft             read with the relaxed weights (used for gradient checks)
///   straight_through one-hot forward, gradient through the relaxed weights
///   argmax           no noise, exact one-hot, no gradient (inference)
enum class AddressMode { soft, straight_through, argmax };

AddressMode parse_address_mode(std::string_view name);
std::string to_string(AddressMode mode);

struct GumbelConfig {
  double tau_max = 1.0;
  double tau_min = 0.25;
  long anneal_iters = 1;
  AddressMode mode = AddressMode::straight_through;

  void validate() const;
};

/// max(tau_min, tau_max * exp(-λ iter)), λ = ln(tau_max / tau_min) / anneal_iters.
double anneal_tau(const GumbelConfig& config, long iter);

inline constexpr double kUniformClamp = 1e-12;

/// −log(−log u) with u clamped to [1e-12, 1 − 1e-12].
double gumbel_from_uniform(double u);

Tensor gumbel_noise(Index k, Rng& rng);
/// [rows x k] block of i.i.d. Gumbel draws.
Matrix gumbel_noise(Index rows, Index k, Rng& rng);

/// One addressing event for a batch of rows.
struct AddressSample {
  Matrix logits;
  Matrix noise;
  Matrix relaxed;                  // softmax((logits + noise) / τ)
  std::vector<Index> hard_index;   // argmax(logits + noise) per row
  AddressMode mode = AddressMode::soft;
};

/// `noise` may be empty for argmax mode (treated as zero).
AddressSample gumbel_softmax_sample(const Matrix& logits, double tau, const Matrix& noise,
                                    AddressMode mode);
AddressSample gumbel_softmax_sample(const Matrix& logits, double tau, Rng& rng, AddressMode mode);

/// logits = W_s [x, h_prev] + b_s followed by gumbel_softmax_sample.
AddressSample address(const Matrix& x, const Matrix& h_prev, const Matrix& w_s, const Matrix& b_s,
                      double tau, const Matrix& noise, AddressMode mode);

/// Memory of one sequence: n_mem slots of width d_r, filled in order and then
/// overwritten at the slot last read.
struct MemoryBank {
  Matrix M;
  Index filled = 0;
  std::optional<Index> last_read;
  bool read_pending = false;  // a read happened since the last write

  MemoryBank() = default;
  MemoryBank(Index n_mem, Index d_r) : M(Matrix::Zero(n_mem, d_r)) {}

  Index slots() const { return M.rows(); }
  Index width() const { return M.cols(); }
  bool full() const { return filled == slots(); }
};

/// Reads row `row` of `sample`. Soft mode returns Σ relaxed_i M(i,:); the
/// other modes return M(hard_index,:). Records last_read.
Matrix memory_read(MemoryBank& bank, const AddressSample& sample, Index row = 0);

/// Stores `value` (already projected to d_r) into the next empty slot, or over
/// the slot last read once the bank is full. Throws ProtocolError when the
/// bank is full and no read happened since the previous write.
void memory_write(MemoryBank& bank, const Matrix& value);

/// Inference-time memory: a list of discrete slots updated in place and read
/// by reference, with argmax addressing.
class InferenceBank {
 public:
  InferenceBank() = default;
  InferenceBank(Index n_mem, Index d_r);

  /// Throws ModeError unless `mode` is argmax or straight_through.
  static InferenceBank from(const MemoryBank& bank, AddressMode mode);

  const Matrix& read(Index slot);
  void write(const Matrix& value);

  Index slots() const { return static_cast<Index>(slots_.size()); }
  Index filled() const { return filled_; }
  std::optional<Index> last_read() const { return last_read_; }
  const Matrix& slot(Index i) const { return slots_.at(static_cast<std::size_t>(i)); }

 private:
  std::vector<Matrix> slots_;  // each [1 x d_r]
  Index filled_ = 0;
  std::optional<Index> last_read_;
};

// ---------------------------------------------------------------------------
// Differentiable memory for a batch, recorded on a tape.

/// Read weights on the tape plus the sampled values they came from.
struct TapeAddress {
  Var weights;  // relaxed (soft), straight-through one-hot, or constant one-hot (argmax)
  AddressSample sample;
};

/// Builds the address on the tape so W_s and b_s receive gradients.
TapeAddress tape_address(Tape<double>& tape, const Var& x, const Var& h_prev, const Var& w_s,
                         const Var& b_s, double tau, const Matrix& noise, AddressMode mode);

/// One-hot forward value, identity backward onto `relaxed`.
Var straight_through(const Var& relaxed, const std::vector<Index>& hard_index);

struct TapeMemory {
  Var M;  // shape [B, n_mem, d_r]
  Index n_mem = 0;
  Index d_r = 0;
  Index filled = 0;
  std::vector<Index> last_read;  // one per batch row, empty before the first read
  bool read_pending = false;

  Index batch() const { return M.matrix().rows(); }
};

/// Empty memory as a tape constant.
TapeMemory tape_memory(Tape<double>& tape, Index batch, Index n_mem, Index d_r);

/// r[b] = Σ_i w[b,i] M[b,i,:] in soft mode, M[b,hard_b,:] otherwise. In
/// straight-through mode the weight gradient is the one the weighted sum would
/// receive.
Var tape_memory_read(TapeMemory& mem, const TapeAddress& addr);

/// Functional write of `value` [B x d_r]; gradient flows to the written rows.
void tape_memory_write(TapeMemory& mem, const Var& value);

}  // namespace armin
