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

#include "armin/memory.hpp"

#include <algorithm>
#include <cmath>

#include "armin/kernels.hpp"

namespace armin {

AddressMode parse_address_mode(std::string_view name) {
  if (name == "soft") return AddressMode::soft;
  if (name == "straight_through" || name == "st") return AddressMode::straight_through;
  if (name == "argmax") return AddressMode::argmax;
  throw ParameterError("unknown addressing mode '" + std::string(name) + "'");
}

std::string to_string(AddressMode mode) {
  switch (mode) {
    case AddressMode::soft:
      return "soft";
    case AddressMode::straight_through:
      return "straight_through";
    case AddressMode::argmax:
      return "argmax";
  }
  return "?";
}

void GumbelConfig::validate() const {
  if (!(tau_min > 0) || !(tau_max >= tau_min)) {
    throw ParameterError("gumbel config requires tau_max >= tau_min > 0");
  }
  if (anneal_iters <= 0) throw ParameterError("gumbel config requires anneal_iters > 0");
}

double anneal_tau(const GumbelConfig& config, long iter) {
  config.validate();
  if (iter < 0) throw ParameterError("anneal_tau: negative iteration");
  if (iter >= config.anneal_iters) return config.tau_min;
  const double lambda = std::log(config.tau_max / config.tau_min) / double(config.anneal_iters);
  return std::max(config.tau_min, config.tau_max * std::exp(-lambda * double(iter)));
}

double gumbel_from_uniform(double u) {
  u = std::clamp(u, kUniformClamp, 1.0 - kUniformClamp);
  return -std::log(-std::log(u));
}

Tensor gumbel_noise(Index k, Rng& rng) {
  if (k < 1) throw ParameterError("gumbel_noise: k must be >= 1");
  Tensor t(Shape{k});
  for (Index i = 0; i < k; ++i) t[i] = gumbel_from_uniform(rng.uniform());
  return t;
}

Matrix gumbel_noise(Index rows, Index k, Rng& rng) {
  if (k < 1 || rows < 1) throw ParameterError("gumbel_noise: empty block");
  Matrix m(rows, k);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = gumbel_from_uniform(rng.uniform());
  return m;
}

namespace {

Matrix one_hot_rows(const std::vector<Index>& idx, Index k) {
  Matrix m = Matrix::Zero(static_cast<Index>(idx.size()), k);
  for (std::size_t r = 0; r < idx.size(); ++r) m(static_cast<Index>(r), idx[r]) = 1.0;
  return m;
}

void check_tau(double tau) {
  if (!(tau > 0)) throw ParameterError("gumbel-softmax temperature must be > 0, got " + std::to_string(tau));
}

}  // namespace

AddressSample gumbel_softmax_sample(const Matrix& logits, double tau, const Matrix& noise,
                                    AddressMode mode) {
  check_tau(tau);
  AddressSample s;
  s.mode = mode;
  s.logits = logits;
  if (mode == AddressMode::argmax || noise.size() == 0) {
    s.noise = Matrix::Zero(logits.rows(), logits.cols());
  } else {
    kernels::require_same_shape(logits, noise, "gumbel_softmax_sample");
    s.noise = noise;
  }
  const Matrix perturbed = logits + s.noise;
  s.hard_index = kernels::argmax_rows(perturbed);
  if (mode == AddressMode::argmax) {
    s.relaxed = one_hot_rows(s.hard_index, logits.cols());
  } else {
    s.relaxed = kernels::softmax(Matrix(perturbed * (1.0 / tau)));
  }
  return s;
}

AddressSample gumbel_softmax_sample(const Matrix& logits, double tau, Rng& rng, AddressMode mode) {
  if (mode == AddressMode::argmax) return gumbel_softmax_sample(logits, tau, Matrix(), mode);
  return gumbel_softmax_sample(logits, tau, gumbel_noise(logits.rows(), logits.cols(), rng), mode);
}

AddressSample address(const Matrix& x, const Matrix& h_prev, const Matrix& w_s, const Matrix& b_s,
                      double tau, const Matrix& noise, AddressMode mode) {
  const Matrix logits = kernels::affine(kernels::concat_cols<double>({&x, &h_prev}), w_s, b_s);
  return gumbel_softmax_sample(logits, tau, noise, mode);
}

Matrix memory_read(MemoryBank& bank, const AddressSample& sample, Index row) {
  if (sample.relaxed.cols() != bank.slots()) {
    throw DimensionError("memory_read: address over " + std::to_string(sample.relaxed.cols()) +
                         " slots for a bank of " + std::to_string(bank.slots()));
  }
  const Index hard = sample.hard_index.at(static_cast<std::size_t>(row));
  Matrix r;
  if (sample.mode == AddressMode::soft) {
    r = sample.relaxed.row(row) * bank.M;
  } else {
    r = bank.M.row(hard);
  }
  bank.last_read = hard;
  bank.read_pending = true;
  return r;
}

void memory_write(MemoryBank& bank, const Matrix& value) {
  if (value.size() != bank.width()) {
    throw DimensionError("memory_write: value " + shape_string(value) + " for slots of width " +
                         std::to_string(bank.width()));
  }
  if (!bank.full()) {
    bank.M.row(bank.filled) = value.reshaped(1, value.size());
    ++bank.filled;
  } else {
    if (!bank.read_pending || !bank.last_read) {
      throw ProtocolError("memory_write: bank is full and no read happened this step");
    }
    bank.M.row(*bank.last_read) = value.reshaped(1, value.size());
  }
  bank.read_pending = false;
}

InferenceBank::InferenceBank(Index n_mem, Index d_r)
    : slots_(static_cast<std::size_t>(n_mem), Matrix::Zero(1, d_r)) {}

InferenceBank InferenceBank::from(const MemoryBank& bank, AddressMode mode) {
  if (mode == AddressMode::soft) {
    throw ModeError("discrete-slot memory needs argmax or straight-through addressing");
  }
  InferenceBank out(bank.slots(), bank.width());
  for (Index i = 0; i < bank.slots(); ++i) out.slots_[static_cast<std::size_t>(i)] = bank.M.row(i);
  out.filled_ = bank.filled;
  out.last_read_ = bank.last_read;
  return out;
}

const Matrix& InferenceBank::read(Index slot) {
  last_read_ = slot;
  return slots_.at(static_cast<std::size_t>(slot));
}

void InferenceBank::write(const Matrix& value) {
  Index target;
  if (filled_ < slots()) {
    target = filled_++;
  } else {
    if (!last_read_) throw ProtocolError("InferenceBank::write: full bank and nothing read");
    target = *last_read_;
  }
  slots_[static_cast<std::size_t>(target)] = value;
}

// ---------------------------------------------------------------------------

Var straight_through(const Var& relaxed, const std::vector<Index>& hard_index) {
  const Matrix& y = relaxed.matrix();
  if (static_cast<Index>(hard_index.size()) != y.rows()) {
    throw DimensionError("straight_through: one index per row required");
  }
  return relaxed.tape().record(Tensor(relaxed.shape(), one_hot_rows(hard_index, y.cols())), {relaxed},
                               [relaxed](Tape<double>& t, const Var&, const Matrix& g) {
                                 t.accumulate(relaxed, g);
                               });
}

TapeAddress tape_address(Tape<double>& tape, const Var& x, const Var& h_prev, const Var& w_s,
                         const Var& b_s, double tau, const Matrix& noise, AddressMode mode) {
  check_tau(tau);
  Var logits = ad::affine(ad::concat<double>({x, h_prev}, 1), w_s, b_s);
  TapeAddress out;
  out.sample.mode = mode;
  out.sample.logits = logits.matrix();
  if (mode == AddressMode::argmax) {
    out.sample.noise = Matrix::Zero(logits.matrix().rows(), logits.matrix().cols());
    out.sample.hard_index = kernels::argmax_rows(out.sample.logits);
    out.sample.relaxed = one_hot_rows(out.sample.hard_index, logits.matrix().cols());
    out.weights = tape.constant(out.sample.relaxed);
    return out;
  }
  kernels::require_same_shape(logits.matrix(), noise, "tape_address");
  out.sample.noise = noise;
  Var perturbed = ad::add(logits, tape.constant(noise));
  out.sample.hard_index = kernels::argmax_rows(perturbed.matrix());
  Var relaxed = ad::softmax(ad::scale(perturbed, 1.0 / tau));
  out.sample.relaxed = relaxed.matrix();
  out.weights = mode == AddressMode::soft ? relaxed : straight_through(relaxed, out.sample.hard_index);
  return out;
}

TapeMemory tape_memory(Tape<double>& tape, Index batch, Index n_mem, Index d_r) {
  TapeMemory mem;
  mem.M = tape.constant(Tensor::zeros({batch, n_mem, d_r}));
  mem.n_mem = n_mem;
  mem.d_r = d_r;
  return mem;
}

Var tape_memory_read(TapeMemory& mem, const TapeAddress& addr) {
  const Matrix& M = mem.M.matrix();
  const Matrix& w = addr.weights.matrix();
  const Index B = M.rows(), n = mem.n_mem, d = mem.d_r;
  if (w.rows() != B || w.cols() != n) {
    throw DimensionError("tape_memory_read: weights " + shape_string(w) + " for memory [" +
                         std::to_string(B) + "x" + std::to_string(n) + "x" + std::to_string(d) + "]");
  }
  const bool soft = addr.sample.mode == AddressMode::soft;
  Matrix r(B, d);
  for (Index b = 0; b < B; ++b) {
    if (soft) {
      r.row(b) = w.row(b) * M.row(b).reshaped<Eigen::RowMajor>(n, d);
    } else {
      r.row(b) = M.row(b).segment(addr.sample.hard_index[static_cast<std::size_t>(b)] * d, d);
    }
  }
  mem.last_read = addr.sample.hard_index;
  mem.read_pending = true;
  Var M_in = mem.M, w_in = addr.weights;
  return mem.M.tape().record(
      Tensor(std::move(r)), {M_in, w_in}, [M_in, w_in, n, d](Tape<double>& t, const Var&, const Matrix& g) {
        const Matrix& Mv = M_in.matrix();
        const Matrix& wv = w_in.matrix();
        if (t.requires_grad(M_in)) {
          Matrix& gM = t.grad_ref(M_in);
          for (Index b = 0; b < Mv.rows(); ++b) {
            for (Index i = 0; i < n; ++i) {
              const double wi = wv(b, i);
              if (wi != 0.0) gM.row(b).segment(i * d, d) += wi * g.row(b);
            }
          }
        }
        if (t.requires_grad(w_in)) {
          Matrix& gw = t.grad_ref(w_in);
          for (Index b = 0; b < Mv.rows(); ++b) {
            gw.row(b) += (Mv.row(b).reshaped<Eigen::RowMajor>(n, d) * g.row(b).transpose()).transpose();
          }
        }
      });
}

void tape_memory_write(TapeMemory& mem, const Var& value) {
  const Matrix& M = mem.M.matrix();
  const Matrix& v = value.matrix();
  const Index B = M.rows(), d = mem.d_r;
  if (v.rows() != B || v.cols() != d) {
    throw DimensionError("tape_memory_write: value " + shape_string(v) + " for slots of width " +
                         std::to_string(d));
  }
  std::vector<Index> target(static_cast<std::size_t>(B));
  if (mem.filled < mem.n_mem) {
    std::fill(target.begin(), target.end(), mem.filled);
    ++mem.filled;
  } else {
    if (!mem.read_pending || static_cast<Index>(mem.last_read.size()) != B) {
      throw ProtocolError("tape_memory_write: memory is full and no read happened this step");
    }
    target = mem.last_read;
  }
  mem.read_pending = false;
  Matrix next = M;
  for (Index b = 0; b < B; ++b) next.row(b).segment(target[static_cast<std::size_t>(b)] * d, d) = v.row(b);
  Var M_in = mem.M, v_in = value;
  mem.M = mem.M.tape().record(
      Tensor(mem.M.shape(), std::move(next)), {M_in, v_in},
      [M_in, v_in, target, d](Tape<double>& t, const Var&, const Matrix& g) {
        if (t.requires_grad(M_in)) {
          Matrix& gM = t.grad_ref(M_in);
          for (Index b = 0; b < g.rows(); ++b) {
            const Index at = target[static_cast<std::size_t>(b)] * d;
            gM.row(b).head(at) += g.row(b).head(at);
            const Index tail = g.cols() - at - d;
            gM.row(b).tail(tail) += g.row(b).tail(tail);
          }
        }
        if (t.requires_grad(v_in)) {
          Matrix& gv = t.grad_ref(v_in);
          for (Index b = 0; b < g.rows(); ++b) {
            gv.row(b) += g.row(b).segment(target[static_cast<std::size_t>(b)] * d, d);
          }
        }
      });
}

}  // namespace armin
