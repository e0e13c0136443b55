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

#include "armin/model.hpp"

#include <cmath>
#include <sstream>

#include "armin/ops.hpp"

namespace armin {

ModelKind parse_model_kind(std::string_view name) {
  if (name == "armin") return ModelKind::armin;
  if (name == "lstm") return ModelKind::lstm;
  throw ParameterError("unknown model '" + std::string(name) + "'");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::armin ? "armin" : "lstm"; }

std::string to_string(const ModelDims& d) {
  std::ostringstream os;
  os << "d_i=" << d.d_i << " d_h=" << d.d_h << " d_r=" << d.d_r << " n_mem=" << d.n_mem
     << " d_o=" << d.d_o;
  return os.str();
}

Model Model::make(ModelKind kind, const ModelDims& dims, OutputKind output, Rng& rng) {
  if (dims.d_i <= 0 || dims.d_h <= 0 || dims.d_o <= 0) {
    throw ParameterError("model dimensions must be positive: " + to_string(dims));
  }
  Model m;
  m.kind = kind;
  m.output = output;
  m.dims = dims;
  if (kind == ModelKind::armin) {
    m.armin = ArminParams::init({dims.d_i, dims.d_h, dims.d_r, dims.n_mem}, rng);
  } else {
    m.lstm = LstmParams::init(dims.d_i, dims.d_h, rng);
  }
  m.w_out = Tensor::zeros({dims.d_o, m.output_in()});
  fill_uniform(m.w_out, 1.0 / std::sqrt(double(m.output_in())), rng);
  m.b_out = Tensor::zeros({dims.d_o});
  return m;
}

std::vector<std::pair<std::string, Tensor*>> Model::parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  if (kind == ModelKind::armin) {
    for (auto& [name, t] : armin.tensors()) out.emplace_back("armin." + name, t);
  } else {
    for (auto& [name, t] : lstm.tensors()) out.emplace_back("lstm." + name, t);
  }
  out.emplace_back("out.w", &w_out);
  out.emplace_back("out.b", &b_out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Model::parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<Model*>(this)->parameters()) out.emplace_back(name, t);
  return out;
}

Index Model::param_count(bool include_io) const {
  Index n = kind == ModelKind::armin ? armin::param_count(armin) : armin::param_count(lstm);
  if (include_io) n += w_out.size() + b_out.size();
  return n;
}

Index model_param_count(ModelKind kind, const ModelDims& d, bool include_io) {
  Index n = kind == ModelKind::armin ? armin_param_count({d.d_i, d.d_h, d.d_r, d.n_mem})
                                     : lstm_param_count(d.d_i, d.d_h);
  const Index out_in = kind == ModelKind::armin ? d.d_h + d.d_r : d.d_h;
  if (include_io) n += d.d_o * out_in + d.d_o;
  return n;
}

RecurrentState RecurrentState::zeros(const Model& model, Index batch) {
  RecurrentState s;
  s.h = Matrix::Zero(batch, model.dims.d_h);
  if (model.kind == ModelKind::lstm) {
    s.c = Matrix::Zero(batch, model.dims.d_h);
  } else {
    s.memory = Matrix::Zero(batch, model.dims.n_mem * model.dims.d_r);
  }
  return s;
}

BoundModel bind(Tape<double>& tape, const Model& model) {
  BoundModel b;
  if (model.kind == ModelKind::armin) {
    b.armin = bind(tape, model.armin);
    b.params = {b.armin.w_ig, b.armin.b_ig, b.armin.w_go, b.armin.b_go};
    if (b.armin.w_s) b.params.push_back(*b.armin.w_s);
    if (b.armin.b_s) b.params.push_back(*b.armin.b_s);
    if (b.armin.w_m) b.params.push_back(*b.armin.w_m);
  } else {
    b.lstm = bind(tape, model.lstm);
    b.params = {b.lstm.w, b.lstm.b};
  }
  b.w_out = tape.variable(model.w_out);
  b.b_out = tape.variable(model.b_out);
  b.params.push_back(b.w_out);
  b.params.push_back(b.b_out);
  return b;
}

TapeState bind_state(Tape<double>& tape, const Model& model, const RecurrentState& state) {
  TapeState s;
  s.h = tape.constant(state.h);
  if (model.kind == ModelKind::lstm) {
    s.c = tape.constant(state.c);
  } else {
    const Index B = state.h.rows();
    s.memory.M = tape.constant(Tensor({B, model.dims.n_mem, model.dims.d_r}, state.memory));
    s.memory.n_mem = model.dims.n_mem;
    s.memory.d_r = model.dims.d_r;
    s.memory.filled = state.filled;
    s.memory.last_read = state.last_read;
    s.memory.read_pending = state.read_pending;
  }
  return s;
}

RecurrentState detach(const TapeState& state) {
  RecurrentState s;
  s.h = state.h.matrix();
  if (state.c.valid()) s.c = state.c.matrix();
  if (state.memory.M.valid()) {
    s.memory = state.memory.M.matrix();
    s.filled = state.memory.filled;
    s.last_read = state.memory.last_read;
    s.read_pending = state.memory.read_pending;
  }
  return s;
}

TapeState detach_on_tape(const TapeState& state) {
  TapeState s = state;
  s.h = ad::detach(state.h);
  if (state.c.valid()) s.c = ad::detach(state.c);
  if (state.memory.M.valid()) s.memory.M = ad::detach(state.memory.M);
  return s;
}

Matrix NoiseSource::next(Index step, Index rows, Index k) const {
  if (frozen) {
    const Matrix& m = frozen->at(static_cast<std::size_t>(step));
    if (m.rows() != rows || m.cols() != k) {
      throw DimensionError("frozen noise block " + shape_string(m) + " at step " +
                           std::to_string(step) + ", expected [" + std::to_string(rows) + "x" +
                           std::to_string(k) + "]");
    }
    return m;
  }
  if (rng) return gumbel_noise(rows, k, *rng);
  return Matrix::Zero(rows, k);
}

Var model_step(const Model& model, const BoundModel& bound, TapeState& state, const Var& x,
               const StepOptions& options, const Matrix& noise, AddressSample* address_out) {
  Tape<double>& tape = x.tape();
  TapeOps<double> ops{tape};
  if (model.kind == ModelKind::lstm) {
    auto out = lstm_cell_forward(ops, x, state.h, state.c, bound.lstm);
    state.h = out.h_new;
    state.c = out.c_new;
    return ad::affine(out.h_new, bound.w_out, bound.b_out);
  }
  TapeAddress addr = tape_address(tape, x, state.h, *bound.armin.w_s, *bound.armin.b_s, options.tau,
                                  noise, options.mode);
  Var r = tape_memory_read(state.memory, addr);
  auto out = armin_cell_forward(ops, x, state.h, r, bound.armin);
  Var slot = bound.armin.w_m ? ad::linear(out.h_new, *bound.armin.w_m) : out.h_new;
  tape_memory_write(state.memory, slot);
  state.h = out.h_new;
  if (address_out) *address_out = std::move(addr.sample);
  return ad::affine(out.o, bound.w_out, bound.b_out);
}

namespace {

void check_input_width(const Model& model, Index width) {
  if (width != model.dims.d_i) {
    throw ConfigError("input width " + std::to_string(width) + " does not match model d_i=" +
                      std::to_string(model.dims.d_i));
  }
}

}  // namespace

SequenceResult run_sequence(const Model& model, const TaskSample& sample, const SequenceOptions& options) {
  check_input_width(model, sample.inputs.cols());
  if (sample.targets.cols() != model.dims.d_o) {
    throw ConfigError("target width " + std::to_string(sample.targets.cols()) +
                      " does not match model d_o=" + std::to_string(model.dims.d_o));
  }
  Tape<double> tape;
  BoundModel bound = bind(tape, model);
  TapeState state = bind_state(tape, model, RecurrentState::zeros(model, 1));
  const StepOptions step{options.mode, options.tau};
  const bool noisy = model.kind == ModelKind::armin && options.mode != AddressMode::argmax;

  SequenceResult result;
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(sample.steps()));
  for (Index t = 0; t < sample.steps(); ++t) {
    Var x = tape.constant(Matrix(sample.inputs.row(t)));
    Matrix noise = noisy ? options.noise.next(t, 1, model.dims.n_mem) : Matrix();
    AddressSample addr;
    outs.push_back(model_step(model, bound, state, x, step, noise, &addr));
    if (model.kind == ModelKind::armin) result.addresses.push_back(std::move(addr));
  }
  Var probs = ad::sigmoid(ad::concat(outs, 0));
  Var loss = ad::bce_loss(probs, sample.targets, sample.mask);
  result.loss = loss.value().item();
  result.outputs = probs.matrix();
  if (options.compute_grads) {
    tape.backward(loss);
    result.grads.reserve(bound.params.size());
    for (const Var& p : bound.params) result.grads.push_back(tape.grad(p));
  }
  result.peak_bytes = tape.peak_bytes();
  return result;
}

Var chunk_loss(Tape<double>& tape, const Model& model, const BoundModel& bound, TapeState& state,
               const CharChunk& chunk, const SequenceOptions& options) {
  const StepOptions step{options.mode, options.tau};
  const bool noisy = model.kind == ModelKind::armin && options.mode != AddressMode::argmax;
  std::vector<Var> outs;
  std::vector<int> targets;
  for (Index t = 0; t < chunk.steps(); ++t) {
    const auto& ids = chunk.inputs[static_cast<std::size_t>(t)];
    Var x = tape.constant(one_hot(ids, model.dims.d_i));
    const Index B = static_cast<Index>(ids.size());
    Matrix noise = noisy ? options.noise.next(t, B, model.dims.n_mem) : Matrix();
    outs.push_back(model_step(model, bound, state, x, step, noise));
    const auto& ys = chunk.targets[static_cast<std::size_t>(t)];
    targets.insert(targets.end(), ys.begin(), ys.end());
  }
  return ad::ce_loss(ad::concat(outs, 0), std::span<const int>(targets), ad::LogBase::natural);
}

ChunkResult run_chunk(const Model& model, const RecurrentState& carry, const CharChunk& chunk,
                      const SequenceOptions& options) {
  Tape<double> tape;
  BoundModel bound = bind(tape, model);
  TapeState state = bind_state(tape, model, carry);
  Var loss = chunk_loss(tape, model, bound, state, chunk, options);
  ChunkResult result;
  result.loss = loss.value().item();
  if (options.compute_grads) {
    tape.backward(loss);
    for (const Var& p : bound.params) result.grads.push_back(tape.grad(p));
  }
  result.state = detach(state);
  result.peak_bytes = tape.peak_bytes();
  return result;
}

// ---------------------------------------------------------------------------

InferenceRunner::InferenceRunner(const Model& model, Index batch)
    : model_(model),
      batch_(batch),
      w_out_(model.w_out.matrix()),
      b_out_(model.b_out.matrix()) {
  if (model.kind == ModelKind::armin) {
    armin_ = values(model.armin);
  } else {
    lstm_ = values(model.lstm);
  }
  reset();
}

void InferenceRunner::reset() {
  h_ = Matrix::Zero(batch_, model_.dims.d_h);
  if (model_.kind == ModelKind::lstm) {
    c_ = Matrix::Zero(batch_, model_.dims.d_h);
  } else {
    banks_.assign(static_cast<std::size_t>(batch_), InferenceBank(model_.dims.n_mem, model_.dims.d_r));
  }
  last_address_.clear();
}

Matrix InferenceRunner::step(const Matrix& x) {
  check_input_width(model_, x.cols());
  ValueOps<double> ops;
  if (model_.kind == ModelKind::lstm) {
    auto out = lstm_cell_forward(ops, x, h_, c_, lstm_);
    h_ = std::move(out.h_new);
    c_ = std::move(out.c_new);
    return kernels::affine(h_, w_out_, b_out_);
  }
  const Matrix logits = kernels::affine(kernels::concat_cols<double>({&x, &h_}), *armin_.w_s, *armin_.b_s);
  last_address_ = kernels::argmax_rows(logits);
  Matrix r(batch_, model_.dims.d_r);
  for (Index b = 0; b < batch_; ++b) {
    r.row(b) = banks_[static_cast<std::size_t>(b)].read(last_address_[static_cast<std::size_t>(b)]);
  }
  auto out = armin_cell_forward(ops, x, h_, r, armin_);
  const Matrix slot = armin_.w_m ? kernels::linear(out.h_new, *armin_.w_m) : out.h_new;
  for (Index b = 0; b < batch_; ++b) banks_[static_cast<std::size_t>(b)].write(slot.row(b));
  h_ = std::move(out.h_new);
  return kernels::affine(out.o, w_out_, b_out_);
}

RecurrentState InferenceRunner::state() const {
  RecurrentState s;
  s.h = h_;
  if (model_.kind == ModelKind::lstm) {
    s.c = c_;
    return s;
  }
  const Index n = model_.dims.n_mem, d = model_.dims.d_r;
  s.memory = Matrix::Zero(batch_, n * d);
  for (Index b = 0; b < batch_; ++b) {
    const auto& bank = banks_[static_cast<std::size_t>(b)];
    for (Index i = 0; i < n; ++i) s.memory.row(b).segment(i * d, d) = bank.slot(i);
    if (bank.last_read()) s.last_read.push_back(*bank.last_read());
  }
  s.filled = banks_.empty() ? 0 : banks_.front().filled();
  return s;
}

void InferenceRunner::set_state(const RecurrentState& s) {
  h_ = s.h;
  if (model_.kind == ModelKind::lstm) {
    c_ = s.c;
    return;
  }
  const Index n = model_.dims.n_mem, d = model_.dims.d_r;
  for (Index b = 0; b < batch_; ++b) {
    MemoryBank bank(n, d);
    bank.M = s.memory.row(b).reshaped<Eigen::RowMajor>(n, d);
    bank.filled = s.filled;
    if (static_cast<Index>(s.last_read.size()) == batch_) bank.last_read = s.last_read[static_cast<std::size_t>(b)];
    banks_[static_cast<std::size_t>(b)] = InferenceBank::from(bank, AddressMode::argmax);
  }
}

Matrix infer_sequence(const Model& model, const Matrix& inputs) {
  InferenceRunner runner(model, 1);
  Matrix probs(inputs.rows(), model.dims.d_o);
  for (Index t = 0; t < inputs.rows(); ++t) {
    probs.row(t) = kernels::sigmoid(runner.step(Matrix(inputs.row(t))));
  }
  return probs;
}

double masked_bce(const Matrix& probs, const TaskSample& sample) {
  kernels::require_same_shape(probs, sample.targets, "masked_bce");
  const double denom = sample.mask.sum();
  if (denom <= 0) throw ContractError("empty loss mask");
  double total = 0;
  for (Index i = 0; i < probs.size(); ++i) {
    const double m = sample.mask.data()[i];
    if (m == 0) continue;
    const double q = std::clamp(probs.data()[i], ad::kLogClamp, 1.0 - ad::kLogClamp);
    const double y = sample.targets.data()[i];
    total -= m * (y * std::log(q) + (1 - y) * std::log(1 - q));
  }
  return total / denom;
}

}  // namespace armin
