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


#include "armin/training.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

namespace armin {

namespace {

std::vector<Tensor*> param_ptrs(Model& model) {
  std::vector<Tensor*> out;
  for (auto& [name, t] : model.parameters()) out.push_back(t);
  return out;
}

std::vector<std::string> param_names(const Model& model) {
  std::vector<std::string> out;
  for (const auto& [name, t] : model.parameters()) out.push_back(name);
  return out;
}

void check_grads(const Model& model, std::span<const Tensor> grads, long iter) {
  const auto names = param_names(model);
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!grads[k].all_finite()) {
      throw NanError("non-finite gradient for " + names[k] + " at iteration " + std::to_string(iter));
    }
  }
}

void check_params(const Model& model, long iter) {
  for (const auto& [name, t] : model.parameters()) {
    if (!t->all_finite()) {
      throw NanError("non-finite parameter " + name + " after iteration " + std::to_string(iter));
    }
  }
}

bool all_bits_correct(const Matrix& probs, const TaskSample& sample) {
  for (Index i = 0; i < probs.size(); ++i) {
    if (sample.mask.data()[i] == 0) continue;
    const double bit = probs.data()[i] >= 0.5 ? 1.0 : 0.0;
    if (bit != sample.targets.data()[i]) return false;
  }
  return true;
}

Rng stream(std::uint64_t seed, std::uint64_t id, std::uint64_t draws) {
  return Rng::restore(Rng(seed).split(id).seed(), draws);
}

constexpr std::uint64_t kInitStream = 0, kDataStream = 1, kNoiseStream = 2;

}  // namespace

AdamState AdamState::like(std::span<const Tensor* const> params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  for (const Tensor* p : params) {
    s.m.push_back(Tensor(p->shape()));
    s.v.push_back(Tensor(p->shape()));
  }
  return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                         " moment slots");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape() != grads[k].shape() || state.m[k].shape() != grads[k].shape()) {
      throw DimensionError("adam_step: gradient " + shape_string(grads[k].shape()) + " for parameter " +
                           shape_string(params[k]->shape()));
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto g = grads[k].matrix().array();
    auto m = state.m[k].matrix().array();
    auto v = state.v[k].matrix().array();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    params[k]->matrix().array() -= c.lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
  }
}

double clip_grad_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0;
  for (const Tensor& g : grads) sq += g.matrix().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor& g : grads) g.matrix() *= s;
  }
  return norm;
}

void ConvergenceTracker::push(double val_loss) {
  losses_.push_back(val_loss);
  if (losses_.size() > kWindow) losses_.erase(losses_.begin());
}

void ConvergenceTracker::restore(std::vector<double> losses) {
  if (losses.size() > kWindow) losses.erase(losses.begin(), losses.end() - kWindow);
  losses_ = std::move(losses);
}

bool solved_check(const ConvergenceTracker& tracker) {
  const auto& l = tracker.losses();
  if (l.size() < ConvergenceTracker::kWindow) return false;
  std::size_t spikes = 0;
  for (double x : l) spikes += x > ConvergenceTracker::kThreshold ? 1 : 0;
  return spikes <= ConvergenceTracker::kMaxSpikes && l.back() < ConvergenceTracker::kThreshold;
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(double(d_h), "d_h");
  if (model == ModelKind::armin) {
    positive(double(d_r), "d_r");
    positive(double(n_mem), "n_mem");
  }
  if (!(adam.lr >= 0)) throw ConfigError("lr must be non-negative");
  positive(double(iterations), "iterations");
  positive(double(val_interval), "val_interval");
  positive(double(val_samples), "val_samples");
  positive(double(batch), "batch");
  positive(double(chunk), "chunk");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must lie in (0, 1)");
  try {
    task.validate();
    schedule().validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (task.kind == TaskKind::charlm && corpus.empty()) throw ConfigError("charlm needs a corpus path");
}

GumbelConfig TrainConfig::schedule() const {
  GumbelConfig g = gumbel;
  if (g.anneal_iters <= 0) g.anneal_iters = std::max(1L, iterations / 2);
  return g;
}

std::vector<TaskSample> validation_set(const TaskSpec& task, Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TaskSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) out.push_back(generate(task, rng));
  return out;
}

ValidationResult validate(const Model& model, std::span<const TaskSample> samples) {
  if (samples.empty()) throw ParameterError("validate: no samples");
  ValidationResult r;
  for (const TaskSample& s : samples) {
    const Matrix probs = infer_sequence(model, s.inputs);
    r.loss += masked_bce(probs, s);
    r.accuracy += all_bits_correct(probs, s) ? 1.0 : 0.0;
  }
  r.loss /= double(samples.size());
  r.accuracy /= double(samples.size());
  return r;
}

ValidationResult validate(const Model& model, const TaskSpec& task, Index n, std::uint64_t seed) {
  const auto samples = validation_set(task, n, seed);
  return validate(model, samples);
}

double validate_bpc(const Model& model, std::span<const int> encoded) {
  if (encoded.size() < 2) throw DataError("validate_bpc: need at least two symbols");
  InferenceRunner runner(model, 1);
  const Index V = model.dims.d_o;
  double nll = 0;
  for (std::size_t t = 0; t + 1 < encoded.size(); ++t) {
    const Matrix z = runner.step(one_hot({encoded[t]}, model.dims.d_i));
    const double zmax = z.maxCoeff();
    const double lse = zmax + std::log((z.array() - zmax).exp().sum());
    const int y = encoded[t + 1];
    if (y < 0 || y >= V) throw IndexError("validate_bpc: symbol outside vocabulary");
    nll += lse - z(0, y);
  }
  return nll / double(encoded.size() - 1) / std::numbers::ln2;
}

void write_metrics_row(std::ostream& os, const MetricsRow& row) {
  const auto old = os.precision(10);
  os << row.iter << ',' << row.wall_time_s << ',' << row.train_loss << ',' << row.val_loss << ',' << row.tau
     << ',' << row.lr << ',' << (row.solved ? 1 : 0) << '\n';
  os.precision(old);
}

void check_finite(std::span<const std::pair<std::string, const Tensor*>> tensors, const std::string& what) {
  for (const auto& [name, t] : tensors) {
    if (!t->all_finite()) throw NanError(what + ": non-finite values in " + name);
  }
}

CharData CharData::from_bytes(std::span<const std::uint8_t> corpus, double val_fraction) {
  CharData d;
  d.vocab = Vocabulary::from(corpus);
  std::vector<int> encoded;
  encoded.reserve(corpus.size());
  for (std::uint8_t b : corpus) encoded.push_back(d.vocab.index(b));
  const auto n = encoded.size();
  const auto held = static_cast<std::size_t>(double(n) * val_fraction);
  if (held < 2 || held >= n) throw DataError("corpus too small to hold out a validation split");
  d.train.assign(encoded.begin(), encoded.end() - static_cast<std::ptrdiff_t>(held));
  d.held_out.assign(encoded.end() - static_cast<std::ptrdiff_t>(held), encoded.end());
  return d;
}

CharData CharData::load(const TrainConfig& config) {
  const auto bytes = read_bytes(config.corpus);
  return from_bytes(bytes, config.val_fraction);
}

TrainState initial_state(const TrainConfig& config, Index vocab) {
  const bool charlm = config.task.kind == TaskKind::charlm;
  if (charlm && vocab < 1) throw ConfigError("charlm model needs a vocabulary size");
  ModelDims dims{charlm ? vocab : config.task.d_i(), config.d_h, config.d_r, config.n_mem,
                 charlm ? vocab : config.task.d_o()};
  if (config.model == ModelKind::lstm) dims.d_r = dims.n_mem = 0;
  Rng init = Rng(config.seed).split(kInitStream);
  TrainState st;
  st.model = Model::make(config.model, dims, charlm ? OutputKind::logits : OutputKind::bits, init);
  std::vector<const Tensor*> ptrs;
  for (const auto& [name, t] : std::as_const(st.model).parameters()) ptrs.push_back(t);
  st.adam = AdamState::like(ptrs, config.adam);
  if (charlm) st.carry = RecurrentState::zeros(st.model, config.batch);
  return st;
}

double run_tbptt_epoch(Model& model, CharBatcher& batcher, AdamState& adam, RecurrentState& carry,
                       const TbpttOptions& options) {
  const auto params = param_ptrs(model);
  SequenceOptions seq;
  seq.mode = options.mode;
  seq.tau = options.tau;
  seq.noise.rng = options.noise;
  batcher.reset();
  double total = 0;
  const Index chunks = batcher.chunks_per_epoch();
  for (Index c = 0; c < chunks; ++c) {
    CharChunk chunk = batcher.next();
    if (chunk.epoch_start) carry = RecurrentState::zeros(model, batcher.batch());
    ChunkResult r = run_chunk(model, carry, chunk, seq);
    if (!std::isfinite(r.loss)) throw NanError("non-finite loss in TBPTT chunk " + std::to_string(c));
    check_grads(model, r.grads, adam.step);
    clip_grad_norm(r.grads, options.clip);
    adam_step(params, r.grads, adam);
    carry = std::move(r.state);
    total += r.loss / std::numbers::ln2;
  }
  return total / double(chunks);
}

TrainResult train(const TrainConfig& config, TrainHooks hooks, std::optional<TrainState> resume) {
  config.validate();
  const bool charlm = config.task.kind == TaskKind::charlm;
  std::optional<CharData> data;
  if (charlm) data = CharData::load(config);

  TrainResult result;
  const bool fresh = !resume.has_value();
  result.state = fresh ? initial_state(config, charlm ? data->vocab.size() : 0) : std::move(*resume);
  TrainState& st = result.state;
  if (!fresh) {
    const TrainState expected = initial_state(config, charlm ? data->vocab.size() : 0);
    if (st.model.kind != expected.model.kind || !(st.model.dims == expected.model.dims)) {
      throw ConfigError("resume state holds " + to_string(st.model.kind) + " " + to_string(st.model.dims) +
                        " but the config describes " + to_string(expected.model.kind) + " " +
                        to_string(expected.model.dims));
    }
  }
  st.adam.config.lr = config.adam.lr;

  Rng data_rng = stream(config.seed, kDataStream, st.data_draws);
  Rng noise_rng = stream(config.seed, kNoiseStream, st.noise_draws);
  const GumbelConfig schedule = config.schedule();

  std::vector<TaskSample> val_set;
  std::vector<int> held;
  std::optional<CharBatcher> batcher;
  if (charlm) {
    const auto n = std::min<std::size_t>(data->held_out.size(), static_cast<std::size_t>(config.val_chars));
    held.assign(data->held_out.begin(), data->held_out.begin() + static_cast<std::ptrdiff_t>(n));
    batcher.emplace(data->train, config.batch, config.chunk);
    batcher->seek(st.cursor);
  } else {
    val_set = validation_set(config.task, config.val_samples, config.val_seed);
  }

  if (fresh && hooks.metrics) *hooks.metrics << kMetricsHeader << '\n';

  const auto params = param_ptrs(st.model);
  SequenceOptions seq;
  seq.mode = schedule.mode;
  seq.noise.rng = &noise_rng;

  const auto clock_start = std::chrono::steady_clock::now();
  const double wall_before = st.wall_time_s;
  long done = 0;
  while (st.iter < config.iterations && !(st.solved && config.stop_when_solved)) {
    if (hooks.stop_after > 0 && done >= hooks.stop_after) break;
    const double tau = anneal_tau(schedule, st.iter);
    seq.tau = tau;

    double loss = 0;
    std::vector<Tensor> grads;
    if (charlm) {
      CharChunk chunk = batcher->next();
      if (chunk.epoch_start) st.carry = RecurrentState::zeros(st.model, config.batch);
      ChunkResult r = run_chunk(st.model, st.carry, chunk, seq);
      loss = r.loss / std::numbers::ln2;
      grads = std::move(r.grads);
      st.carry = std::move(r.state);
      st.cursor = batcher->cursor();
    } else {
      for (Index b = 0; b < config.batch; ++b) {
        const TaskSample sample = generate(config.task, data_rng);
        SequenceResult r = run_sequence(st.model, sample, seq);
        loss += r.loss;
        if (grads.empty()) {
          grads = std::move(r.grads);
        } else {
          for (std::size_t k = 0; k < grads.size(); ++k) grads[k].matrix() += r.grads[k].matrix();
        }
      }
      if (config.batch > 1) {
        loss /= double(config.batch);
        for (Tensor& g : grads) g.matrix() /= double(config.batch);
      }
    }
    if (!std::isfinite(loss)) throw NanError("non-finite training loss at iteration " + std::to_string(st.iter + 1));
    check_grads(st.model, grads, st.iter + 1);
    clip_grad_norm(grads, config.clip);
    adam_step(params, grads, st.adam);
    check_params(st.model, st.iter + 1);

    ++st.iter;
    ++done;
    st.loss_sum += loss;
    ++st.loss_count;
    st.data_draws = data_rng.draws();
    st.noise_draws = noise_rng.draws();
    st.wall_time_s =
        wall_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();

    if (st.iter % config.val_interval == 0 || st.iter == config.iterations) {
      MetricsRow row;
      row.iter = st.iter;
      row.train_loss = st.loss_sum / double(st.loss_count);
      row.tau = tau;
      row.lr = config.adam.lr;
      if (charlm) {
        row.val_loss = validate_bpc(st.model, held);
      } else {
        row.val_loss = validate(st.model, val_set).loss;
        st.tracker.push(row.val_loss);
        if (solved_check(st.tracker) && !st.solved) {
          st.solved = true;
          st.solved_iter = st.iter;
        }
      }
      if (!std::isfinite(row.val_loss)) {
        throw NanError("non-finite validation loss at iteration " + std::to_string(st.iter));
      }
      row.solved = st.solved;
      st.wall_time_s =
          wall_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
      row.wall_time_s = st.wall_time_s;
      st.loss_sum = 0;
      st.loss_count = 0;
      if (hooks.metrics) {
        write_metrics_row(*hooks.metrics, row);
        hooks.metrics->flush();
      }
      if (hooks.log) {
        *hooks.log << "iter " << row.iter << "  train " << row.train_loss << "  val " << row.val_loss << "  tau "
                   << row.tau << (row.solved ? "  solved" : "") << '\n';
      }
      result.rows.push_back(row);
      if (hooks.on_validation) hooks.on_validation(st, row);
    }
  }
  result.finished = st.iter >= config.iterations || (st.solved && config.stop_when_solved);
  return result;
}

}  // namespace armin
