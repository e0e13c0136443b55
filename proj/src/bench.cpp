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


#include "armin/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <tuple>

#include "armin/training.hpp"

namespace armin {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<CharChunk> synthetic_chunks(const BenchConfig& c, std::size_t count) {
  Rng rng(c.seed);
  std::vector<int> symbols(static_cast<std::size_t>(c.batch * c.chunk * Index(count) + c.batch + 1));
  for (int& s : symbols) s = static_cast<int>(rng.uniform_int(0, c.vocab - 1));
  CharBatcher batcher(std::move(symbols), c.batch, c.chunk);
  std::vector<CharChunk> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(batcher.next());
  return out;
}

std::size_t matrix_bytes(const Matrix& m) { return static_cast<std::size_t>(m.size()) * sizeof(double); }

/// Runs chunks until `seconds` have elapsed; returns time steps processed per second.
template <typename Step>
double timed(double seconds, Index steps_per_call, Step&& step) {
  const auto start = Clock::now();
  long calls = 0;
  double elapsed = 0;
  do {
    step(calls);
    ++calls;
    elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  } while (elapsed < seconds);
  return double(calls * steps_per_call) / elapsed;
}

}  // namespace

BenchMode parse_bench_mode(std::string_view name) {
  if (name == "train_soft") return BenchMode::train_soft;
  if (name == "train_st") return BenchMode::train_st;
  if (name == "infer_soft") return BenchMode::infer_soft;
  if (name == "infer_argmax") return BenchMode::infer_argmax;
  throw ParameterError("unknown bench mode '" + std::string(name) + "'");
}

std::string to_string(BenchMode mode) {
  switch (mode) {
    case BenchMode::train_soft:
      return "train_soft";
    case BenchMode::train_st:
      return "train_st";
    case BenchMode::infer_soft:
      return "infer_soft";
    case BenchMode::infer_argmax:
      return "infer_argmax";
  }
  return "?";
}

ModelDims BenchConfig::dims() const {
  if (model == ModelKind::lstm) return {vocab, d_h, 0, 0, vocab};
  return {vocab, d_h, d_r, n_mem, vocab};
}

Index BenchConfig::params() const { return model_param_count(model, dims()); }

BenchRow bench_throughput(const BenchConfig& c) {
  if (c.duration_s < 1.0) throw ParameterError("bench duration must be at least 1 s");
  if (c.repeats < 1) throw ParameterError("bench needs at least one repeat");
  Rng init(c.seed);
  Model model = Model::make(c.model, c.dims(), OutputKind::logits, init);
  const auto chunks = synthetic_chunks(c, 8);
  const bool training = c.mode == BenchMode::train_soft || c.mode == BenchMode::train_st;

  BenchRow row{to_string(c.model), to_string(c.mode), c.d_h, c.model == ModelKind::armin ? c.d_r : 0,
               c.model == ModelKind::armin ? c.n_mem : 0, c.chunk, c.batch, model.param_count(), 0, 0, 0};

  std::function<void(long)> step;
  std::vector<Tensor*> params;
  for (auto& [name, t] : model.parameters()) params.push_back(t);
  std::vector<const Tensor*> cparams(params.begin(), params.end());
  AdamState adam = AdamState::like(cparams, AdamConfig{});
  RecurrentState carry = RecurrentState::zeros(model, c.batch);
  Rng noise(c.seed + 1);
  SequenceOptions seq;
  seq.mode = (c.mode == BenchMode::train_st) ? AddressMode::straight_through : AddressMode::soft;
  seq.tau = 0.5;
  seq.noise.rng = &noise;
  seq.compute_grads = training;
  std::size_t peak = 0;
  InferenceRunner runner(model, c.batch);
  std::vector<Matrix> argmax_inputs;

  if (c.mode == BenchMode::infer_argmax) {
    for (const CharChunk& ch : chunks) {
      for (const auto& ids : ch.inputs) argmax_inputs.push_back(one_hot(ids, c.vocab));
    }
    step = [&](long call) {
      const std::size_t base = static_cast<std::size_t>(call % long(chunks.size())) * std::size_t(c.chunk);
      for (Index t = 0; t < c.chunk; ++t) runner.step(argmax_inputs[base + std::size_t(t)]);
    };
    std::size_t bytes = 0;
    for (const Tensor* p : cparams) bytes += static_cast<std::size_t>(p->size()) * sizeof(double);
    const RecurrentState s = RecurrentState::zeros(model, c.batch);
    bytes += matrix_bytes(s.h) + matrix_bytes(s.c) + matrix_bytes(s.memory);
    peak = bytes;
  } else {
    step = [&](long call) {
      const CharChunk& ch = chunks[static_cast<std::size_t>(call % long(chunks.size()))];
      ChunkResult r = run_chunk(model, carry, ch, seq);
      peak = std::max(peak, r.peak_bytes);
      if (training) {
        clip_grad_norm(r.grads, 10.0);
        adam_step(params, r.grads, adam);
      }
      carry = std::move(r.state);
    };
  }

  timed(c.warmup_s, c.chunk, step);
  std::vector<double> rates;
  for (int k = 0; k < c.repeats; ++k) rates.push_back(timed(c.duration_s, c.chunk, step));
  std::sort(rates.begin(), rates.end());
  row.steps_per_s = rates[rates.size() / 2];
  row.chars_per_s = row.steps_per_s * double(c.batch);
  row.peak_alloc_bytes = peak;
  return row;
}

void check_budget(Index budget, const BenchConfig& c) {
  const Index n = c.params();
  if (std::abs(double(n) - double(budget)) > 0.05 * double(budget)) {
    throw ConfigError(to_string(c.model) + " d_h=" + std::to_string(c.d_h) + " has " + std::to_string(n) +
                      " parameters, outside the budget " + std::to_string(budget) + " +/- 5%");
  }
}

std::vector<BenchRow> bench_matched(Index budget, const std::vector<BenchConfig>& configs) {
  for (const auto& c : configs) check_budget(budget, c);
  std::vector<BenchRow> rows;
  for (const auto& c : configs) rows.push_back(bench_throughput(c));
  return rows;
}

void write_bench_csv(std::ostream& os, std::vector<BenchRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.model, a.mode) < std::tie(b.model, b.mode);
  });
  os << kBenchHeader << '\n';
  const auto old = os.precision(8);
  for (const auto& r : rows) {
    os << r.model << ',' << r.mode << ',' << r.d_h << ',' << r.d_r << ',' << r.n_mem << ',' << r.chunk << ','
       << r.batch << ',' << r.params << ',' << r.steps_per_s << ',' << r.chars_per_s << ',' << r.peak_alloc_bytes
       << '\n';
  }
  os.precision(old);
}

}  // namespace armin
