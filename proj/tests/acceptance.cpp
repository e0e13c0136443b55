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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `armin_acceptance 4 9` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "armin/checkpoint.hpp"
#include "armin/diagnostics.hpp"
#include "armin/training.hpp"

namespace fs = std::filesystem;
using namespace armin;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

void randomize(Model& m, Rng& rng, double scale) {
  for (auto& [name, t] : m.parameters()) {
    for (Index i = 0; i < t->size(); ++i) (*t)[i] = rng.uniform(-scale, scale);
  }
}

// 1 -------------------------------------------------------------------------

Outcome gradient_soundness() {
  const auto t0 = Clock::now();
  double armin_max = 0, lstm_max = 0;
  std::string worst;
  for (std::uint64_t seed : {1, 2, 3}) {
    GradcheckSetup a;
    a.seed = seed;
    const GradcheckReport ra = gradcheck_model(a);
    for (const auto& t : ra.tensors) {
      if (t.max_error > armin_max) {
        armin_max = t.max_error;
        worst = t.name;
      }
    }
    GradcheckSetup l = a;
    l.kind = ModelKind::lstm;
    l.dims.d_r = l.dims.n_mem = 0;
    lstm_max = std::max(lstm_max, gradcheck_model(l).max_error);
  }
  const double secs = seconds_since(t0);
  return {armin_max < 1e-4 && lstm_max < 1e-5 && secs < 60,
          "ARMIN max " + fmt(armin_max) + " (" + worst + "), LSTM max " + fmt(lstm_max) + ", seeds 1-3, " +
              fmt(secs, 3) + " s"};
}

// 2 -------------------------------------------------------------------------

Outcome parameter_accounting() {
  const TaskSpec copy = TaskSpec::named("copy");
  const Index a = model_param_count(ModelKind::armin, {copy.d_i(), 100, 32, 50, copy.d_o()});
  const Index l = model_param_count(ModelKind::lstm, {copy.d_i(), 300, 0, 0, copy.d_o()});
  Rng rng(1);
  const Index built = Model::make(ModelKind::armin, {copy.d_i(), 100, 32, 50, copy.d_o()}, OutputKind::bits, rng)
                          .param_count();
  const bool ok = std::abs(double(a) - 90000) <= 0.05 * 90000 && std::abs(double(l) - 376000) <= 0.05 * 376000 &&
                  built == a;
  return {ok, "ARMIN " + std::to_string(a) + " vs 90000, LSTM " + std::to_string(l) + " vs 376000"};
}

// 3 -------------------------------------------------------------------------

Outcome initial_loss() {
  const auto t0 = Clock::now();
  double lo = 1e9, hi = -1e9;
  for (const char* task : {"copy", "repeat_copy", "assoc_recall", "priority_sort"}) {
    for (ModelKind kind : {ModelKind::armin, ModelKind::lstm}) {
      for (std::uint64_t seed : {1, 2, 3}) {
        TrainConfig cfg;
        cfg.task = TaskSpec::named(task);
        cfg.model = kind;
        cfg.seed = seed;
        const TrainState st = initial_state(cfg);
        const double loss = validate(st.model, cfg.task, 64, cfg.val_seed).loss;
        lo = std::min(lo, loss);
        hi = std::max(hi, loss);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {lo >= 0.64 && hi <= 0.76 && secs < 60,
          "val BCE range [" + fmt(lo) + ", " + fmt(hi) + "] over 4 tasks x 2 models x 3 seeds, " + fmt(secs, 3) +
              " s"};
}

// 4 -------------------------------------------------------------------------

TrainConfig copy_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.task = TaskSpec::named("copy");
  cfg.task.length = {1, 10};
  cfg.d_h = 64;
  cfg.d_r = 32;
  cfg.n_mem = 16;
  cfg.gumbel.mode = AddressMode::straight_through;
  cfg.batch = 1;
  cfg.iterations = 30000;
  cfg.adam.lr = 1.5e-3;
  cfg.clip = 1.0;
  cfg.seed = seed;
  return cfg;
}

Outcome copy_convergence() {
  const auto t0 = Clock::now();
  std::vector<double> iters;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const TrainResult r = train(copy_config(seed));
    iters.push_back(r.state.solved ? double(r.state.solved_iter) : INFINITY);
    per_seed += (per_seed.empty() ? "" : ", ") +
                (r.state.solved ? std::to_string(r.state.solved_iter) : std::string("unsolved"));
  }
  const double med = median3(iters);

  // The LSTM baseline at matched size only has to run.
  TrainConfig lstm = copy_config(1);
  lstm.model = ModelKind::lstm;
  const Index target = model_param_count(ModelKind::armin, {8, 64, 32, 16, 6});
  Index best = 1;
  for (Index d = 1; d < 400; ++d) {
    if (std::abs(model_param_count(ModelKind::lstm, {8, d, 0, 0, 6}) - target) <
        std::abs(model_param_count(ModelKind::lstm, {8, best, 0, 0, 6}) - target)) {
      best = d;
    }
  }
  lstm.d_h = best;
  lstm.iterations = 500;
  const TrainResult lr = train(lstm);
  const bool lstm_ok = std::isfinite(lr.rows.back().val_loss);

  return {med <= 30000 && lstm_ok,
          "solved at " + per_seed + " (median " + (std::isfinite(med) ? fmt(med, 6) : std::string("none")) +
              "); LSTM d_h=" + std::to_string(best) + " (" +
              std::to_string(model_param_count(ModelKind::lstm, {8, best, 0, 0, 6})) + " vs " +
              std::to_string(target) + " params) ran 500 iters, val " + fmt(lr.rows.back().val_loss) + "; " +
              fmt(seconds_since(t0), 4) + " s"};
}

// 5 -------------------------------------------------------------------------

Outcome associative_recall() {
  const auto t0 = Clock::now();
  std::vector<double> reached;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig cfg;
    cfg.task = TaskSpec::named("assoc_recall");
    cfg.task.pairs = {2, 4};
    cfg.d_h = 64;
    cfg.d_r = 32;
    cfg.n_mem = 16;
    cfg.iterations = 40000;
    cfg.adam.lr = 2e-3;
    cfg.clip = 10.0;
    cfg.seed = seed;
    cfg.stop_when_solved = false;
    std::optional<long> hit;
    double best = INFINITY;
    TrainHooks hooks;
    hooks.on_validation = [&](const TrainState&, const MetricsRow& row) {
      best = std::min(best, row.val_loss);
      if (!hit && row.val_loss < 0.05) hit = row.iter;
    };
    hooks.stop_after = 0;
    // Stop at the first validation under the threshold.
    TrainResult r;
    std::optional<TrainState> state;
    while (true) {
      hooks.stop_after = cfg.val_interval;
      r = train(cfg, hooks, std::move(state));
      if (hit || r.finished) break;
      state = std::move(r.state);
    }
    reached.push_back(hit ? double(*hit) : INFINITY);
    per_seed += (per_seed.empty() ? "" : ", ") + (hit ? std::to_string(*hit) : "best " + fmt(best));
  }
  const double med = median3(reached);
  return {med <= 40000, "val BCE < 0.05 reached: " + per_seed + "; " + fmt(seconds_since(t0), 4) + " s"};
}

// 6 -------------------------------------------------------------------------

Outcome addressing_equivalence() {
  Rng rng(42);
  const TaskSpec copy = TaskSpec::named("copy");
  Model m = Model::make(ModelKind::armin, {copy.d_i(), 16, 8, 5, copy.d_o()}, OutputKind::bits, rng);
  randomize(m, rng, 1.0);
  TaskSample s;
  s.inputs = Matrix(50, copy.d_i());
  for (Index i = 0; i < s.inputs.size(); ++i) s.inputs.data()[i] = rng.bit() ? 1.0 : 0.0;
  s.targets = Matrix::Zero(50, copy.d_o());
  s.mask = Matrix::Ones(50, copy.d_o());

  SequenceOptions o;
  o.mode = AddressMode::straight_through;
  o.tau = 0.5;
  o.compute_grads = false;
  const SequenceResult train_fwd = run_sequence(m, s, o);
  const Matrix infer = infer_sequence(m, s.inputs);

  std::set<Index> slots;
  for (const auto& a : train_fwd.addresses) slots.insert(a.hard_index[0]);
  const bool bitwise = train_fwd.outputs.rows() == 50 &&
                       std::memcmp(train_fwd.outputs.data(), infer.data(), sizeof(double) * std::size_t(infer.size())) == 0;
  return {bitwise, std::string(bitwise ? "identical" : "different") + " outputs over 50 steps, " +
                       std::to_string(slots.size()) + " distinct slots addressed"};
}

// 7 -------------------------------------------------------------------------

CharChunk chunk_from(const std::vector<int>& ids, Index begin, Index steps) {
  CharChunk c;
  for (Index t = 0; t < steps; ++t) {
    c.inputs.push_back({ids[std::size_t(begin + t)]});
    c.targets.push_back({ids[std::size_t(begin + t + 1)]});
  }
  return c;
}

Outcome tbptt_contracts() {
  const Index V = 6, T = 12;
  Rng rng(7);
  Model m = Model::make(ModelKind::armin, {V, 8, 4, 3, V}, OutputKind::logits, rng);
  randomize(m, rng, 0.5);
  std::vector<int> ids;
  for (Index i = 0; i < 2 * T + 1; ++i) ids.push_back(int(rng.uniform_int(0, V - 1)));
  SequenceOptions o;
  o.mode = AddressMode::soft;
  o.tau = 0.8;

  // (a) gradients of a chunk loss reaching the previous chunk.
  Tape<double> tape;
  BoundModel bound = bind(tape, m);
  TapeState state = bind_state(tape, m, RecurrentState::zeros(m, 1));
  chunk_loss(tape, m, bound, state, chunk_from(ids, 0, T), o);
  const TapeState boundary = state;
  TapeState carried = detach_on_tape(state);
  Var loss2 = chunk_loss(tape, m, bound, carried, chunk_from(ids, T, T), o);
  tape.backward(loss2);
  const double leak = std::max(tape.grad(boundary.h).matrix().cwiseAbs().maxCoeff(),
                               tape.grad(boundary.memory.M).matrix().cwiseAbs().maxCoeff());
  const ChunkResult alone = run_chunk(m, detach(boundary), chunk_from(ids, T, T), o);
  bool same = loss2.value().item() == alone.loss;
  for (std::size_t k = 0; k < bound.params.size(); ++k) {
    same = same && tape.grad(bound.params[k]).matrix() == alone.grads[k].matrix();
  }

  // (b) one chunk of length T against whole-sequence BPTT with per-step losses.
  const ChunkResult tb = run_chunk(m, RecurrentState::zeros(m, 1), chunk_from(ids, 0, T), o);
  Tape<double> whole;
  BoundModel wb = bind(whole, m);
  TapeState ws = bind_state(whole, m, RecurrentState::zeros(m, 1));
  Var total = whole.constant(Tensor::scalar(0.0));
  for (Index t = 0; t < T; ++t) {
    Var x = whole.constant(one_hot({ids[std::size_t(t)]}, V));
    Var logits = model_step(m, wb, ws, x, {AddressMode::soft, 0.8}, Matrix::Zero(1, 3));
    const int y = ids[std::size_t(t + 1)];
    total = ad::add(total, ad::ce_loss(logits, std::span<const int>(&y, 1), ad::LogBase::natural));
  }
  Var mean = ad::scale(total, 1.0 / double(T));
  whole.backward(mean);
  double diff = std::abs(mean.value().item() - tb.loss);
  for (std::size_t k = 0; k < wb.params.size(); ++k) {
    diff = std::max(diff, (whole.grad(wb.params[k]).matrix() - tb.grads[k].matrix()).cwiseAbs().maxCoeff());
  }

  return {leak == 0.0 && same && diff <= 1e-12,
          "(a) boundary gradient max " + fmt(leak) + ", detached chunk " + (same ? "matches" : "differs") +
              " a fresh start; (b) max |TBPTT - BPTT| " + fmt(diff) + " at T=12"};
}

// 8 -------------------------------------------------------------------------

AddressSample one_hot_sample(Index n, Index i) {
  AddressSample s;
  s.logits = Matrix::Zero(1, n);
  s.noise = Matrix::Zero(1, n);
  s.relaxed = Matrix::Zero(1, n);
  s.relaxed(0, i) = 1.0;
  s.hard_index = {i};
  s.mode = AddressMode::straight_through;
  return s;
}

Outcome memory_oracle() {
  Rng rng(8);
  int events = 0, mismatches = 0, protocol = 0, overwrites = 0;
  for (int run = 0; run < 10; ++run) {
    const Index n = 6, d = 3;
    MemoryBank bank(n, d);
    std::vector<std::vector<double>> sim;
    std::optional<std::size_t> last;
    bool pending = false;
    for (int e = 0; e < 200; ++e, ++events) {
      if (rng.uniform() < 0.5) {
        const Index i = rng.uniform_int(0, n - 1);
        const Matrix r = memory_read(bank, one_hot_sample(n, i));
        std::vector<double> want(d, 0.0);
        if (std::size_t(i) < sim.size()) want = sim[std::size_t(i)];
        for (Index c = 0; c < d; ++c) mismatches += r(0, c) != want[std::size_t(c)];
        last = std::size_t(i);
        pending = true;
      } else {
        Matrix v(1, d);
        for (Index c = 0; c < d; ++c) v(0, c) = rng.uniform(-1, 1);
        const std::vector<double> vec(v.data(), v.data() + d);
        if (sim.size() < std::size_t(n)) {
          memory_write(bank, v);
          sim.push_back(vec);
          pending = false;
        } else if (!pending) {
          try {
            memory_write(bank, v);
            ++mismatches;
          } catch (const ProtocolError&) {
            ++protocol;
          }
        } else {
          memory_write(bank, v);
          sim[*last] = vec;
          pending = false;
          ++overwrites;
        }
      }
      mismatches += bank.filled != Index(sim.size());
      for (std::size_t i = 0; i < std::size_t(n); ++i) {
        for (Index c = 0; c < d; ++c) {
          const double want = i < sim.size() ? sim[i][std::size_t(c)] : 0.0;
          mismatches += bank.M(Index(i), c) != want;
        }
      }
    }
  }
  return {mismatches == 0, std::to_string(events) + " events in 10 runs, " + std::to_string(overwrites) +
                               " overwrites, " + std::to_string(protocol) + " rejected writes, " +
                               std::to_string(mismatches) + " mismatches"};
}

// 9 -------------------------------------------------------------------------

std::optional<std::string> corpus_path(std::string& note) {
  if (const char* env = std::getenv("ARMIN_CORPUS"); env && *env) {
    note = env;
    return std::string(env);
  }
  const fs::path dir = "/usr/share/common-licenses";
  if (!fs::is_directory(dir)) return std::nullopt;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && !e.is_symlink()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  const fs::path out = fs::temp_directory_path() / "armin_acceptance_corpus.txt";
  std::ofstream os(out, std::ios::binary);
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    os << in.rdbuf();
  }
  note = std::to_string(files.size()) + " files from " + dir.string();
  return out.string();
}

Outcome charlm_smoke() {
  const auto t0 = Clock::now();
  std::string note;
  const auto path = corpus_path(note);
  if (!path) return {false, "no corpus: set ARMIN_CORPUS to a text file of at least 200 kB"};
  const auto size = fs::file_size(*path);
  if (size < 200'000) return {false, "corpus " + *path + " has only " + std::to_string(size) + " bytes"};

  TrainConfig cfg;
  cfg.task = TaskSpec::named("charlm");
  cfg.corpus = *path;
  cfg.d_h = 128;
  cfg.d_r = 64;
  cfg.n_mem = 16;
  cfg.chunk = 50;
  cfg.batch = 1;
  cfg.iterations = 2000;
  cfg.val_interval = 2000;
  cfg.adam.lr = 2e-3;
  cfg.clip = 1.0;
  const CharData data = CharData::load(cfg);
  const double uniform = std::log2(double(data.vocab.size()));
  const double initial = validate_bpc(initial_state(cfg, data.vocab.size()).model,
                                      std::span<const int>(data.held_out).first(
                                          std::min<std::size_t>(data.held_out.size(), std::size_t(cfg.val_chars))));
  const TrainResult r = train(cfg);
  const double bpc = r.rows.back().val_loss;
  return {bpc <= uniform - 1.0, "corpus " + std::to_string(size) + " bytes (" + note + "), V=" +
                                    std::to_string(data.vocab.size()) + ", uniform " + fmt(uniform) +
                                    " bits, untrained " + fmt(initial) + ", after 2000 iters " + fmt(bpc) +
                                    " bits; " + fmt(seconds_since(t0), 4) + " s"};
}

// 10 ------------------------------------------------------------------------

std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    out += line.substr(0, a) + line.substr(b) + '\n';
  }
  return out;
}

Outcome determinism() {
  TrainConfig cfg = copy_config(5);
  cfg.iterations = 2000;
  cfg.val_interval = 250;
  std::ostringstream a, b, c;
  const TrainResult ra = train(cfg, {&a});
  train(cfg, {&b});
  const bool csv_same = strip_wall_time(a.str()) == strip_wall_time(b.str());

  // Pause half way, round-trip through a checkpoint file and continue.
  TrainHooks first{&c};
  first.stop_after = 1000;
  const TrainResult part = train(cfg, first);
  const fs::path file = fs::temp_directory_path() / "armin_acceptance.ckpt";
  const auto tensors = train_state_tensors(part.state);
  save_checkpoint(file.string(), tensors);
  const auto loaded = load_checkpoint(file.string());
  bool bitwise = loaded.size() == tensors.size();
  for (std::size_t k = 0; bitwise && k < tensors.size(); ++k) {
    bitwise = loaded[k].name == tensors[k].name && loaded[k].value.shape() == tensors[k].value.shape() &&
              std::memcmp(loaded[k].value.data(), tensors[k].value.data(),
                          sizeof(double) * std::size_t(tensors[k].value.size())) == 0;
  }
  bitwise = bitwise && encode_checkpoint(loaded) == encode_checkpoint(tensors);
  train(cfg, {&c}, train_state_from_tensors(loaded));
  const bool resumed_same = strip_wall_time(c.str()) == strip_wall_time(a.str());
  fs::remove(file);

  return {csv_same && bitwise && resumed_same,
          "repeat CSV " + std::string(csv_same ? "identical" : "differs") + " (" + std::to_string(ra.rows.size()) +
              " rows), checkpoint " + (bitwise ? "bitwise" : "not bitwise") + " (" +
              std::to_string(tensors.size()) + " tensors), resumed CSV " +
              (resumed_same ? "identical" : "differs")};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient soundness", gradient_soundness},
      {2, "parameter accounting", parameter_accounting},
      {3, "initial loss anchor", initial_loss},
      {4, "copy convergence", copy_convergence},
      {5, "associative recall", associative_recall},
      {6, "addressing equivalence", addressing_equivalence},
      {7, "TBPTT contracts", tbptt_contracts},
      {8, "memory oracle", memory_oracle},
      {9, "char-LM smoke test", charlm_smoke},
      {10, "determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.title << "  (" << o.detail
              << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
