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

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "armin/bench.hpp"
#include "armin/checkpoint.hpp"
#include "armin/config.hpp"
#include "armin/diagnostics.hpp"
#include "armin/training.hpp"

namespace fs = std::filesystem;
using namespace armin;

namespace {

enum Exit { kOk = 0, kFailed = 1, kConfig = 2, kDims = 3, kCorrupt = 4, kNan = 5 };

struct Globals {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
};

std::vector<ConfigEntry> gather_entries(const Globals& g) {
  std::vector<ConfigEntry> entries;
  if (!g.config.empty()) entries = read_config_file(g.config);
  for (const auto& text : g.overrides) entries.push_back(parse_override(text));
  return entries;
}

/// Entries with `task` replaced by `name`.
std::vector<ConfigEntry> with_task(std::vector<ConfigEntry> entries, const std::string& name) {
  std::erase_if(entries, [](const ConfigEntry& e) { return e.key == "task"; });
  entries.push_back({"task", name, 0});
  return entries;
}

TrainConfig load_config(const std::vector<ConfigEntry>& entries) {
  TrainConfig cfg;
  apply_config(cfg, entries);
  return cfg;
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string resume;
  long stop_after = 0;
  bool quiet = false;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  TrainConfig cfg = load_config(gather_entries(g));
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  if (cfg.task.kind == TaskKind::charlm) require_file(cfg.corpus, "corpus");

  std::optional<TrainState> resume;
  if (!a.resume.empty()) {
    require_file(a.resume, "checkpoint");
    resume = train_state_from_tensors(load_checkpoint(a.resume));
  }

  fs::create_directories(g.out);
  const fs::path dir(g.out);
  {
    std::ofstream used(dir / "config.used");
    used << format_config(cfg);
  }
  std::ofstream metrics(dir / "metrics.csv", resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw ConfigError("cannot write '" + (dir / "metrics.csv").string() + "'");
  const std::string ckpt = (dir / "model.ckpt").string();

  TrainHooks hooks;
  hooks.metrics = &metrics;
  hooks.log = a.quiet ? nullptr : &std::cerr;
  hooks.stop_after = a.stop_after;
  hooks.on_validation = [&](const TrainState& st, const MetricsRow&) {
    save_checkpoint(ckpt, train_state_tensors(st));
  };

  TrainResult r = train(cfg, hooks, std::move(resume));
  save_checkpoint(ckpt, train_state_tensors(r.state));

  const TrainState& st = r.state;
  std::cout << "iterations " << st.iter << '\n';
  if (st.solved) std::cout << "solved at " << st.solved_iter << '\n';
  std::cout << (r.finished ? "finished" : "paused") << '\n';
  std::cout << "checkpoint " << ckpt << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string task;
  Index n = 0;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  auto entries = gather_entries(g);
  if (!a.task.empty()) entries = with_task(std::move(entries), a.task);
  const TrainConfig cfg = load_config(entries);
  require_file(a.checkpoint, "checkpoint");
  const Model model = model_from_tensors(load_checkpoint(a.checkpoint));

  std::cout << std::fixed << std::setprecision(6);
  if (cfg.task.kind == TaskKind::charlm) {
    require_file(cfg.corpus, "corpus");
    const CharData data = CharData::load(cfg);
    if (model.output != OutputKind::logits || model.dims.d_i != data.vocab.size()) {
      throw DimensionError("checkpoint expects d_i=" + std::to_string(model.dims.d_i) +
                           " but the corpus vocabulary has " + std::to_string(data.vocab.size()) + " symbols");
    }
    const auto n = std::min<std::size_t>(data.held_out.size(), static_cast<std::size_t>(cfg.val_chars));
    const std::vector<int> held(data.held_out.begin(), data.held_out.begin() + static_cast<std::ptrdiff_t>(n));
    std::cout << "task charlm  symbols " << n << '\n';
    std::cout << "bpc " << validate_bpc(model, held) << '\n';
    return kOk;
  }

  if (model.output != OutputKind::bits || model.dims.d_i != cfg.task.d_i() || model.dims.d_o != cfg.task.d_o()) {
    throw DimensionError("task " + cfg.task.name() + " expects d_i=" + std::to_string(cfg.task.d_i()) +
                         " d_o=" + std::to_string(cfg.task.d_o()) + ", checkpoint has d_i=" +
                         std::to_string(model.dims.d_i) + " d_o=" + std::to_string(model.dims.d_o));
  }
  const Index n = a.n > 0 ? a.n : cfg.val_samples;
  const std::uint64_t seed = g.seed ? *g.seed : cfg.val_seed;
  const ValidationResult v = validate(model, cfg.task, n, seed);
  std::cout << "task " << cfg.task.name() << "  samples " << n << "  seed " << seed << '\n';
  std::cout << "loss " << v.loss << '\n';
  std::cout << "accuracy " << v.accuracy << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string model = "armin";
  Index d_i = 3, d_h = 8, d_r = 4, n_mem = 5, d_o = 4;
  Index steps = 6;
  double tau = 0.7;
  double eps = 1e-4;
  double tol = 1e-4;
  bool inject_fault = false;
};

int cmd_gradcheck(const Globals& g, const GradcheckArgs& a) {
  if (a.d_h > 16) throw ConfigError("gradcheck: d_h=" + std::to_string(a.d_h) + " exceeds 16");
  if (a.steps > 8) throw ConfigError("gradcheck: T=" + std::to_string(a.steps) + " exceeds 8");
  if (a.d_i < 1 || a.d_h < 1 || a.d_o < 1 || a.steps < 1) throw ConfigError("gradcheck: sizes must be positive");
  GradcheckSetup setup;
  setup.kind = parse_model_kind(a.model);
  setup.dims = {a.d_i, a.d_h, a.d_r, a.n_mem, a.d_o};
  if (setup.kind == ModelKind::lstm) setup.dims.d_r = setup.dims.n_mem = 0;
  setup.steps = a.steps;
  setup.tau = a.tau;
  setup.seed = g.seed.value_or(1);
  setup.inject_fault = a.inject_fault;
  setup.options.eps = a.eps;

  const GradcheckReport report = gradcheck_model(setup);
  std::vector<std::string> failed;
  std::cout << "model " << a.model << "  dims " << to_string(setup.dims) << "  T " << a.steps << "  eps " << a.eps
            << "  tol " << a.tol << '\n';
  for (const auto& t : report.tensors) {
    const bool ok = t.max_error < a.tol;
    if (!ok) failed.push_back(t.name);
    std::cout << std::left << std::setw(16) << t.name << std::right << std::setw(8) << t.size << "  "
              << std::scientific << std::setprecision(3) << t.max_error << std::defaultfloat
              << (ok ? "  ok" : "  FAIL") << '\n';
  }
  std::cout << "coordinates " << report.coords_checked << "  max " << std::scientific << report.max_error
            << std::defaultfloat << '\n';
  if (!failed.empty()) {
    std::cout << "failed:";
    for (const auto& name : failed) std::cout << ' ' << name;
    std::cout << '\n';
    return kFailed;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> models{"armin"};
  std::vector<std::string> modes{"train_st"};
  Index d_h = 128, d_r = 64, n_mem = 16, chunk = 50, batch = 1, vocab = 50;
  double warmup = 0.2, duration = 1.0;
  int repeats = 3;
  bool matched = false;
  Index budget = 4'270'000;
};

int cmd_bench(const Globals& g, const BenchArgs& a) {
  std::vector<BenchConfig> configs;
  auto base = [&] {
    BenchConfig c;
    c.chunk = a.chunk;
    c.batch = a.batch;
    c.vocab = a.vocab;
    c.warmup_s = a.warmup;
    c.duration_s = a.duration;
    c.repeats = a.repeats;
    c.seed = g.seed.value_or(1);
    return c;
  };
  for (const auto& mode_name : a.modes) {
    const BenchMode mode = parse_bench_mode(mode_name);
    if (a.matched) {
      BenchConfig lstm = base();
      lstm.model = ModelKind::lstm;
      lstm.mode = mode;
      lstm.d_h = 1000;
      BenchConfig arm = base();
      arm.model = ModelKind::armin;
      arm.mode = mode;
      arm.d_h = 500;
      arm.d_r = 550;
      arm.n_mem = 5;
      configs.push_back(lstm);
      configs.push_back(arm);
      continue;
    }
    for (const auto& model_name : a.models) {
      BenchConfig c = base();
      c.model = parse_model_kind(model_name);
      c.mode = mode;
      c.d_h = a.d_h;
      c.d_r = a.d_r;
      c.n_mem = a.n_mem;
      configs.push_back(c);
    }
  }

  std::vector<BenchRow> rows;
  if (a.matched) {
    rows = bench_matched(a.budget, configs);
  } else {
    for (const auto& c : configs) rows.push_back(bench_throughput(c));
  }
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  std::cout << csv.str();
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    std::ofstream f(fs::path(g.out) / "bench.csv");
    f << csv.str();
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string task;
  Index n = 1;
};

int cmd_gen(const Globals& g, const GenArgs& a) {
  const TrainConfig cfg = load_config(with_task(gather_entries(g), a.task));
  if (cfg.task.kind == TaskKind::charlm) throw ConfigError("gen: charlm has no generator");
  if (a.n < 1) throw ConfigError("gen: n must be positive");
  Rng rng(g.seed.value_or(1));
  for (Index k = 0; k < a.n; ++k) {
    std::cout << "# sample " << k << '\n';
    write_sample(std::cout, generate(cfg.task, rng));
  }
  return kOk;
}

int report(int code, const std::exception& e) {
  std::cerr << "error: " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-augmented recurrent networks: training, evaluation and diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "key = value config file");
  app.add_option("--set", g.overrides, "override a config key (key=value, repeatable)")->allow_extra_args(false);
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "random seed");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a model, writing metrics.csv, model.ckpt and config.used");
  train->add_option("--resume", train_args.resume, "continue from a checkpoint written by train");
  train->add_option("--stop-after", train_args.stop_after, "pause after this many iterations");
  train->add_flag("--quiet", train_args.quiet, "no progress log");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint in argmax inference mode");
  eval->add_option("checkpoint", eval_args.checkpoint)->required();
  eval->add_option("--task", eval_args.task, "task name (defaults to the config)");
  eval->add_option("-n,--samples", eval_args.n, "validation samples (defaults to val_samples)");

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gradcheck->add_option("--model", gc.model)->capture_default_str();
  gradcheck->add_option("--d-i", gc.d_i)->capture_default_str();
  gradcheck->add_option("--d-h", gc.d_h)->capture_default_str();
  gradcheck->add_option("--d-r", gc.d_r)->capture_default_str();
  gradcheck->add_option("--n-mem", gc.n_mem)->capture_default_str();
  gradcheck->add_option("--d-o", gc.d_o)->capture_default_str();
  gradcheck->add_option("--steps", gc.steps, "sequence length T")->capture_default_str();
  gradcheck->add_option("--tau", gc.tau)->capture_default_str();
  gradcheck->add_option("--eps", gc.eps, "finite-difference step")->capture_default_str();
  gradcheck->add_option("--tol", gc.tol, "relative error tolerance")->capture_default_str();
  gradcheck->add_flag("--inject-fault", gc.inject_fault, "use a wrong output backward rule");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "throughput benchmark, CSV on stdout");
  bench->add_option("--model", ba.models, "armin, lstm (comma separated)")->delimiter(',');
  bench->add_option("--mode", ba.modes, "train_soft, train_st, infer_soft, infer_argmax (comma separated)")
      ->delimiter(',');
  bench->add_option("--d-h", ba.d_h)->capture_default_str();
  bench->add_option("--d-r", ba.d_r)->capture_default_str();
  bench->add_option("--n-mem", ba.n_mem)->capture_default_str();
  bench->add_option("--chunk", ba.chunk)->capture_default_str();
  bench->add_option("--batch", ba.batch)->capture_default_str();
  bench->add_option("--vocab", ba.vocab)->capture_default_str();
  bench->add_option("--warmup", ba.warmup, "seconds")->capture_default_str();
  bench->add_option("--duration", ba.duration, "seconds per repeat")->capture_default_str();
  bench->add_option("--repeats", ba.repeats)->capture_default_str();
  bench->add_flag("--matched", ba.matched, "LSTM d_h=1000 against ARMIN d_h=500 n_mem=5 d_r=550");
  bench->add_option("--budget", ba.budget, "parameter budget for --matched")->capture_default_str();

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "print task samples");
  gen->add_option("task", ga.task)->required();
  gen->add_option("n", ga.n)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*train) return cmd_train(g, train_args);
    if (*eval) return cmd_eval(g, eval_args);
    if (*gradcheck) return cmd_gradcheck(g, gc);
    if (*bench) {
      if (app.get_option("--out")->count() == 0) g.out.clear();
      return cmd_bench(g, ba);
    }
    if (*gen) return cmd_gen(g, ga);
  } catch (const ConfigError& e) {
    return report(kConfig, e);
  } catch (const ParameterError& e) {
    return report(kConfig, e);
  } catch (const DimensionError& e) {
    return report(kDims, e);
  } catch (const ChecksumError& e) {
    return report(kCorrupt, e);
  } catch (const DataError& e) {
    return report(kCorrupt, e);
  } catch (const NanError& e) {
    return report(kNan, e);
  } catch (const std::exception& e) {
    return report(kFailed, e);
  }
  return kFailed;
}
