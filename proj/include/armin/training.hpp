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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "armin/model.hpp"

namespace armin {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m, v;
  long step = 0;

  /// Zero moments shaped like `params`.
  static AdamState like(std::span<const Tensor* const> params, const AdamConfig& config);
};

/// One bias-corrected Adam update applied in place.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

/// Rescales `grads` so their global L2 norm is at most `max_norm` and returns
/// the norm before clipping. A non-positive `max_norm` disables clipping.
double clip_grad_norm(std::span<Tensor> grads, double max_norm);

class ConvergenceTracker {
 public:
  static constexpr std::size_t kWindow = 10;
  static constexpr double kThreshold = 0.01;
  static constexpr std::size_t kMaxSpikes = 2;

  void push(double val_loss);
  /// Oldest first.
  const std::vector<double>& losses() const { return losses_; }
  void restore(std::vector<double> losses);

 private:
  std::vector<double> losses_;
};

/// True once ten validations are recorded, at most two of them exceed the
/// threshold, and the latest is below it.
bool solved_check(const ConvergenceTracker& tracker);

struct TrainConfig {
  ModelKind model = ModelKind::armin;
  TaskSpec task = TaskSpec::named("copy");
  Index d_h = 64;
  Index d_r = 32;
  Index n_mem = 16;

  AdamConfig adam;
  double clip = 10.0;
  long iterations = 30000;
  long val_interval = 500;
  Index val_samples = 64;
  std::uint64_t val_seed = 12345;
  std::uint64_t seed = 1;
  bool stop_when_solved = true;

  GumbelConfig gumbel{1.0, 0.25, 0, AddressMode::straight_through};  // anneal_iters <= 0: half of `iterations`

  Index batch = 1;
  Index chunk = 150;
  std::string corpus;         // char-LM byte file
  double val_fraction = 0.1;  // held-out tail of the corpus
  Index val_chars = 20000;    // cap on held-out symbols scored per validation

  void validate() const;
  GumbelConfig schedule() const;
};

/// Mean loss and all-bits-correct accuracy over a validation set.
struct ValidationResult {
  double loss = 0;
  double accuracy = 0;
};

/// Argmax-inference evaluation over fixed samples; never touches parameters.
ValidationResult validate(const Model& model, std::span<const TaskSample> samples);
/// Freshly generated validation set from `seed`.
std::vector<TaskSample> validation_set(const TaskSpec& task, Index n, std::uint64_t seed);
ValidationResult validate(const Model& model, const TaskSpec& task, Index n, std::uint64_t seed);

/// Bits per symbol of next-symbol prediction over `encoded`, argmax inference,
/// state carried across the whole stream.
double validate_bpc(const Model& model, std::span<const int> encoded);

struct MetricsRow {
  long iter = 0;
  double wall_time_s = 0;
  double train_loss = 0;
  double val_loss = 0;
  double tau = 0;
  double lr = 0;
  bool solved = false;
};

inline constexpr const char* kMetricsHeader = "iter,wall_time_s,train_loss,val_loss,tau,lr,solved";
void write_metrics_row(std::ostream& os, const MetricsRow& row);

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  Model model;
  AdamState adam;
  long iter = 0;
  std::uint64_t data_draws = 0;
  std::uint64_t noise_draws = 0;
  ConvergenceTracker tracker;
  double loss_sum = 0;  // training loss accumulated since the last validation
  long loss_count = 0;
  double wall_time_s = 0;
  bool solved = false;
  long solved_iter = -1;
  // char-LM only
  Index cursor = 0;
  RecurrentState carry;
};

struct TrainHooks {
  std::ostream* metrics = nullptr;  // CSV rows (header written when starting fresh)
  std::ostream* log = nullptr;
  long stop_after = 0;              // pause after this many iterations in this call, 0 = no limit
  std::function<void(const TrainState&, const MetricsRow&)> on_validation;
};

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> rows;
  bool finished = false;  // solved or reached `iterations`
};

/// Fresh model and optimizer for `config`. For char-LM the vocabulary size
/// sets d_i and d_o.
TrainState initial_state(const TrainConfig& config, Index vocab = 0);

/// Runs (or continues) training. Throws NanError naming the first non-finite
/// quantity.
TrainResult train(const TrainConfig& config, TrainHooks hooks = {}, std::optional<TrainState> resume = {});

/// Char-LM data: vocabulary plus train/held-out splits of the encoded corpus.
struct CharData {
  Vocabulary vocab;
  std::vector<int> train;
  std::vector<int> held_out;

  static CharData load(const TrainConfig& config);
  static CharData from_bytes(std::span<const std::uint8_t> corpus, double val_fraction);
};

struct TbpttOptions {
  AddressMode mode = AddressMode::straight_through;
  double tau = 1.0;
  double clip = 10.0;
  Rng* noise = nullptr;
};

/// One pass over every chunk of `batcher`: forward, backward and Adam step per
/// chunk, with h and memory detached and carried into the next chunk. Returns
/// mean training loss in bits per symbol.
double run_tbptt_epoch(Model& model, CharBatcher& batcher, AdamState& adam, RecurrentState& carry,
                       const TbpttOptions& options);

/// Throws NanError naming the first tensor holding a non-finite value.
void check_finite(std::span<const std::pair<std::string, const Tensor*>> tensors, const std::string& what);

}  // namespace armin
