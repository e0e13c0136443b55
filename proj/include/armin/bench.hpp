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
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "armin/model.hpp"

namespace armin {

enum class BenchMode { train_soft, train_st, infer_soft, infer_argmax };

BenchMode parse_bench_mode(std::string_view name);
std::string to_string(BenchMode mode);

struct BenchConfig {
  ModelKind model = ModelKind::armin;
  BenchMode mode = BenchMode::train_st;
  Index d_h = 128;
  Index d_r = 64;
  Index n_mem = 16;
  Index chunk = 50;
  Index batch = 1;
  Index vocab = 50;
  double warmup_s = 0.2;
  double duration_s = 1.0;
  int repeats = 3;
  std::uint64_t seed = 1;

  ModelDims dims() const;
  Index params() const;
};

struct BenchRow {
  std::string model;
  std::string mode;
  Index d_h = 0, d_r = 0, n_mem = 0, chunk = 0, batch = 0;
  Index params = 0;
  double steps_per_s = 0;
  double chars_per_s = 0;
  std::size_t peak_alloc_bytes = 0;
};

/// Timed loop over pre-generated next-symbol chunks. Training modes run
/// forward, backward and an Adam step; inference modes run forward only.
/// Reports the median of `repeats` timed windows of at least `duration_s`.
BenchRow bench_throughput(const BenchConfig& config);

/// Throws ConfigError naming the count when it lies outside budget ± 5%.
void check_budget(Index budget, const BenchConfig& config);

/// Checks every config against the budget before running any of them.
std::vector<BenchRow> bench_matched(Index budget, const std::vector<BenchConfig>& configs);

inline constexpr const char* kBenchHeader =
    "model,mode,d_h,d_r,n_mem,chunk,batch,params,steps_per_s,chars_per_s,peak_alloc_bytes";

/// Header plus rows sorted by (model, mode).
void write_bench_csv(std::ostream& os, std::vector<BenchRow> rows);

}  // namespace armin
