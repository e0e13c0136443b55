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

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "armin/tensor.hpp"

namespace armin {

/// Objective for gradient checking. Returns the loss at `params`; when
/// `grads` is non-null it also fills one analytic gradient per parameter.
template <typename Scalar>
using Objective = std::function<Scalar(std::span<const BasicTensor<Scalar>> params,
                                       std::vector<BasicTensor<Scalar>>* grads)>;

struct GradCheckOptions {
  double eps = 1e-5;
  /// Tensors larger than this are checked on a random subset of this many coordinates.
  Index max_coords_per_tensor = 400;
  std::uint64_t sample_seed = 0x5eed;
};

struct GradCheckResult {
  double max_error = 0;
  std::vector<double> per_tensor;
  std::size_t coords_checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Compares the analytic gradient of `f` with central differences
/// (f(θ+εe) − f(θ−εe)) / 2ε. Throws DeterminismError if two evaluations at the
/// same point disagree.
template <typename Scalar>
GradCheckResult finite_diff_check(const Objective<Scalar>& f, std::vector<BasicTensor<Scalar>> params,
                                  const GradCheckOptions& options = {}) {
  std::vector<BasicTensor<Scalar>> analytic;
  const Scalar base = f(params, &analytic);
  const Scalar again = f(params, nullptr);
  if (!(base == again)) {
    throw DeterminismError("finite_diff_check: objective is not reproducible (" +
                           std::to_string(double(base)) + " vs " + std::to_string(double(again)) +
                           ")");
  }
  if (analytic.size() != params.size()) {
    throw ContractError("finite_diff_check: objective returned " + std::to_string(analytic.size()) +
                        " gradients for " + std::to_string(params.size()) + " parameters");
  }

  std::mt19937_64 rng(options.sample_seed);
  GradCheckResult result;
  result.per_tensor.assign(params.size(), 0.0);
  const Scalar eps = static_cast<Scalar>(options.eps);

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    std::vector<Index> coords(static_cast<std::size_t>(p.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (p.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(options.max_coords_per_tensor));
    }
    for (Index i : coords) {
      const Scalar saved = p[i];
      p[i] = saved + eps;
      const Scalar up = f(params, nullptr);
      p[i] = saved - eps;
      const Scalar down = f(params, nullptr);
      p[i] = saved;
      const double numeric = double(up - down) / (2.0 * double(eps));
      const double err = relative_error(double(analytic[k][i]), numeric);
      result.per_tensor[k] = std::max(result.per_tensor[k], err);
      ++result.coords_checked;
    }
    result.max_error = std::max(result.max_error, result.per_tensor[k]);
  }
  return result;
}

}  // namespace armin
