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
#include <string>
#include <vector>

#include "armin/gradcheck.hpp"
#include "armin/model.hpp"

namespace armin {

struct GradcheckSetup {
  ModelKind kind = ModelKind::armin;
  ModelDims dims{3, 8, 4, 5, 4};
  Index steps = 6;
  AddressMode mode = AddressMode::soft;
  double tau = 0.7;
  std::uint64_t seed = 1;
  /// Replaces the output sigmoid's backward rule with a wrong one (negative control).
  bool inject_fault = false;
  GradCheckOptions options{1e-4};
};

struct TensorCheck {
  std::string name;
  Index size = 0;
  double max_error = 0;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  double max_error = 0;
  std::size_t coords_checked = 0;
};

/// Central-difference check of every model parameter on a random sequence
/// with frozen Gumbel noise and masked BCE over sigmoid outputs.
GradcheckReport gradcheck_model(const GradcheckSetup& setup);

}  // namespace armin
