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

// Binary checkpoint: "ARMN", u32 version, u32 count, then per tensor
// u16 name length, name, u8 rank, u32 dims, f64 data; a trailing CRC32 covers
// every preceding byte. All integers and floats are little-endian.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "armin/training.hpp"

namespace armin {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
/// Throws ChecksumError on a CRC mismatch and DataError on malformed content.
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

/// Throws DataError when `name` is absent.
const Tensor& find_tensor(std::span<const NamedTensor> tensors, const std::string& name);
bool has_tensor(std::span<const NamedTensor> tensors, const std::string& name);

std::vector<NamedTensor> model_tensors(const Model& model);
/// Throws DimensionError when a stored tensor disagrees with the stored dims.
Model model_from_tensors(std::span<const NamedTensor> tensors);

/// Model, optimizer, RNG positions and loop bookkeeping.
std::vector<NamedTensor> train_state_tensors(const TrainState& state);
TrainState train_state_from_tensors(std::span<const NamedTensor> tensors);

}  // namespace armin
