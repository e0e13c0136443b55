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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "armin/rng.hpp"
#include "armin/tensor.hpp"

namespace armin {

/// One supervised sequence: inputs [T x d_i], targets and mask [T x d_o].
struct TaskSample {
  Matrix inputs;
  Matrix targets;
  Matrix mask;

  Index steps() const { return inputs.rows(); }
};

enum class TaskKind { copy, repeat_copy, assoc_recall, priority_sort, charlm };

struct Range {
  Index lo = 1;
  Index hi = 1;
};

inline constexpr Index kBits = 6;

/// Task definition plus the channel widths of its sample layout.
///
/// Channel layouts (data bits always occupy channels 0..5):
///   copy           d_i 8: 6 start flag, 7 delimiter.                 d_o 6
///   repeat_copy    d_i 9: 6 start, 7 delimiter, 8 repeats/10.         d_o 7: 6 end marker
///   assoc_recall   d_i 9: 6 key row, 7 value row, 8 query delimiter.  d_o 6
///   priority_sort  d_i 9: 6 priority, 7 input row, 8 delimiter.       d_o 6
struct TaskSpec {
  TaskKind kind = TaskKind::copy;
  Range length{1, 50};
  Range repeats{1, 10};
  Range pairs{2, 6};
  Index n_in = 40;
  Index n_out = 30;

  static TaskSpec named(std::string_view name);
  std::string name() const;
  Index d_i() const;
  Index d_o() const;
  /// Throws ParameterError when a range leaves the task's allowed bounds.
  void validate() const;
};

TaskSample copy_from_bits(const Matrix& bits);
TaskSample gen_copy(Rng& rng, Range length = {1, 50});

TaskSample repeat_copy_from(const Matrix& bits, Index repeats);
TaskSample gen_repeat_copy(Rng& rng, Range length = {1, 10}, Range repeats = {1, 10});

/// Pairs are presented as a key row then a value row, then a query delimiter,
/// the query key, and one answer step.
TaskSample assoc_recall_from(const Matrix& keys, const Matrix& values, Index query);
TaskSample gen_assoc_recall(Rng& rng, Range pairs = {2, 6});

/// Answer = keys of the n_out highest priorities, descending; ties go to the
/// earlier input.
TaskSample priority_sort_from(const Matrix& keys, const std::vector<double>& priorities, Index n_out);
TaskSample gen_priority_sort(Rng& rng, Index n_in = 40, Index n_out = 30);

TaskSample generate(const TaskSpec& spec, Rng& rng);

/// Plain-text dump: inputs, targets and mask blocks, one row per step,
/// separated by blank lines.
void write_sample(std::ostream& os, const TaskSample& sample);

// ---------------------------------------------------------------------------
// Byte-level language modelling.

class Vocabulary {
 public:
  static Vocabulary from(std::span<const std::uint8_t> corpus);

  Index size() const { return static_cast<Index>(symbols_.size()); }
  int index(std::uint8_t byte) const;
  std::uint8_t symbol(int index) const { return symbols_.at(static_cast<std::size_t>(index)); }

 private:
  std::array<int, 256> index_{};
  std::vector<std::uint8_t> symbols_;
};

/// Aligned next-symbol chunks: inputs[t][b] predicts targets[t][b].
struct CharChunk {
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;
  bool epoch_start = false;

  Index steps() const { return static_cast<Index>(inputs.size()); }
};

/// Splits a corpus into `batch` contiguous streams and walks them `chunk`
/// symbols at a time, so consecutive chunks continue each stream.
class CharBatcher {
 public:
  CharBatcher(std::vector<int> encoded, Index batch, Index chunk);
  static CharBatcher from_bytes(std::span<const std::uint8_t> corpus, const Vocabulary& vocab,
                                Index batch, Index chunk);

  /// Next chunk; wraps to the first chunk after the last one.
  CharChunk next();
  void reset() { cursor_ = 0; }
  /// Index of the next chunk within the epoch.
  Index cursor() const { return cursor_; }
  void seek(Index cursor) { cursor_ = cursor; }

  Index batch() const { return batch_; }
  Index chunk() const { return chunk_; }
  Index stream_length() const { return stream_len_; }
  Index chunks_per_epoch() const { return stream_len_ / chunk_; }
  /// Offset into the corpus of stream `b`, position `t`.
  Index offset(Index b, Index t) const { return b * stream_len_ + t; }

 private:
  std::vector<int> data_;
  Index batch_, chunk_, stream_len_;
  Index cursor_ = 0;
};

/// [ids.size() x vocab] one-hot rows.
Matrix one_hot(const std::vector<int>& ids, Index vocab);

std::vector<std::uint8_t> read_bytes(const std::string& path);

}  // namespace armin
