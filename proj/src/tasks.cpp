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

#include "armin/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <ostream>
#include <set>

namespace armin {

namespace {

void check_range(const Range& r, Index lo, Index hi, const char* what) {
  if (r.lo < lo || r.hi > hi || r.lo > r.hi) {
    throw ParameterError(std::string(what) + " range [" + std::to_string(r.lo) + ", " +
                         std::to_string(r.hi) + "] must lie within [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
  }
}

Matrix random_bits(Rng& rng, Index rows) {
  Matrix m(rows, kBits);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bit() ? 1.0 : 0.0;
  return m;
}

void check_bits(const Matrix& bits, const char* what) {
  if (bits.cols() != kBits || bits.rows() < 1) {
    throw DimensionError(std::string(what) + ": expected [n x 6] bit rows, got " + shape_string(bits));
  }
}

}  // namespace

TaskSpec TaskSpec::named(std::string_view name) {
  TaskSpec s;
  if (name == "copy") {
    s.kind = TaskKind::copy;
  } else if (name == "repeat_copy") {
    s.kind = TaskKind::repeat_copy;
    s.length = {1, 10};
  } else if (name == "assoc_recall") {
    s.kind = TaskKind::assoc_recall;
  } else if (name == "priority_sort") {
    s.kind = TaskKind::priority_sort;
  } else if (name == "charlm") {
    s.kind = TaskKind::charlm;
  } else {
    throw ParameterError("unknown task '" + std::string(name) + "'");
  }
  return s;
}

std::string TaskSpec::name() const {
  switch (kind) {
    case TaskKind::copy:
      return "copy";
    case TaskKind::repeat_copy:
      return "repeat_copy";
    case TaskKind::assoc_recall:
      return "assoc_recall";
    case TaskKind::priority_sort:
      return "priority_sort";
    case TaskKind::charlm:
      return "charlm";
  }
  return "?";
}

Index TaskSpec::d_i() const {
  switch (kind) {
    case TaskKind::copy:
      return 8;
    case TaskKind::repeat_copy:
    case TaskKind::assoc_recall:
    case TaskKind::priority_sort:
      return 9;
    case TaskKind::charlm:
      return 0;  // vocabulary size, known once the corpus is read
  }
  return 0;
}

Index TaskSpec::d_o() const {
  switch (kind) {
    case TaskKind::repeat_copy:
      return 7;
    case TaskKind::charlm:
      return 0;
    default:
      return 6;
  }
}

void TaskSpec::validate() const {
  switch (kind) {
    case TaskKind::copy:
      check_range(length, 1, 50, "copy length");
      break;
    case TaskKind::repeat_copy:
      check_range(length, 1, 10, "repeat_copy length");
      check_range(repeats, 1, 10, "repeat_copy repeats");
      break;
    case TaskKind::assoc_recall:
      check_range(pairs, 2, 6, "assoc_recall pairs");
      break;
    case TaskKind::priority_sort:
      if (n_in < 1 || n_out < 1 || n_out > n_in) {
        throw ParameterError("priority_sort requires 1 <= n_out <= n_in, got n_in=" +
                             std::to_string(n_in) + " n_out=" + std::to_string(n_out));
      }
      break;
    case TaskKind::charlm:
      break;
  }
}

TaskSample copy_from_bits(const Matrix& bits) {
  check_bits(bits, "copy");
  const Index L = bits.rows(), T = 2 * L + 1;
  TaskSample s{Matrix::Zero(T, 8), Matrix::Zero(T, kBits), Matrix::Zero(T, kBits)};
  s.inputs.topLeftCorner(L, kBits) = bits;
  s.inputs(0, 6) = 1.0;
  s.inputs(L, 7) = 1.0;
  s.targets.bottomRows(L) = bits;
  s.mask.bottomRows(L).setOnes();
  return s;
}

TaskSample gen_copy(Rng& rng, Range length) {
  check_range(length, 1, 50, "copy length");
  const Index L = rng.uniform_int(length.lo, length.hi);
  return copy_from_bits(random_bits(rng, L));
}

TaskSample repeat_copy_from(const Matrix& bits, Index repeats) {
  check_bits(bits, "repeat_copy");
  if (repeats < 1) throw ParameterError("repeat_copy: repeats must be >= 1");
  const Index L = bits.rows(), answer = repeats * L + 1, T = L + 1 + answer;
  TaskSample s{Matrix::Zero(T, 9), Matrix::Zero(T, 7), Matrix::Zero(T, 7)};
  s.inputs.topLeftCorner(L, kBits) = bits;
  s.inputs(0, 6) = 1.0;
  s.inputs(L, 7) = 1.0;
  s.inputs(L, 8) = double(repeats) / 10.0;
  for (Index k = 0; k < repeats; ++k) s.targets.block(L + 1 + k * L, 0, L, kBits) = bits;
  s.targets(T - 1, 6) = 1.0;
  s.mask.bottomRows(answer).setOnes();
  return s;
}

TaskSample gen_repeat_copy(Rng& rng, Range length, Range repeats) {
  check_range(length, 1, 10, "repeat_copy length");
  check_range(repeats, 1, 10, "repeat_copy repeats");
  const Index L = rng.uniform_int(length.lo, length.hi);
  const Index n = rng.uniform_int(repeats.lo, repeats.hi);
  return repeat_copy_from(random_bits(rng, L), n);
}

TaskSample assoc_recall_from(const Matrix& keys, const Matrix& values, Index query) {
  check_bits(keys, "assoc_recall keys");
  check_bits(values, "assoc_recall values");
  const Index P = keys.rows();
  if (values.rows() != P) throw DimensionError("assoc_recall: keys and values differ in count");
  if (query < 0 || query >= P) throw IndexError("assoc_recall: query index out of range");
  const Index T = 2 * P + 3;
  TaskSample s{Matrix::Zero(T, 9), Matrix::Zero(T, kBits), Matrix::Zero(T, kBits)};
  for (Index p = 0; p < P; ++p) {
    s.inputs.block(2 * p, 0, 1, kBits) = keys.row(p);
    s.inputs(2 * p, 6) = 1.0;
    s.inputs.block(2 * p + 1, 0, 1, kBits) = values.row(p);
    s.inputs(2 * p + 1, 7) = 1.0;
  }
  s.inputs(2 * P, 8) = 1.0;
  s.inputs.block(2 * P + 1, 0, 1, kBits) = keys.row(query);
  s.inputs(2 * P + 1, 6) = 1.0;
  s.targets.row(T - 1) = values.row(query);
  s.mask.row(T - 1).setOnes();
  return s;
}

TaskSample gen_assoc_recall(Rng& rng, Range pairs) {
  check_range(pairs, 2, 6, "assoc_recall pairs");
  const Index P = rng.uniform_int(pairs.lo, pairs.hi);
  Matrix keys(P, kBits);
  std::set<std::vector<double>> seen;
  for (Index p = 0; p < P;) {
    Matrix k = random_bits(rng, 1);
    std::vector<double> key(k.data(), k.data() + kBits);
    if (seen.insert(key).second) keys.row(p++) = k;
  }
  Matrix values = random_bits(rng, P);
  const Index query = rng.uniform_int(0, P - 1);
  return assoc_recall_from(keys, values, query);
}

TaskSample priority_sort_from(const Matrix& keys, const std::vector<double>& priorities, Index n_out) {
  check_bits(keys, "priority_sort keys");
  const Index n_in = keys.rows();
  if (static_cast<Index>(priorities.size()) != n_in) {
    throw DimensionError("priority_sort: one priority per key required");
  }
  if (n_out < 1 || n_out > n_in) {
    throw ParameterError("priority_sort: n_out=" + std::to_string(n_out) + " exceeds n_in=" +
                         std::to_string(n_in));
  }
  std::vector<Index> order(static_cast<std::size_t>(n_in));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return priorities[static_cast<std::size_t>(a)] > priorities[static_cast<std::size_t>(b)];
  });
  const Index T = n_in + 1 + n_out;
  TaskSample s{Matrix::Zero(T, 9), Matrix::Zero(T, kBits), Matrix::Zero(T, kBits)};
  for (Index i = 0; i < n_in; ++i) {
    s.inputs.block(i, 0, 1, kBits) = keys.row(i);
    s.inputs(i, 6) = priorities[static_cast<std::size_t>(i)];
    s.inputs(i, 7) = 1.0;
  }
  s.inputs(n_in, 8) = 1.0;
  for (Index k = 0; k < n_out; ++k) s.targets.row(n_in + 1 + k) = keys.row(order[static_cast<std::size_t>(k)]);
  s.mask.bottomRows(n_out).setOnes();
  return s;
}

TaskSample gen_priority_sort(Rng& rng, Index n_in, Index n_out) {
  if (n_in < 1 || n_out < 1 || n_out > n_in) {
    throw ParameterError("priority_sort: n_out=" + std::to_string(n_out) + " exceeds n_in=" +
                         std::to_string(n_in));
  }
  Matrix keys = random_bits(rng, n_in);
  std::vector<double> priorities(static_cast<std::size_t>(n_in));
  for (auto& p : priorities) p = rng.uniform(-1.0, 1.0);
  return priority_sort_from(keys, priorities, n_out);
}

TaskSample generate(const TaskSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case TaskKind::copy:
      return gen_copy(rng, spec.length);
    case TaskKind::repeat_copy:
      return gen_repeat_copy(rng, spec.length, spec.repeats);
    case TaskKind::assoc_recall:
      return gen_assoc_recall(rng, spec.pairs);
    case TaskKind::priority_sort:
      return gen_priority_sort(rng, spec.n_in, spec.n_out);
    case TaskKind::charlm:
      break;
  }
  throw ParameterError("generate: task '" + spec.name() + "' has no sample generator");
}

void write_sample(std::ostream& os, const TaskSample& sample) {
  auto block = [&os](const Matrix& m) {
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
      os << '\n';
    }
  };
  const auto flags = os.flags();
  const auto precision = os.precision(17);
  block(sample.inputs);
  os << '\n';
  block(sample.targets);
  os << '\n';
  block(sample.mask);
  os.precision(precision);
  os.flags(flags);
}

// ---------------------------------------------------------------------------

Vocabulary Vocabulary::from(std::span<const std::uint8_t> corpus) {
  std::array<bool, 256> present{};
  for (std::uint8_t b : corpus) present[b] = true;
  Vocabulary v;
  v.index_.fill(-1);
  for (int b = 0; b < 256; ++b) {
    if (!present[static_cast<std::size_t>(b)]) continue;
    v.index_[static_cast<std::size_t>(b)] = static_cast<int>(v.symbols_.size());
    v.symbols_.push_back(static_cast<std::uint8_t>(b));
  }
  return v;
}

int Vocabulary::index(std::uint8_t byte) const {
  const int i = index_[byte];
  if (i < 0) throw IndexError("byte " + std::to_string(int(byte)) + " is not in the vocabulary");
  return i;
}

CharBatcher::CharBatcher(std::vector<int> encoded, Index batch, Index chunk)
    : data_(std::move(encoded)), batch_(batch), chunk_(chunk), stream_len_(0) {
  if (batch < 1 || chunk < 1) throw ParameterError("CharBatcher: batch and chunk must be >= 1");
  const Index n = static_cast<Index>(data_.size());
  if (n <= batch * chunk) {
    throw DataError("corpus of " + std::to_string(n) + " symbols is too small for batch " +
                    std::to_string(batch) + " x chunk " + std::to_string(chunk));
  }
  stream_len_ = (n - 1) / batch;
}

CharBatcher CharBatcher::from_bytes(std::span<const std::uint8_t> corpus, const Vocabulary& vocab,
                                    Index batch, Index chunk) {
  std::vector<int> encoded;
  encoded.reserve(corpus.size());
  for (std::uint8_t b : corpus) encoded.push_back(vocab.index(b));
  return CharBatcher(std::move(encoded), batch, chunk);
}

CharChunk CharBatcher::next() {
  if (cursor_ >= chunks_per_epoch()) cursor_ = 0;
  CharChunk c;
  c.epoch_start = cursor_ == 0;
  const Index start = cursor_ * chunk_;
  c.inputs.assign(static_cast<std::size_t>(chunk_), std::vector<int>(static_cast<std::size_t>(batch_)));
  c.targets = c.inputs;
  for (Index t = 0; t < chunk_; ++t) {
    for (Index b = 0; b < batch_; ++b) {
      const auto at = static_cast<std::size_t>(offset(b, start + t));
      c.inputs[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = data_[at];
      c.targets[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = data_[at + 1];
    }
  }
  ++cursor_;
  return c;
}

Matrix one_hot(const std::vector<int>& ids, Index vocab) {
  Matrix m = Matrix::Zero(static_cast<Index>(ids.size()), vocab);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= vocab) throw IndexError("one_hot: symbol outside vocabulary");
    m(static_cast<Index>(r), ids[r]) = 1.0;
  }
  return m;
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace armin
