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


#include "armin/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <filesystem>
#include <fstream>
#include <limits>

namespace armin {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const std::string& s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t> bytes;

 private:
  void put(std::uint64_t v, int n) {
    for (int k = 0; k < n; ++k) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int k = 0; k < n; ++k) v |= std::uint64_t(bytes_[pos_ + static_cast<std::size_t>(k)]) << (8 * k);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, n);
    done += n;
  }
  return static_cast<std::uint32_t>(crc);
}

Tensor scalar_of(double v) { return Tensor::vector({v}); }
double scalar_in(std::span<const NamedTensor> ts, const std::string& name) { return find_tensor(ts, name)[0]; }

Tensor from_values(const std::vector<double>& v) {
  Tensor t(Shape{static_cast<Index>(v.size())});
  for (std::size_t k = 0; k < v.size(); ++k) t[static_cast<Index>(k)] = v[k];
  return t;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors) {
  Writer w;
  w.raw("ARMN");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) throw DataError("tensor name too long");
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.raw(t.name);
    const Shape& shape = t.value.shape();
    if (shape.size() > 255) throw DataError("tensor " + t.name + " has too many axes");
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (Index d : shape) {
      if (d > Index(std::numeric_limits<std::uint32_t>::max())) throw DataError("tensor " + t.name + " too large");
      w.u32(static_cast<std::uint32_t>(d));
    }
    for (Index i = 0; i < t.value.size(); ++i) w.f64(t.value[i]);
  }
  w.u32(crc32_of(w.bytes));
  return std::move(w.bytes);
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw DataError("checkpoint too short");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  const std::uint32_t stored = tail.u32();
  const std::uint32_t actual = crc32_of(body);
  if (stored != actual) throw ChecksumError("checkpoint CRC mismatch");

  Reader r(body);
  if (r.raw(4) != "ARMN") throw DataError("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = r.raw(r.u16());
    const std::uint8_t rank = r.u8();
    Shape shape;
    for (std::uint8_t a = 0; a < rank; ++a) {
      const std::uint32_t d = r.u32();
      if (d == 0) throw DataError("tensor " + t.name + " has an empty axis");
      shape.push_back(Index(d));
    }
    t.value = Tensor(shape);
    for (Index i = 0; i < t.value.size(); ++i) t.value[i] = r.f64();
    out.push_back(std::move(t));
  }
  if (!r.done()) throw DataError("trailing bytes after the last tensor");
  return out;
}

void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors) {
  const auto bytes = encode_checkpoint(tensors);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  const auto bytes = read_bytes(path);
  return decode_checkpoint(bytes);
}

const Tensor& find_tensor(std::span<const NamedTensor> tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw DataError("checkpoint has no tensor '" + name + "'");
}

bool has_tensor(std::span<const NamedTensor> tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

std::vector<NamedTensor> model_tensors(const Model& model) {
  const ModelDims& d = model.dims;
  std::vector<NamedTensor> out{
      {"meta.kind", scalar_of(model.kind == ModelKind::armin ? 0 : 1)},
      {"meta.output", scalar_of(model.output == OutputKind::bits ? 0 : 1)},
      {"meta.dims", Tensor::vector({double(d.d_i), double(d.d_h), double(d.d_r), double(d.n_mem), double(d.d_o)})},
  };
  for (const auto& [name, t] : model.parameters()) out.push_back({name, *t});
  return out;
}

Model model_from_tensors(std::span<const NamedTensor> tensors) {
  const Tensor& dims = find_tensor(tensors, "meta.dims");
  if (dims.size() != 5) throw DataError("meta.dims must hold 5 values");
  ModelDims d{Index(dims[0]), Index(dims[1]), Index(dims[2]), Index(dims[3]), Index(dims[4])};
  const ModelKind kind = scalar_in(tensors, "meta.kind") == 0 ? ModelKind::armin : ModelKind::lstm;
  const OutputKind output = scalar_in(tensors, "meta.output") == 0 ? OutputKind::bits : OutputKind::logits;
  Rng unused(0);
  Model model = Model::make(kind, d, output, unused);
  for (auto& [name, t] : model.parameters()) {
    const Tensor& stored = find_tensor(tensors, name);
    if (stored.shape() != t->shape()) {
      throw DimensionError("tensor " + name + " is " + shape_string(stored.shape()) + " but dims " + to_string(d) +
                           " require " + shape_string(t->shape()));
    }
    *t = stored;
  }
  return model;
}

std::vector<NamedTensor> train_state_tensors(const TrainState& s) {
  std::vector<NamedTensor> out = model_tensors(s.model);
  const auto names = [&] {
    std::vector<std::string> n;
    for (const auto& [name, t] : s.model.parameters()) n.push_back(name);
    return n;
  }();
  out.push_back({"adam.step", scalar_of(double(s.adam.step))});
  for (std::size_t k = 0; k < names.size(); ++k) {
    out.push_back({"adam.m." + names[k], s.adam.m[k]});
    out.push_back({"adam.v." + names[k], s.adam.v[k]});
  }
  out.push_back({"train.iter", scalar_of(double(s.iter))});
  out.push_back({"train.draws", Tensor::vector({double(s.data_draws), double(s.noise_draws)})});
  std::vector<double> tracker{double(s.tracker.losses().size())};
  tracker.insert(tracker.end(), s.tracker.losses().begin(), s.tracker.losses().end());
  out.push_back({"train.tracker", from_values(tracker)});
  out.push_back({"train.loss", Tensor::vector({s.loss_sum, double(s.loss_count)})});
  out.push_back({"train.wall", scalar_of(s.wall_time_s)});
  out.push_back({"train.solved", Tensor::vector({s.solved ? 1.0 : 0.0, double(s.solved_iter)})});
  if (s.model.output == OutputKind::logits) {
    const RecurrentState& c = s.carry;
    out.push_back({"carry.cursor", scalar_of(double(s.cursor))});
    out.push_back({"carry.h", Tensor(c.h)});
    if (c.c.size() > 0) out.push_back({"carry.c", Tensor(c.c)});
    if (c.memory.size() > 0) out.push_back({"carry.memory", Tensor(c.memory)});
    std::vector<double> book{double(c.filled), c.read_pending ? 1.0 : 0.0, double(c.last_read.size())};
    for (Index i : c.last_read) book.push_back(double(i));
    out.push_back({"carry.book", from_values(book)});
  }
  return out;
}

TrainState train_state_from_tensors(std::span<const NamedTensor> ts) {
  TrainState s;
  s.model = model_from_tensors(ts);
  std::vector<const Tensor*> ptrs;
  for (const auto& [name, t] : std::as_const(s.model).parameters()) ptrs.push_back(t);
  s.adam = AdamState::like(ptrs, AdamConfig{});
  s.adam.step = long(scalar_in(ts, "adam.step"));
  std::size_t k = 0;
  for (const auto& [name, t] : std::as_const(s.model).parameters()) {
    const Tensor& m = find_tensor(ts, "adam.m." + name);
    const Tensor& v = find_tensor(ts, "adam.v." + name);
    if (m.shape() != t->shape() || v.shape() != t->shape()) {
      throw DimensionError("optimizer moments for " + name + " do not match the parameter shape");
    }
    s.adam.m[k] = m;
    s.adam.v[k] = v;
    ++k;
  }
  s.iter = long(scalar_in(ts, "train.iter"));
  const Tensor& draws = find_tensor(ts, "train.draws");
  s.data_draws = static_cast<std::uint64_t>(draws[0]);
  s.noise_draws = static_cast<std::uint64_t>(draws[1]);
  const Tensor& tracker = find_tensor(ts, "train.tracker");
  std::vector<double> losses;
  for (Index i = 1; i <= Index(tracker[0]); ++i) losses.push_back(tracker[i]);
  s.tracker.restore(std::move(losses));
  const Tensor& loss = find_tensor(ts, "train.loss");
  s.loss_sum = loss[0];
  s.loss_count = long(loss[1]);
  s.wall_time_s = scalar_in(ts, "train.wall");
  const Tensor& solved = find_tensor(ts, "train.solved");
  s.solved = solved[0] != 0;
  s.solved_iter = long(solved[1]);
  if (s.model.output == OutputKind::logits) {
    s.cursor = Index(scalar_in(ts, "carry.cursor"));
    s.carry.h = find_tensor(ts, "carry.h").matrix();
    if (has_tensor(ts, "carry.c")) s.carry.c = find_tensor(ts, "carry.c").matrix();
    if (has_tensor(ts, "carry.memory")) s.carry.memory = find_tensor(ts, "carry.memory").matrix();
    const Tensor& book = find_tensor(ts, "carry.book");
    s.carry.filled = Index(book[0]);
    s.carry.read_pending = book[1] != 0;
    for (Index i = 0; i < Index(book[2]); ++i) s.carry.last_read.push_back(Index(book[3 + i]));
  }
  return s;
}

}  // namespace armin
