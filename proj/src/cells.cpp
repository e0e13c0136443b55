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

#include "armin/cells.hpp"

#include <cmath>

namespace armin {

namespace {

void expect_shape(const Tensor& t, const Shape& shape, const char* name) {
  if (t.shape() != shape) {
    throw DimensionError(std::string(name) + " has shape " + shape_string(t.shape()) + ", expected " +
                         shape_string(shape));
  }
}

}  // namespace

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

ArminParams ArminParams::zeros(const ArminDims& d, bool auto_addressing) {
  if (d.d_i <= 0 || d.d_h <= 0 || d.d_r <= 0 || (auto_addressing && d.n_mem <= 0)) {
    throw ParameterError("ArminParams: dimensions must be positive");
  }
  ArminParams p;
  p.dims = d;
  p.w_ig = Tensor::zeros({d.d_h + d.d_r, d.cell_in()});
  p.b_ig = Tensor::zeros({d.d_h + d.d_r});
  p.w_go = Tensor::zeros({4 * d.d_h + d.d_r, d.cell_in()});
  p.b_go = Tensor::zeros({4 * d.d_h + d.d_r});
  if (auto_addressing) {
    p.w_s = Tensor::zeros({d.n_mem, d.address_in()});
    p.b_s = Tensor::zeros({d.n_mem});
  }
  if (d.projects_writes()) p.w_m = Tensor::zeros({d.d_r, d.d_h});
  return p;
}

ArminParams ArminParams::init(const ArminDims& d, Rng& rng, bool auto_addressing) {
  ArminParams p = zeros(d, auto_addressing);
  fill_uniform(p.w_ig, 1.0 / std::sqrt(double(d.cell_in())), rng);
  fill_uniform(p.w_go, 1.0 / std::sqrt(double(d.cell_in())), rng);
  for (Index k = d.d_h; k < 2 * d.d_h; ++k) p.b_go[k] = 1.0;
  if (p.w_s) fill_uniform(*p.w_s, 1.0 / std::sqrt(double(d.address_in())), rng);
  if (p.w_m) fill_uniform(*p.w_m, 1.0 / std::sqrt(double(d.d_h)), rng);
  return p;
}

void ArminParams::validate() const {
  const ArminDims& d = dims;
  expect_shape(w_ig, {d.d_h + d.d_r, d.cell_in()}, "w_ig");
  expect_shape(b_ig, {d.d_h + d.d_r}, "b_ig");
  expect_shape(w_go, {4 * d.d_h + d.d_r, d.cell_in()}, "w_go");
  expect_shape(b_go, {4 * d.d_h + d.d_r}, "b_go");
  if (w_s.has_value() != b_s.has_value()) throw DimensionError("w_s and b_s must be present together");
  if (w_s) {
    expect_shape(*w_s, {d.n_mem, d.address_in()}, "w_s");
    expect_shape(*b_s, {d.n_mem}, "b_s");
  }
  if (w_m.has_value() != d.projects_writes()) {
    throw DimensionError("w_m must be present exactly when d_h != d_r");
  }
  if (w_m) expect_shape(*w_m, {d.d_r, d.d_h}, "w_m");
}

std::vector<std::pair<std::string, Tensor*>> ArminParams::tensors() {
  std::vector<std::pair<std::string, Tensor*>> out{
      {"w_ig", &w_ig}, {"b_ig", &b_ig}, {"w_go", &w_go}, {"b_go", &b_go}};
  if (w_s) out.emplace_back("w_s", &*w_s);
  if (b_s) out.emplace_back("b_s", &*b_s);
  if (w_m) out.emplace_back("w_m", &*w_m);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ArminParams::tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<ArminParams*>(this)->tensors()) out.emplace_back(name, t);
  return out;
}

LstmParams LstmParams::zeros(Index d_i, Index d_h) {
  if (d_i <= 0 || d_h <= 0) throw ParameterError("LstmParams: dimensions must be positive");
  LstmParams p;
  p.d_i = d_i;
  p.d_h = d_h;
  p.w = Tensor::zeros({4 * d_h, d_i + d_h});
  p.b = Tensor::zeros({4 * d_h});
  return p;
}

LstmParams LstmParams::init(Index d_i, Index d_h, Rng& rng) {
  LstmParams p = zeros(d_i, d_h);
  fill_uniform(p.w, 1.0 / std::sqrt(double(d_i + d_h)), rng);
  for (Index k = d_h; k < 2 * d_h; ++k) p.b[k] = 1.0;
  return p;
}

void LstmParams::validate() const {
  expect_shape(w, {4 * d_h, d_i + d_h}, "lstm w");
  expect_shape(b, {4 * d_h}, "lstm b");
}

std::vector<std::pair<std::string, Tensor*>> LstmParams::tensors() { return {{"w", &w}, {"b", &b}}; }

std::vector<std::pair<std::string, const Tensor*>> LstmParams::tensors() const {
  return {{"w", &w}, {"b", &b}};
}

Index param_count(const ArminParams& params) {
  Index n = 0;
  for (const auto& [name, t] : params.tensors()) n += t->size();
  return n;
}

Index param_count(const LstmParams& params) { return params.w.size() + params.b.size(); }

Index armin_param_count(const ArminDims& d, bool auto_addressing) {
  Index n = (d.d_h + d.d_r) * (d.cell_in() + 1) + (4 * d.d_h + d.d_r) * (d.cell_in() + 1);
  if (auto_addressing) n += d.n_mem * (d.address_in() + 1);
  if (d.projects_writes()) n += d.d_r * d.d_h;
  return n;
}

Index lstm_param_count(Index d_i, Index d_h) { return 4 * d_h * (d_i + d_h) + 4 * d_h; }

}  // namespace armin
