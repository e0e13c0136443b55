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

#include <cmath>
#include <numbers>

#include "armin/gradcheck.hpp"
#include "armin/tape.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace armin;
using armin::testing::random_matrix;
using armin::testing::random_tensor;

namespace {

constexpr double kSigmoid2 = 0.880797077977882444;  // 1/(1+e^-2), mpmath

/// Loss = Σ weights ∘ f(inputs); gradients w.r.t. every input.
template <typename F>
Objective<double> weighted_objective(F f, Matrix weights) {
  return [f, weights](std::span<const Tensor> params, std::vector<Tensor>* grads) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.variable(p));
    Var out = f(vars);
    Var loss = ad::sum(ad::mul(out, tape.constant(Tensor(out.shape(), weights))));
    if (grads) {
      tape.backward(loss);
      grads->clear();
      for (const auto& v : vars) grads->push_back(tape.grad(v));
    }
    return loss.value().item();
  };
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  Tensor t(Shape{2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.matrix().rows() == 2);
  CHECK(t.matrix().cols() == 12);
  CHECK(Tensor().size() == 1);
  CHECK(Tensor().rank() == 0);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 3}, Matrix::Zero(1, 5)), DimensionError);
}

TEST_CASE("matmul") {
  Tape<double> tape;
  SUBCASE("identity") {
    Var v = tape.constant(Tensor::matrix({{3.0}, {-1.5}}));
    Var out = ad::matmul(tape.constant(Matrix(Matrix::Identity(2, 2))), v);
    CHECK(out.matrix() == v.matrix());
  }
  SUBCASE("unit column selection") {
    Var a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
    Var e = tape.constant(Tensor::matrix({{1}, {0}}));
    CHECK(ad::matmul(a, e).matrix() == Tensor::matrix({{1}, {3}}).matrix());
  }
  SUBCASE("random against triple loop") {
    Rng rng(11);
    Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 4, 2);
    Matrix expected = Matrix::Zero(3, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 4; ++k) expected(i, j) += a(i, k) * b(k, j);
    Matrix got = ad::matmul(tape.constant(a), tape.constant(b)).matrix();
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("shape mismatch names both shapes") {
    Var a = tape.constant(Matrix(Matrix::Zero(2, 3)));
    Var b = tape.constant(Matrix(Matrix::Zero(2, 3)));
    try {
      ad::matmul(a, b);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string what = e.what();
      CHECK(what.find("[2x3] x [2x3]") != std::string::npos);
    }
  }
}

TEST_CASE("elementwise nonlinearities") {
  Tape<double> tape;
  Var z = tape.constant(Tensor::vector({0.0, 2.0}));
  Matrix s = ad::sigmoid(z).matrix();
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 1) == doctest::Approx(kSigmoid2).epsilon(1e-15));
  CHECK(ad::tanh(z).matrix()(0, 0) == 0.0);
  Var a = tape.constant(Tensor::vector({1.0, 2.0}));
  Var b = tape.constant(Tensor::vector({1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(a + b, DimensionError);
  CHECK_THROWS_AS(a * b, DimensionError);
  CHECK_THROWS_AS(a - b, DimensionError);

  Rng rng(3);
  Var big = tape.constant(random_matrix(rng, 4, 5, -30, 30));
  Matrix sg = ad::sigmoid(big).matrix(), th = ad::tanh(big).matrix();
  CHECK(sg.minCoeff() > 0.0);
  CHECK(sg.maxCoeff() < 1.0);
  CHECK(th.cwiseAbs().maxCoeff() <= 1.0);
  Matrix th_mid = ad::tanh(tape.constant(random_matrix(rng, 4, 5, -15, 15))).matrix();
  CHECK(th_mid.cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("concat and split") {
  Tape<double> tape;
  Var a = tape.constant(Tensor::vector({1, 2}));
  Var b = tape.constant(Tensor::vector({3}));
  Var c = ad::concat<double>({a, b}, 0);
  CHECK(c.value() == Tensor::vector({1, 2, 3}));
  auto parts = ad::split(c, {2, 1}, 0);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].value() == Tensor::vector({1, 2}));
  CHECK(parts[1].value() == Tensor::vector({3}));
  CHECK_THROWS_AS(ad::split(c, {2, 2}, 0), DimensionError);

  Var m1 = tape.constant(Matrix(Matrix::Ones(2, 3)));
  Var m2 = tape.constant(Matrix(Matrix::Ones(3, 3)));
  CHECK_THROWS_AS(ad::concat<double>({m1, m2}, 1), DimensionError);
  CHECK(ad::concat<double>({m1, m2}, 0).shape() == Shape{5, 3});

  // split(concat(xs)) == xs and concat(split(x)) == x, bitwise, on random shapes.
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int axis = static_cast<int>(rng.uniform_int(0, 1));
    const Index fixed = rng.uniform_int(1, 4);
    const Index n = rng.uniform_int(1, 4);
    std::vector<Var> xs;
    std::vector<Index> sizes;
    for (Index k = 0; k < n; ++k) {
      const Index len = rng.uniform_int(1, 5);
      sizes.push_back(len);
      xs.push_back(tape.constant(axis == 0 ? random_matrix(rng, len, fixed) : random_matrix(rng, fixed, len)));
    }
    Var joined = ad::concat(xs, axis);
    auto back = ad::split(joined, sizes, axis);
    for (std::size_t k = 0; k < xs.size(); ++k) CHECK(back[k].value() == xs[k].value());
    CHECK(ad::concat(back, axis).value() == joined.value());
  }
}

TEST_CASE("softmax") {
  Tape<double> tape;
  CHECK(ad::softmax(tape.constant(Tensor::vector({0, 0}))).value() == Tensor::vector({0.5, 0.5}));
  for (double c : {-40.0, 0.0, 3.0, 700.0}) {
    Matrix s = ad::softmax(tape.constant(Tensor::vector({c, c, c}))).matrix();
    for (Index i = 0; i < 3; ++i) CHECK(s(0, i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  Matrix s = ad::softmax(tape.constant(Tensor::vector({2, 0}))).matrix();
  CHECK(s(0, 0) == doctest::Approx(kSigmoid2).epsilon(1e-15));
  CHECK(s(0, 1) == doctest::Approx(1 - kSigmoid2).epsilon(1e-14));

  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Index k = rng.uniform_int(1, 12);
    Matrix z = random_matrix(rng, 1, k, -10, 10);
    const double shift = rng.uniform(-50, 50);
    Matrix p = ad::softmax(tape.constant(z)).matrix();
    Matrix q = ad::softmax(tape.constant(Matrix(z.array() + shift))).matrix();
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK(p.minCoeff() > 0.0);
    CHECK((p - q).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("bce_loss") {
  Tape<double> tape;
  Rng rng(21);
  SUBCASE("constant one half gives ln 2") {
    for (int trial = 0; trial < 20; ++trial) {
      Matrix target = armin::testing::random_bits(rng, 5, 6);
      Matrix mask = armin::testing::random_bits(rng, 5, 6);
      mask(0, 0) = 1;
      Var p = tape.constant(Matrix(Matrix::Constant(5, 6, 0.5)));
      CHECK(std::abs(ad::bce_loss(p, target, mask).value().item() - std::numbers::ln2) < 1e-12);
    }
  }
  SUBCASE("perfect prediction") {
    Matrix target = armin::testing::random_bits(rng, 4, 6);
    Var p = tape.constant(target);
    CHECK(ad::bce_loss(p, target, Matrix(Matrix::Ones(4, 6))).value().item() <= 1e-11);
  }
  SUBCASE("random instance against loop oracle") {
    Matrix pred = random_matrix(rng, 3, 4, 0.01, 0.99);
    Matrix target = armin::testing::random_bits(rng, 3, 4);
    Matrix mask = armin::testing::random_bits(rng, 3, 4);
    mask(1, 1) = 1;
    double total = 0, count = 0;
    for (Index i = 0; i < 3; ++i) {
      for (Index j = 0; j < 4; ++j) {
        if (mask(i, j) == 0) continue;
        total += -(target(i, j) * std::log(pred(i, j)) + (1 - target(i, j)) * std::log(1 - pred(i, j)));
        count += 1;
      }
    }
    CHECK(ad::bce_loss(tape.constant(pred), target, mask).value().item() ==
          doctest::Approx(total / count).epsilon(1e-14));
  }
  SUBCASE("empty mask") {
    Var p = tape.constant(Matrix(Matrix::Constant(2, 2, 0.5)));
    CHECK_THROWS_WITH_AS(ad::bce_loss(p, Matrix(Matrix::Zero(2, 2)), Matrix(Matrix::Zero(2, 2))),
                         "empty loss mask", ContractError);
  }
}

TEST_CASE("ce_loss") {
  Tape<double> tape;
  std::vector<int> ys{3, 200, 17, 0};
  Var uniform = tape.constant(Matrix(Matrix::Zero(4, 256)));
  CHECK(ad::ce_loss(uniform, std::span<const int>(ys)).value().item() ==
        doctest::Approx(std::log(256.0)).epsilon(1e-14));
  CHECK(ad::ce_loss(uniform, std::span<const int>(ys), ad::LogBase::two).value().item() ==
        doctest::Approx(8.0).epsilon(1e-14));

  Matrix peaked = Matrix::Zero(4, 256);
  for (std::size_t r = 0; r < ys.size(); ++r) peaked(static_cast<Index>(r), ys[r]) = 20.0;
  CHECK(ad::ce_loss(tape.constant(peaked), std::span<const int>(ys)).value().item() <= 1e-6);

  Rng rng(4);
  Matrix z = random_matrix(rng, 5, 7, -3, 3);
  std::vector<int> t{0, 6, 3, 3, 1};
  double total = 0;
  for (Index r = 0; r < 5; ++r) {
    double denom = 0;
    for (Index c = 0; c < 7; ++c) denom += std::exp(z(r, c));
    total += -std::log(std::exp(z(r, t[static_cast<std::size_t>(r)])) / denom);
  }
  CHECK(ad::ce_loss(tape.constant(z), std::span<const int>(t)).value().item() ==
        doctest::Approx(total / 5).epsilon(1e-13));

  std::vector<int> bad{0, 7, 0, 0, 0};
  CHECK_THROWS_AS(ad::ce_loss(tape.constant(z), std::span<const int>(bad)), IndexError);
}

TEST_CASE("backward") {
  Rng rng(8);
  Tensor theta = random_tensor(rng, {3, 4});
  SUBCASE("linear functional") {
    Tape<double> tape;
    Var p = tape.variable(theta);
    tape.backward(ad::sum(p));
    CHECK(tape.grad(p).matrix() == Matrix::Ones(3, 4));
  }
  SUBCASE("quadratic") {
    Tape<double> tape;
    Var p = tape.variable(theta);
    tape.backward(ad::scale(ad::sum(p * p), 0.5));
    CHECK((tape.grad(p).matrix() - theta.matrix()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(tape.grad(p).shape() == theta.shape());
  }
  SUBCASE("non-scalar loss") {
    Tape<double> tape;
    Var p = tape.variable(theta);
    CHECK_THROWS_AS(tape.backward(p), ContractError);
  }
  SUBCASE("constants receive no adjoint") {
    Tape<double> tape;
    Var p = tape.variable(theta);
    Var c = tape.constant(theta);
    tape.backward(ad::sum(p * c));
    CHECK(!tape.requires_grad(c));
    CHECK(tape.grad(c).matrix().isZero());
  }
}

TEST_CASE("finite_diff_check") {
  Rng rng(2);
  Tensor theta = random_tensor(rng, {6});
  Tensor coeff = random_tensor(rng, {6});
  SUBCASE("exact linearity") {
    Objective<double> f = [&](std::span<const Tensor> p, std::vector<Tensor>* g) {
      if (g) *g = {coeff};
      return p[0].matrix().cwiseProduct(coeff.matrix()).sum();
    };
    CHECK(finite_diff_check(f, {theta}).max_error < 1e-9);
  }
  SUBCASE("sigmoid sum") {
    auto f = weighted_objective([](std::vector<Var>& v) { return ad::sigmoid(v[0]); }, Matrix::Ones(1, 6));
    CHECK(finite_diff_check(f, {theta}).max_error < 1e-7);
  }
  SUBCASE("non-reproducible objective") {
    int calls = 0;
    Objective<double> f = [&](std::span<const Tensor>, std::vector<Tensor>* g) {
      if (g) *g = {Tensor::zeros({6})};
      return double(++calls);
    };
    CHECK_THROWS_AS(finite_diff_check(f, {theta}), DeterminismError);
  }
}

TEST_CASE("every primitive matches central differences") {
  Rng rng(1234);
  auto check = [&](auto f, std::vector<Shape> shapes, Shape out) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Tensor> inputs;
      for (const auto& s : shapes) inputs.push_back(random_tensor(rng, s));
      Tensor w = random_tensor(rng, out);
      auto obj = weighted_objective(f, w.matrix());
      const auto r = finite_diff_check(obj, inputs);
      CHECK(r.max_error < 1e-6);
    }
  };
  check([](std::vector<Var>& v) { return ad::matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}, {3, 2});
  check([](std::vector<Var>& v) { return ad::affine(v[0], v[1], v[2]); }, {{2, 4}, {3, 4}, {3}}, {2, 3});
  check([](std::vector<Var>& v) { return ad::linear(v[0], v[1]); }, {{2, 4}, {3, 4}}, {2, 3});
  check([](std::vector<Var>& v) { return v[0] + v[1]; }, {{2, 3}, {2, 3}}, {2, 3});
  check([](std::vector<Var>& v) { return v[0] - v[1]; }, {{2, 3}, {2, 3}}, {2, 3});
  check([](std::vector<Var>& v) { return v[0] * v[1]; }, {{2, 3}, {2, 3}}, {2, 3});
  check([](std::vector<Var>& v) { return -v[0]; }, {{2, 3}}, {2, 3});
  check([](std::vector<Var>& v) { return ad::scale(v[0], -1.7); }, {{2, 3}}, {2, 3});
  check([](std::vector<Var>& v) { return ad::sigmoid(v[0]); }, {{2, 3}}, {2, 3});
  check([](std::vector<Var>& v) { return ad::tanh(v[0]); }, {{2, 3}}, {2, 3});
  check([](std::vector<Var>& v) { return ad::softmax(v[0]); }, {{3, 5}}, {3, 5});
  check([](std::vector<Var>& v) { return ad::concat<double>({v[0], v[1]}, 1); }, {{2, 3}, {2, 2}}, {2, 5});
  check([](std::vector<Var>& v) { return ad::concat<double>({v[0], v[1]}, 0); }, {{2, 3}, {1, 3}}, {3, 3});
  check([](std::vector<Var>& v) { return ad::slice(v[0], 1, 2, 1); }, {{2, 4}}, {2, 2});
  check([](std::vector<Var>& v) { return ad::slice(v[0], 1, 2, 0); }, {{4, 3}}, {2, 3});

  // Losses: scalar outputs, weight 1.
  Matrix target = armin::testing::random_bits(rng, 3, 4);
  Matrix mask = armin::testing::random_bits(rng, 3, 4);
  mask(0, 0) = 1;
  check([&](std::vector<Var>& v) { return ad::bce_loss(ad::sigmoid(v[0]), target, mask); }, {{3, 4}}, {});
  std::vector<int> ys{1, 0, 4};
  check([&](std::vector<Var>& v) { return ad::ce_loss(v[0], std::span<const int>(ys)); }, {{3, 5}}, {});
  check([&](std::vector<Var>& v) { return ad::ce_loss(v[0], std::span<const int>(ys), ad::LogBase::two); },
        {{3, 5}}, {});
}

TEST_CASE("single precision tape") {
  Tape<float> tape;
  BasicVar<float> p = tape.variable(BasicTensor<float>::vector({1.f, -2.f, 0.5f}));
  tape.backward(ad::sum(ad::mul(p, p)));
  CHECK(tape.grad(p)[1] == doctest::Approx(-4.f));
}

TEST_CASE("allocation accounting grows with recorded values") {
  Tape<double> tape;
  Var a = tape.variable(Tensor::zeros({10, 10}));
  const auto before = tape.allocated_bytes();
  Var b = ad::tanh(a);
  CHECK(tape.allocated_bytes() == before + 100 * sizeof(double));
  tape.backward(ad::sum(b));
  CHECK(tape.peak_bytes() >= tape.allocated_bytes());
  (void)b;
}
