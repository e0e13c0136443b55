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


#include "armin/diagnostics.hpp"

namespace armin {

namespace {

/// Sigmoid whose backward multiplies by s instead of s(1 - s).
Var faulty_sigmoid(const Var& a) {
  Matrix s = kernels::sigmoid(a.matrix());
  return a.tape().record(Tensor(a.shape(), s), {a}, [a](Tape<double>& t, const Var& self, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(self.matrix()));
  });
}

}  // namespace

GradcheckReport gradcheck_model(const GradcheckSetup& setup) {
  Rng rng(setup.seed);
  Model model = Model::make(setup.kind, setup.dims, OutputKind::bits, rng);
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (auto& [name, t] : model.parameters()) {
    for (Index i = 0; i < t->size(); ++i) (*t)[i] = rng.uniform(-0.5, 0.5);
    params.push_back(*t);
    names.push_back(name);
  }

  const Index T = setup.steps;
  Matrix inputs(T, setup.dims.d_i), targets(T, setup.dims.d_o);
  for (Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = rng.uniform(-1.0, 1.0);
  for (Index i = 0; i < targets.size(); ++i) targets.data()[i] = rng.bit() ? 1.0 : 0.0;
  const Matrix mask = Matrix::Ones(T, setup.dims.d_o);
  std::vector<Matrix> noise;
  if (setup.kind == ModelKind::armin) {
    for (Index t = 0; t < T; ++t) noise.push_back(gumbel_noise(1, setup.dims.n_mem, rng));
  }

  Objective<double> objective = [&](std::span<const Tensor> ps, std::vector<Tensor>* grads) {
    Model m = model;
    std::size_t k = 0;
    for (auto& [name, t] : m.parameters()) *t = ps[k++];
    Tape<double> tape;
    BoundModel bound = bind(tape, m);
    TapeState state = bind_state(tape, m, RecurrentState::zeros(m, 1));
    const StepOptions step{setup.mode, setup.tau};
    std::vector<Var> outs;
    for (Index t = 0; t < T; ++t) {
      Var x = tape.constant(Matrix(inputs.row(t)));
      const Matrix n = setup.kind == ModelKind::armin ? noise[static_cast<std::size_t>(t)] : Matrix();
      Var pre = model_step(m, bound, state, x, step, n);
      outs.push_back(setup.inject_fault ? faulty_sigmoid(pre) : ad::sigmoid(pre));
    }
    Var loss = ad::bce_loss(ad::concat(outs, 0), targets, mask);
    if (grads) {
      tape.backward(loss);
      grads->clear();
      for (const Var& p : bound.params) grads->push_back(tape.grad(p));
    }
    return loss.value().item();
  };

  const GradCheckResult r = finite_diff_check(objective, params, setup.options);
  GradcheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    report.tensors.push_back({names[k], params[k].size(), r.per_tensor[k]});
  }
  report.max_error = r.max_error;
  report.coords_checked = r.coords_checked;
  return report;
}

}  // namespace armin
