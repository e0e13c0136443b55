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

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "armin/cells.hpp"
#include "armin/memory.hpp"
#include "armin/tasks.hpp"

namespace armin {

enum class ModelKind { armin, lstm };
/// bits: sigmoid outputs scored with masked BCE. logits: softmax over a vocabulary.
enum class OutputKind { bits, logits };

ModelKind parse_model_kind(std::string_view name);
std::string to_string(ModelKind kind);

struct ModelDims {
  Index d_i = 0;
  Index d_h = 0;
  Index d_r = 0;    // ignored for LSTM
  Index n_mem = 0;  // ignored for LSTM
  Index d_o = 0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

std::string to_string(const ModelDims& dims);

/// A recurrent core (ARMIN or LSTM) followed by an affine output layer.
struct Model {
  ModelKind kind = ModelKind::armin;
  OutputKind output = OutputKind::bits;
  ModelDims dims;
  ArminParams armin;
  LstmParams lstm;
  Tensor w_out, b_out;

  static Model make(ModelKind kind, const ModelDims& dims, OutputKind output, Rng& rng);

  /// Width of the cell output fed to the output layer.
  Index output_in() const { return kind == ModelKind::armin ? dims.d_h + dims.d_r : dims.d_h; }

  /// Every trainable tensor, named "armin.w_ig", "lstm.w", "out.w", ...
  std::vector<std::pair<std::string, Tensor*>> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;

  Index param_count(bool include_io = true) const;
};

/// Count for a model built with `dims` without allocating it.
Index model_param_count(ModelKind kind, const ModelDims& dims, bool include_io = true);

/// Carried recurrent state for a batch: hidden state, LSTM cell state and the
/// memory contents with its fill/read bookkeeping.
struct RecurrentState {
  Matrix h;
  Matrix c;
  Matrix memory;  // [B x n_mem*d_r]
  Index filled = 0;
  std::vector<Index> last_read;
  bool read_pending = false;

  static RecurrentState zeros(const Model& model, Index batch);
};

/// Model weights registered on a tape, in parameters() order.
struct BoundModel {
  ArminWeights<Var> armin;
  LstmWeights<Var> lstm;
  Var w_out, b_out;
  std::vector<Var> params;
};

BoundModel bind(Tape<double>& tape, const Model& model);

struct TapeState {
  Var h, c;
  TapeMemory memory;
};

/// State values enter the tape as constants, so nothing flows back into
/// whatever produced them.
TapeState bind_state(Tape<double>& tape, const Model& model, const RecurrentState& state);
RecurrentState detach(const TapeState& state);
/// Detached copy of `state` on the same tape.
TapeState detach_on_tape(const TapeState& state);

/// Supplies Gumbel noise per step: frozen blocks, fresh draws, or zeros.
struct NoiseSource {
  const std::vector<Matrix>* frozen = nullptr;
  Rng* rng = nullptr;

  Matrix next(Index step, Index rows, Index k) const;
};

struct StepOptions {
  AddressMode mode = AddressMode::straight_through;
  double tau = 1.0;
};

/// One time step: address, read, cell, write, output layer. Returns the
/// output pre-activation [B x d_o].
Var model_step(const Model& model, const BoundModel& bound, TapeState& state, const Var& x,
               const StepOptions& options, const Matrix& noise, AddressSample* address_out = nullptr);

struct SequenceOptions {
  AddressMode mode = AddressMode::straight_through;
  double tau = 1.0;
  NoiseSource noise;
  bool compute_grads = true;
};

struct SequenceResult {
  double loss = 0;
  std::vector<Tensor> grads;   // parameters() order
  Matrix outputs;              // sigmoid probabilities [T x d_o]
  std::vector<AddressSample> addresses;
  std::size_t peak_bytes = 0;
};

/// Full BPTT over one task sample from empty memory and zero state.
SequenceResult run_sequence(const Model& model, const TaskSample& sample, const SequenceOptions& options);

/// Records a chunk of next-symbol prediction onto `tape`, continuing from
/// `state`; returns the mean loss in nats.
Var chunk_loss(Tape<double>& tape, const Model& model, const BoundModel& bound, TapeState& state,
               const CharChunk& chunk, const SequenceOptions& options);

struct ChunkResult {
  double loss = 0;  // nats per symbol
  std::vector<Tensor> grads;
  RecurrentState state;
  std::size_t peak_bytes = 0;
};

ChunkResult run_chunk(const Model& model, const RecurrentState& carry, const CharChunk& chunk,
                      const SequenceOptions& options);

/// Tape-free forward with argmax addressing and discrete-slot memory.
class InferenceRunner {
 public:
  explicit InferenceRunner(const Model& model, Index batch = 1);

  /// Output pre-activation [B x d_o] for input rows x [B x d_i].
  Matrix step(const Matrix& x);

  void reset();
  RecurrentState state() const;
  void set_state(const RecurrentState& state);
  const std::vector<InferenceBank>& banks() const { return banks_; }
  const std::vector<Index>& last_address() const { return last_address_; }

 private:
  const Model& model_;
  Index batch_;
  ArminWeights<Matrix> armin_;
  LstmWeights<Matrix> lstm_;
  Matrix w_out_, b_out_;
  Matrix h_, c_;
  std::vector<InferenceBank> banks_;
  std::vector<Index> last_address_;
};

/// Sigmoid probabilities [T x d_o] for one sample, inference mode.
Matrix infer_sequence(const Model& model, const Matrix& inputs);

/// Masked BCE of probabilities against a sample (same clamp as the tape loss).
double masked_bce(const Matrix& probs, const TaskSample& sample);

}  // namespace armin
