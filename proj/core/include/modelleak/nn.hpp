// Copyright 2026 The Modelleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Minimal dense feed-forward network with hand-written backprop and a
// bias-corrected Adam optimizer. Everything is double precision,
// single-threaded and deterministic given the seeds it is handed.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace modelleak {

// Probabilities are floored at this value inside logarithms.
inline constexpr double kProbFloor = 1e-12;

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }
};

enum class Activation { kRelu, kTanh };

// Layer widths: input -> hidden... -> output. hidden_dims must be
// non-empty; the last hidden layer is the exposed representation.
struct MlpSpec {
  size_t input_dim = 0;
  std::vector<size_t> hidden_dims;
  size_t output_dim = 0;
  Activation activation = Activation::kRelu;

  void validate() const;
  // [input, hidden..., output]
  std::vector<size_t> layer_dims() const;
};

// Dense MLP parameters. weights[l] has shape dims[l+1] x dims[l].
struct Mlp {
  MlpSpec spec;
  std::vector<Matrix> weights;
  std::vector<Vec> biases;

  // Gaussian init scaled by 1/sqrt(fan_in), zero biases.
  static Mlp random_init(const MlpSpec& spec, uint64_t seed);

  size_t num_layers() const { return weights.size(); }
  size_t parameter_count() const;
  bool finite() const;
};

// Post-activation values per layer; activations[0] is the input and
// activations[L] holds the raw output logits (no activation applied).
struct ForwardTrace {
  std::vector<Vec> activations;

  const Vec& input() const { return activations.front(); }
  const Vec& logits() const { return activations.back(); }
  // Last hidden activation (the representation layer).
  const Vec& representation() const {
    return activations[activations.size() - 2];
  }
};

ForwardTrace forward_trace(const Mlp& net, const Vec& input);

// Same shapes as the model parameters.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vec> biases;

  static Gradients zeros_like(const Mlp& net);
  void accumulate(const Gradients& other);
  void scale(double s);
  bool finite() const;
};

// Backprop from dL/dlogits through the trace. The trace must come from
// forward_trace on the same net.
Gradients backward(const Mlp& net, const ForwardTrace& trace,
                   const Vec& dlogits);

struct TrainConfig {
  int epochs = 5;
  double learning_rate = 0.01;
  int batch_size = 16;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  Gradients first_moment;
  Gradients second_moment;
  int64_t step = 0;

  static AdamState zeros_like(const Mlp& net);
};

// One bias-corrected Adam update. Throws NumericError on non-finite
// gradients or if the update leaves the parameters non-finite.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg);

// softmax(logits / temperature), numerically stabilised by
// max-subtraction. temperature must be > 0 here; the tau = 0 hard-label
// case is a defense-side transform, not a softmax.
Vec softmax(const Vec& logits, double temperature = 1.0);

// -ln(p[gold]) with the probability floor.
double cross_entropy(const Vec& posterior, size_t gold);

// -sum_i teacher[i] * ln(softmax(student_logits)[i]).
double soft_cross_entropy(const Vec& student_logits, const Vec& teacher);

// sum_i p[i] * (ln p[i] - ln q[i]) with the probability floor.
double kl_divergence(const Vec& p, const Vec& q);

// Per-sample loss callback for the generic loop: fills dlogits and
// returns the loss for sample `idx` with the given logits.
using SampleLoss = std::function<double(size_t idx, const Vec& logits,
                                        Vec& dlogits)>;

struct TrainLog {
  std::vector<double> epoch_mean_loss;
};

// Mini-batch training: seeded Fisher-Yates shuffle per epoch, gradient
// averaged over each batch, one Adam step per batch.
TrainLog train_mlp(Mlp& net, const std::vector<Vec>& inputs, SampleLoss loss,
                   const TrainConfig& cfg);

// Convenience wrappers over train_mlp.
TrainLog train_mlp_hard(Mlp& net, const std::vector<Vec>& inputs,
                        const std::vector<size_t>& labels,
                        const TrainConfig& cfg);
TrainLog train_mlp_soft(Mlp& net, const std::vector<Vec>& inputs,
                        const std::vector<Vec>& teacher_posteriors,
                        const TrainConfig& cfg);

}  // namespace modelleak
