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

#include "modelleak/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modelleak/error.hpp"
#include "modelleak/rng.hpp"

namespace modelleak {

namespace {

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

double activate(double z, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
  }
  return z;
}

// Derivative expressed through the activated value.
double activate_grad(double a, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return a > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - a * a;
  }
  return 1.0;
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (output_dim == 0) throw ConfigError("output_dim must be positive");
  if (hidden_dims.empty()) throw ConfigError("hidden_dims must be non-empty");
  for (size_t d : hidden_dims) {
    if (d == 0) throw ConfigError("hidden dims must be positive");
  }
}

std::vector<size_t> MlpSpec::layer_dims() const {
  std::vector<size_t> dims;
  dims.reserve(hidden_dims.size() + 2);
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);
  return dims;
}

Mlp Mlp::random_init(const MlpSpec& spec, uint64_t seed) {
  spec.validate();
  Mlp net;
  net.spec = spec;
  RngStream rng(derive_seed(seed, "mlp-init"));
  const auto dims = spec.layer_dims();
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Matrix w(dims[l + 1], dims[l]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (double& x : w.data) x = rng.gaussian() * scale;
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(dims[l + 1], 0.0);
  }
  return net;
}

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].data.size() + biases[l].size();
  }
  return n;
}

bool Mlp::finite() const {
  for (size_t l = 0; l < weights.size(); ++l) {
    if (!all_finite(weights[l].data) || !all_finite(biases[l])) return false;
  }
  return true;
}

ForwardTrace forward_trace(const Mlp& net, const Vec& input) {
  if (input.size() != net.spec.input_dim) {
    throw ShapeError("forward: input has dim " + std::to_string(input.size()) +
                     ", model expects " + std::to_string(net.spec.input_dim));
  }
  ForwardTrace trace;
  trace.activations.reserve(net.num_layers() + 1);
  trace.activations.push_back(input);
  const size_t last = net.num_layers() - 1;
  for (size_t l = 0; l < net.num_layers(); ++l) {
    const Matrix& w = net.weights[l];
    const Vec& b = net.biases[l];
    const Vec& in = trace.activations.back();
    Vec out(w.rows);
    for (size_t r = 0; r < w.rows; ++r) {
      double z = b[r];
      const double* wr = &w.data[r * w.cols];
      for (size_t c = 0; c < w.cols; ++c) z += wr[c] * in[c];
      out[r] = (l == last) ? z : activate(z, net.spec.activation);
    }
    trace.activations.push_back(std::move(out));
  }
  return trace;
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (size_t l = 0; l < net.num_layers(); ++l) {
    g.weights.emplace_back(net.weights[l].rows, net.weights[l].cols);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

void Gradients::accumulate(const Gradients& other) {
  for (size_t l = 0; l < weights.size(); ++l) {
    for (size_t i = 0; i < weights[l].data.size(); ++i) {
      weights[l].data[i] += other.weights[l].data[i];
    }
    for (size_t i = 0; i < biases[l].size(); ++i) {
      biases[l][i] += other.biases[l][i];
    }
  }
}

void Gradients::scale(double s) {
  for (size_t l = 0; l < weights.size(); ++l) {
    for (double& x : weights[l].data) x *= s;
    for (double& x : biases[l]) x *= s;
  }
}

bool Gradients::finite() const {
  for (size_t l = 0; l < weights.size(); ++l) {
    if (!all_finite(weights[l].data) || !all_finite(biases[l])) return false;
  }
  return true;
}

Gradients backward(const Mlp& net, const ForwardTrace& trace,
                   const Vec& dlogits) {
  const size_t layers = net.num_layers();
  if (trace.activations.size() != layers + 1) {
    throw ShapeError("backward: trace does not match model depth");
  }
  if (dlogits.size() != net.spec.output_dim) {
    throw ShapeError("backward: dlogits has wrong dimension");
  }
  Gradients g = Gradients::zeros_like(net);
  Vec delta = dlogits;  // dL/d(pre-activation) of the current layer
  for (size_t l = layers; l-- > 0;) {
    const Vec& in = trace.activations[l];
    Matrix& gw = g.weights[l];
    for (size_t r = 0; r < gw.rows; ++r) {
      const double d = delta[r];
      double* row = &gw.data[r * gw.cols];
      for (size_t c = 0; c < gw.cols; ++c) row[c] += d * in[c];
      g.biases[l][r] += d;
    }
    if (l == 0) break;
    // Propagate to the previous layer through W^T and the activation.
    const Matrix& w = net.weights[l];
    Vec prev(w.cols, 0.0);
    for (size_t r = 0; r < w.rows; ++r) {
      const double d = delta[r];
      const double* row = &w.data[r * w.cols];
      for (size_t c = 0; c < w.cols; ++c) prev[c] += d * row[c];
    }
    for (size_t c = 0; c < w.cols; ++c) {
      prev[c] *= activate_grad(in[c], net.spec.activation);
    }
    delta = std::move(prev);
  }
  return g;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate < 1.0)) {
    throw ConfigError("learning_rate must be in (0, 1)");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (adam_epsilon <= 0.0) throw ConfigError("adam_epsilon must be positive");
}

AdamState AdamState::zeros_like(const Mlp& net) {
  AdamState s;
  s.first_moment = Gradients::zeros_like(net);
  s.second_moment = Gradients::zeros_like(net);
  return s;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (!grads.finite()) throw NumericError("adam_step: non-finite gradient");
  state.step += 1;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t l = 0; l < net.num_layers(); ++l) {
    auto update = [&](double& w, double g, double& m, double& v) {
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      w -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
    };
    Matrix& w = net.weights[l];
    for (size_t i = 0; i < w.data.size(); ++i) {
      update(w.data[i], grads.weights[l].data[i],
             state.first_moment.weights[l].data[i],
             state.second_moment.weights[l].data[i]);
    }
    Vec& b = net.biases[l];
    for (size_t i = 0; i < b.size(); ++i) {
      update(b[i], grads.biases[l][i], state.first_moment.biases[l][i],
             state.second_moment.biases[l][i]);
    }
  }
  if (!net.finite()) throw NumericError("adam_step: parameters became non-finite");
}

Vec softmax(const Vec& logits, double temperature) {
  if (logits.empty()) throw EmptyInput("softmax: empty logits");
  if (!(temperature > 0.0)) {
    throw ConfigError("softmax: temperature must be positive");
  }
  if (!all_finite(logits)) throw NumericError("softmax: non-finite logits");
  Vec scaled(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  const double m = *std::max_element(scaled.begin(), scaled.end());
  double sum = 0.0;
  for (double& x : scaled) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : scaled) x /= sum;
  return scaled;
}

double cross_entropy(const Vec& posterior, size_t gold) {
  if (gold >= posterior.size()) {
    throw InvalidLabel("cross_entropy: label " + std::to_string(gold) +
                       " out of range for " + std::to_string(posterior.size()) +
                       " classes");
  }
  return -std::log(std::max(posterior[gold], kProbFloor));
}

double soft_cross_entropy(const Vec& student_logits, const Vec& teacher) {
  if (student_logits.size() != teacher.size()) {
    throw ShapeError("soft_cross_entropy: dimension mismatch");
  }
  const Vec p = softmax(student_logits, 1.0);
  double loss = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    loss -= teacher[i] * std::log(std::max(p[i], kProbFloor));
  }
  return loss;
}

double kl_divergence(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) {
    throw ShapeError("kl_divergence: dimension mismatch");
  }
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * (std::log(std::max(p[i], kProbFloor)) -
                  std::log(std::max(q[i], kProbFloor)));
  }
  return kl;
}

TrainLog train_mlp(Mlp& net, const std::vector<Vec>& inputs, SampleLoss loss,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (inputs.empty()) throw EmptyDataset("train: empty dataset");
  AdamState state = AdamState::zeros_like(net);
  RngStream shuffle_rng(derive_seed(cfg.seed, "epoch-shuffle"));
  std::vector<size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TrainLog log;
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  Vec dlogits(net.spec.output_dim);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += batch) {
      const size_t end = std::min(start + batch, order.size());
      Gradients acc = Gradients::zeros_like(net);
      for (size_t k = start; k < end; ++k) {
        const size_t idx = order[k];
        ForwardTrace trace = forward_trace(net, inputs[idx]);
        std::fill(dlogits.begin(), dlogits.end(), 0.0);
        epoch_loss += loss(idx, trace.logits(), dlogits);
        acc.accumulate(backward(net, trace, dlogits));
      }
      acc.scale(1.0 / static_cast<double>(end - start));
      adam_step(net, acc, state, cfg);
    }
    log.epoch_mean_loss.push_back(epoch_loss /
                                  static_cast<double>(inputs.size()));
  }
  return log;
}

TrainLog train_mlp_hard(Mlp& net, const std::vector<Vec>& inputs,
                        const std::vector<size_t>& labels,
                        const TrainConfig& cfg) {
  if (inputs.size() != labels.size()) {
    throw ShapeError("train: inputs and labels differ in length");
  }
  for (size_t y : labels) {
    if (y >= net.spec.output_dim) {
      throw InvalidLabel("train: label out of range");
    }
  }
  return train_mlp(
      net, inputs,
      [&](size_t idx, const Vec& logits, Vec& dlogits) {
        const Vec p = softmax(logits, 1.0);
        for (size_t i = 0; i < p.size(); ++i) dlogits[i] = p[i];
        dlogits[labels[idx]] -= 1.0;
        return cross_entropy(p, labels[idx]);
      },
      cfg);
}

TrainLog train_mlp_soft(Mlp& net, const std::vector<Vec>& inputs,
                        const std::vector<Vec>& teacher_posteriors,
                        const TrainConfig& cfg) {
  if (inputs.size() != teacher_posteriors.size()) {
    throw ShapeError("train: inputs and teacher posteriors differ in length");
  }
  for (const Vec& t : teacher_posteriors) {
    if (t.size() != net.spec.output_dim) {
      throw ShapeError("train: teacher posterior has wrong dimension");
    }
  }
  return train_mlp(
      net, inputs,
      [&](size_t idx, const Vec& logits, Vec& dlogits) {
        const Vec p = softmax(logits, 1.0);
        const Vec& t = teacher_posteriors[idx];
        double loss = 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
          dlogits[i] = p[i] - t[i];
          loss -= t[i] * std::log(std::max(p[i], kProbFloor));
        }
        return loss;
      },
      cfg);
}

}  // namespace modelleak
