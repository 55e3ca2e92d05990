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

#include "modelleak/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modelleak/error.hpp"

namespace modelleak {

namespace {

using nlohmann::json;

void check_simplex(const Vec& p) {
  if (p.empty()) throw EmptyInput("posterior is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidInput("posterior entries must be finite and non-negative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InvalidInput("posterior does not sum to 1");
  }
}

size_t argmax_low(const Vec& p) {
  size_t best = 0;
  for (size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

size_t argmin_high(const Vec& p) {
  size_t best = 0;
  for (size_t i = 1; i < p.size(); ++i) {
    if (p[i] <= p[best]) best = i;
  }
  return best;
}

Vec renormalize_or_uniform(Vec p) {
  double sum = 0.0;
  for (double v : p) sum += v;
  if (sum <= 0.0) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  for (double& v : p) v /= sum;
  return p;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void validate_defense(const DefenseConfig& cfg) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Temperature>) {
          if (d.tau < 0.0) throw ConfigError("temperature tau must be >= 0");
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          if (d.sigma < 0.0) throw ConfigError("gaussian sigma must be >= 0");
        } else if constexpr (std::is_same_v<T, ReverseSigmoid>) {
          if (d.beta < 0.0) throw ConfigError("reverse sigmoid beta must be >= 0");
          if (d.gamma <= 0.0) throw ConfigError("reverse sigmoid gamma must be > 0");
          if (d.eta < 0.0) throw ConfigError("reverse sigmoid eta must be >= 0");
        } else if constexpr (std::is_same_v<T, TopK>) {
          if (d.k < 1) throw ConfigError("top-k k must be >= 1");
        } else if constexpr (std::is_same_v<T, MostLeast>) {
          if (!(d.epsilon > 0.0 && d.epsilon < 0.5)) {
            throw ConfigError("most-least epsilon must be in (0, 0.5)");
          }
        } else if constexpr (std::is_same_v<T, NastyTeacher>) {
          if (d.omega < 0.0) throw ConfigError("nasty teacher omega must be >= 0");
          if (d.tau_nt <= 0.0) throw ConfigError("nasty teacher tau must be > 0");
        }
      },
      cfg);
}

std::string defense_kind(const DefenseConfig& cfg) {
  return std::visit(
      [](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, NoDefense>) return "none";
        if constexpr (std::is_same_v<T, Temperature>) {
          return d.tau == 0.0 ? "hard_label" : "temperature";
        }
        if constexpr (std::is_same_v<T, GaussianNoise>) return "gaussian";
        if constexpr (std::is_same_v<T, ReverseSigmoid>) return "reverse_sigmoid";
        if constexpr (std::is_same_v<T, TopK>) return "top_k";
        if constexpr (std::is_same_v<T, MostLeast>) return "most_least";
        if constexpr (std::is_same_v<T, NastyTeacher>) return "nasty_teacher";
      },
      cfg);
}

json defense_to_json(const DefenseConfig& cfg) {
  json j;
  std::visit(
      [&j](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, NoDefense>) {
          j["kind"] = "none";
        } else if constexpr (std::is_same_v<T, Temperature>) {
          j["kind"] = d.tau == 0.0 ? "hard_label" : "temperature";
          if (d.tau != 0.0) j["tau"] = d.tau;
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          j["kind"] = "gaussian";
          j["sigma"] = d.sigma;
          j["seed"] = d.seed;
        } else if constexpr (std::is_same_v<T, ReverseSigmoid>) {
          j["kind"] = "reverse_sigmoid";
          j["beta"] = d.beta;
          j["gamma"] = d.gamma;
          j["eta"] = d.eta;
        } else if constexpr (std::is_same_v<T, TopK>) {
          j["kind"] = "top_k";
          j["k"] = d.k;
        } else if constexpr (std::is_same_v<T, MostLeast>) {
          j["kind"] = "most_least";
          j["epsilon"] = d.epsilon;
        } else if constexpr (std::is_same_v<T, NastyTeacher>) {
          j["kind"] = "nasty_teacher";
          j["omega"] = d.omega;
          j["tau_nt"] = d.tau_nt;
        }
      },
      cfg);
  return j;
}

DefenseConfig defense_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError("defense config needs a 'kind' tag");
  }
  const std::string kind = j.at("kind").get<std::string>();
  DefenseConfig cfg;
  if (kind == "none") {
    cfg = NoDefense{};
  } else if (kind == "temperature") {
    Temperature d;
    d.tau = j.value("tau", d.tau);
    cfg = d;
  } else if (kind == "hard_label") {
    cfg = Temperature{0.0};
  } else if (kind == "gaussian") {
    GaussianNoise d;
    d.sigma = j.value("sigma", d.sigma);
    d.seed = j.value("seed", d.seed);
    cfg = d;
  } else if (kind == "reverse_sigmoid") {
    ReverseSigmoid d;
    d.beta = j.value("beta", d.beta);
    d.gamma = j.value("gamma", d.gamma);
    d.eta = j.value("eta", d.eta);
    cfg = d;
  } else if (kind == "top_k") {
    TopK d;
    d.k = j.value("k", d.k);
    cfg = d;
  } else if (kind == "most_least") {
    MostLeast d;
    d.epsilon = j.value("epsilon", d.epsilon);
    cfg = d;
  } else if (kind == "nasty_teacher") {
    NastyTeacher d;
    d.omega = j.value("omega", d.omega);
    d.tau_nt = j.value("tau_nt", d.tau_nt);
    cfg = d;
  } else {
    throw ConfigError("unknown defense kind '" + kind + "'");
  }
  validate_defense(cfg);
  return cfg;
}

Vec temperature_scale(const Vec& logits, double tau) {
  if (tau < 0.0) throw ConfigError("temperature tau must be >= 0");
  if (tau > 0.0) return softmax(logits, tau);
  if (logits.empty()) throw EmptyInput("empty logits");
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericError("non-finite logits");
  }
  Vec out(logits.size(), 0.0);
  out[argmax_low(logits)] = 1.0;
  return out;
}

Vec gaussian_perturb(const Vec& posterior, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw ConfigError("gaussian sigma must be >= 0");
  check_simplex(posterior);
  if (sigma == 0.0) return posterior;
  Vec out = posterior;
  for (double& v : out) {
    v += rng.gaussian(0.0, sigma);
    if (v < 0.0) v = 0.0;
  }
  return renormalize_or_uniform(std::move(out));
}

Vec reverse_sigmoid(const Vec& posterior, double beta, double gamma) {
  RngStream unused(0);
  return reverse_sigmoid(posterior, beta, gamma, 0.0, unused);
}

Vec reverse_sigmoid(const Vec& posterior, double beta, double gamma,
                    double eta, RngStream& rng) {
  if (beta < 0.0) throw ConfigError("reverse sigmoid beta must be >= 0");
  if (gamma <= 0.0) throw ConfigError("reverse sigmoid gamma must be > 0");
  if (eta < 0.0) throw ConfigError("reverse sigmoid eta must be >= 0");
  check_simplex(posterior);
  if (beta == 0.0 && eta == 0.0) return posterior;

  const size_t argmax = argmax_low(posterior);
  Vec out(posterior.size());
  for (size_t i = 0; i < posterior.size(); ++i) {
    const double y =
        std::clamp(posterior[i], kProbFloor, 1.0 - kProbFloor);
    const double logit = std::log(y / (1.0 - y));
    double v = posterior[i] - beta * (logistic(gamma * logit) - 0.5);
    if (eta > 0.0 && i != argmax) v += rng.uniform(0.0, eta);
    out[i] = v < 0.0 ? 0.0 : v;
  }
  return renormalize_or_uniform(std::move(out));
}

Vec top_k_truncate(const Vec& posterior, size_t k) {
  check_simplex(posterior);
  if (k < 1 || k > posterior.size()) {
    throw ConfigError("top-k k must be in [1, num_classes]");
  }
  if (k == posterior.size()) return posterior;

  std::vector<size_t> order(posterior.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return posterior[a] > posterior[b];
  });
  Vec out(posterior.size(), 0.0);
  for (size_t i = 0; i < k; ++i) out[order[i]] = posterior[order[i]];
  return renormalize_or_uniform(std::move(out));
}

Vec most_least(const Vec& posterior, double eps) {
  check_simplex(posterior);
  if (posterior.size() < 2) {
    throw ShapeError("most_least needs at least 2 classes");
  }
  if (!(eps > 0.0 && eps < 0.5)) {
    throw ConfigError("most-least epsilon must be in (0, 0.5)");
  }
  const size_t most = argmax_low(posterior);
  const size_t least = argmin_high(posterior);
  Vec out(posterior.size(), 0.0);
  const double most_val = 0.5 + eps;
  out[most] = most_val;
  out[least] = 1.0 - most_val;  // exact complement, so the sum is exactly 1
  return out;
}

Vec apply_defense(const Vec& logits, const DefenseConfig& cfg,
                  RngStream& rng) {
  validate_defense(cfg);
  return std::visit(
      [&](const auto& d) -> Vec {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, NoDefense>) {
          return softmax(logits);
        } else if constexpr (std::is_same_v<T, Temperature>) {
          return temperature_scale(logits, d.tau);
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          return gaussian_perturb(softmax(logits), d.sigma, rng);
        } else if constexpr (std::is_same_v<T, ReverseSigmoid>) {
          return reverse_sigmoid(softmax(logits), d.beta, d.gamma, d.eta,
                                 rng);
        } else if constexpr (std::is_same_v<T, TopK>) {
          return top_k_truncate(softmax(logits), d.k);
        } else if constexpr (std::is_same_v<T, MostLeast>) {
          return most_least(softmax(logits), d.epsilon);
        } else {
          throw ConfigError(
              "nasty_teacher is a training-time defense, not a prediction "
              "transform");
        }
      },
      cfg);
}

}  // namespace modelleak
