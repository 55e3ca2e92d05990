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

#ifndef MODELLEAK_DEFENSE_HPP_
#define MODELLEAK_DEFENSE_HPP_

#include <cstdint>
#include <string>
#include <variant>

#include <json.hpp>

#include "modelleak/nn.hpp"
#include "modelleak/rng.hpp"

namespace modelleak {

// Output-side defenses transform the posterior before release.
// NastyTeacher is the one training-time defense; the prediction-side
// dispatcher rejects it.

struct NoDefense {};

// tau = 0 is the hard-label sentinel: one-hot at the argmax.
struct Temperature {
  double tau = 1.0;
};

struct GaussianNoise {
  double sigma = 0.0;
  uint64_t seed = 0;
};

// y_i - beta * (logistic(gamma * logit(y_i)) - 1/2), then clip and
// renormalize. eta > 0 adds U(0, eta) noise to non-argmax entries first.
struct ReverseSigmoid {
  double beta = 0.2;
  double gamma = 0.5;
  double eta = 0.0;
};

struct TopK {
  size_t k = 1;
};

struct MostLeast {
  double epsilon = 1e-5;
};

// Training-time: victim trained to keep accuracy while distorting
// dark knowledge. Consumed by the victim module.
struct NastyTeacher {
  double omega = 0.1;
  double tau_nt = 4.0;
};

using DefenseConfig =
    std::variant<NoDefense, Temperature, GaussianNoise, ReverseSigmoid, TopK,
                 MostLeast, NastyTeacher>;

void validate_defense(const DefenseConfig& cfg);

// Short tag, e.g. "most_least"; used in config files and report rows.
std::string defense_kind(const DefenseConfig& cfg);

nlohmann::json defense_to_json(const DefenseConfig& cfg);
DefenseConfig defense_from_json(const nlohmann::json& j);

// tau > 0: softmax(logits / tau). tau = 0: one-hot at the argmax,
// lowest index on ties.
Vec temperature_scale(const Vec& logits, double tau);

// Adds N(0, sigma^2) per entry, clips negatives, renormalizes. All
// entries clipped to zero falls back to uniform.
Vec gaussian_perturb(const Vec& posterior, double sigma, RngStream& rng);

Vec reverse_sigmoid(const Vec& posterior, double beta, double gamma);
Vec reverse_sigmoid(const Vec& posterior, double beta, double gamma,
                    double eta, RngStream& rng);

// Keeps the k largest entries (ties by lowest index), renormalizes.
Vec top_k_truncate(const Vec& posterior, size_t k);

// Argmax -> 0.5 + eps, argmin -> 0.5 - eps, everything else 0. Ties:
// lowest index wins "most", highest index wins "least". Sums to
// exactly 1.
Vec most_least(const Vec& posterior, double eps);

// Routes logits through the configured prediction-side defense.
Vec apply_defense(const Vec& logits, const DefenseConfig& cfg,
                  RngStream& rng);

}  // namespace modelleak

#endif  // MODELLEAK_DEFENSE_HPP_
