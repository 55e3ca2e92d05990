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

#ifndef MODELLEAK_VICTIM_HPP_
#define MODELLEAK_VICTIM_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "modelleak/corpus.hpp"
#include "modelleak/defense.hpp"
#include "modelleak/textmodel.hpp"

namespace modelleak {

enum class TrainingKind { kStandard, kNastyTeacher };

// A trained classifier plus the output defense it serves behind. Only
// defended posteriors ever leave this boundary; representations stay
// private to the victim.
struct VictimModel {
  ClassifierModel model;
  DefenseConfig defense = NoDefense{};
  TrainingKind training_kind = TrainingKind::kStandard;
  // Base seed for per-request defense randomness.
  uint64_t prediction_seed = 0;
};

VictimModel train_victim(const std::vector<Document>& victim_train,
                         const ModelConfig& model_cfg,
                         const TrainConfig& train_cfg,
                         const DefenseConfig& defense = NoDefense{});

struct NastyTrainResult {
  VictimModel victim;
  double clean_accuracy = 0.0;
  // Mean KL(nasty || reference) at the distillation temperature over
  // the training set, measured after training.
  double mean_kl_to_reference = 0.0;
  TrainLog log;
};

// Trains against cross_entropy(gold) - omega * tau^2 * KL(self || reference),
// pushing the posterior away from the normally trained reference while
// keeping the argmax useful.
NastyTrainResult train_nasty_victim(const std::vector<Document>& victim_train,
                                    const ClassifierModel& reference,
                                    double omega, double tau_nt,
                                    const ModelConfig& model_cfg,
                                    const TrainConfig& train_cfg,
                                    const DefenseConfig& defense = NoDefense{});

// Stable hash of the document content as it crosses the wire. Stochastic
// defenses key their per-request stream on this, so a direct call and an
// HTTP round trip see the same noise.
uint64_t content_hash(const Document& doc);

// Per-request defense RNG: deterministic in (victim seed, defense seed,
// document content).
RngStream request_stream(const VictimModel& victim, const Document& doc);

// featurize -> forward -> apply_defense, with the caller's RNG.
Vec predict(const VictimModel& victim, const Document& doc, RngStream& rng);

// Convenience overload deriving the per-request stream internally.
Vec predict(const VictimModel& victim, const Document& doc);

// Victim checkpoint: model checkpoint at `path`, defense and metadata in
// a JSON sidecar at `path` + ".defense.json".
void save_victim(const VictimModel& victim, const std::string& path);
VictimModel load_victim(const std::string& path);

}  // namespace modelleak

#endif  // MODELLEAK_VICTIM_HPP_
