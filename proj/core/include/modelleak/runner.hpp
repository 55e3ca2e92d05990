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

#ifndef MODELLEAK_RUNNER_HPP_
#define MODELLEAK_RUNNER_HPP_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "modelleak/aia.hpp"
#include "modelleak/corpus.hpp"
#include "modelleak/defense.hpp"
#include "modelleak/extraction.hpp"
#include "modelleak/metrics.hpp"
#include "modelleak/textmodel.hpp"

namespace modelleak {

// A grid entry before per-seed derivation fills in sampling seeds.
struct PlanSpec {
  QuerySource source = QuerySource::kSameDomain;
  double multiplier = 1.0;
};

struct ExperimentConfig {
  std::string experiment_id = "modelleak";
  // Synthetic corpus spec, or a JSONL path plus its schema.
  SynthConfig corpus;
  std::string corpus_path;
  AttributeSchema corpus_schema;
  // Generator behind cross-domain query plans.
  SynthConfig cross_corpus;
  // Held-out synthetic documents for task accuracy; drawn fresh per
  // seed from the corpus generator.
  size_t test_size = 300;
  double aux_fraction = 0.25;
  ModelConfig victim_model;
  TrainConfig victim_train;
  ModelConfig extracted_model;
  TrainConfig extracted_train;
  std::vector<DefenseConfig> defenses = {NoDefense{}};
  std::vector<PlanSpec> plans = {PlanSpec{}};
  InferenceConfig aia;
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::string output_dir = "out";

  void validate() const;
};

enum class TransportKind { kDirect, kHttp };

// One grid cell: (defense, plan, seed). Aggregates reuse the struct
// with seed_label "mean".
struct CellResult {
  std::string defense;
  std::string plan;
  std::string seed_label;
  double budget = 0.0;
  bool completed = false;
  std::string error;

  double victim_accuracy = 0.0;
  double extracted_accuracy = 0.0;
  double agreement_rate = 0.0;
  std::map<std::string, double> attack_accuracy;
  std::map<std::string, double> entity_attack_f1;
  double privacy_demographic = 0.0;
  double privacy_entities = 0.0;
  double privacy_entities_macro = 0.0;
  double baseline_majority_privacy_demographic = 0.0;
  double baseline_majority_privacy_entities = 0.0;
  double baseline_plain_privacy_demographic = 0.0;
  double baseline_plain_privacy_entities = 0.0;
  SharpnessStats sharpness;
  double overlap_unigram = 0.0;
  double overlap_bigram = 0.0;
  std::map<std::string, double> attribute_variance;
};

struct ExperimentReport {
  nlohmann::json config;  // verbatim experiment config
  std::string transport;
  std::vector<CellResult> cells;
  std::vector<CellResult> aggregates;

  bool all_completed() const;
};

using RunLogger = std::function<void(const std::string&)>;

ExperimentReport run_pipeline(const ExperimentConfig& cfg,
                              TransportKind transport = TransportKind::kDirect,
                              const RunLogger& log = nullptr);

// report.csv, report.json, manifest.json under out_dir.
void write_report(const ExperimentReport& report, const std::string& out_dir);
std::string report_csv(const ExperimentReport& report);
nlohmann::json report_to_json(const ExperimentReport& report);
nlohmann::json manifest_json(const ExperimentReport& report);

struct SharpnessPoint {
  double tau = 0.0;
  double mean_max = 0.0;
  double empirical_privacy = 0.0;
};

struct SharpnessSweep {
  std::vector<SharpnessPoint> points;
  double spearman_rho = 0.0;
  // The claimed direction: sharper released posteriors (higher mean
  // max) go with higher empirical privacy.
  bool direction_pass = false;
};

SharpnessSweep sweep_sharpness(const ExperimentConfig& cfg,
                               const std::vector<double>& tau_grid,
                               TransportKind transport = TransportKind::kDirect,
                               const RunLogger& log = nullptr);

// Scatter of (mean max posterior, empirical privacy), one mark per tau.
void write_sharpness_svg(const SharpnessSweep& sweep, const std::string& path);

struct MismatchCell {
  std::string victim_architecture;
  bool matched = false;
  bool completed = false;
  std::string error;
  double extracted_accuracy = 0.0;
  double agreement_rate = 0.0;
  double empirical_privacy = 0.0;
};

struct MismatchSweep {
  std::vector<MismatchCell> cells;
};

MismatchSweep sweep_mismatch(const ExperimentConfig& cfg,
                             const std::vector<ModelConfig>& victim_grid,
                             TransportKind transport = TransportKind::kDirect,
                             const RunLogger& log = nullptr);

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// The shipped end-to-end grid; finishes in minutes on a laptop.
ExperimentConfig default_config();

}  // namespace modelleak

#endif  // MODELLEAK_RUNNER_HPP_
