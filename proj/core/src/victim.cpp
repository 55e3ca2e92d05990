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

#include "modelleak/victim.hpp"

#include <cmath>
#include <fstream>

#include "modelleak/error.hpp"
#include "modelleak/rng.hpp"

namespace modelleak {

namespace {

using nlohmann::json;

uint64_t defense_stream_base(const DefenseConfig& defense) {
  if (const auto* g = std::get_if<GaussianNoise>(&defense)) return g->seed;
  return 0;
}

void require_same_config(const ModelConfig& a, const ModelConfig& b) {
  if (a.feature_dim != b.feature_dim || a.hidden_dims != b.hidden_dims ||
      a.num_classes != b.num_classes || a.activation != b.activation) {
    throw ShapeError("reference model config does not match");
  }
}

}  // namespace

VictimModel train_victim(const std::vector<Document>& victim_train,
                         const ModelConfig& model_cfg,
                         const TrainConfig& train_cfg,
                         const DefenseConfig& defense) {
  validate_defense(defense);
  VictimModel victim;
  victim.model = ClassifierModel::make(model_cfg);
  train_classifier(victim.model, victim_train, train_cfg);
  victim.defense = defense;
  victim.training_kind = TrainingKind::kStandard;
  victim.prediction_seed = derive_seed(train_cfg.seed, "predict");
  return victim;
}

NastyTrainResult train_nasty_victim(const std::vector<Document>& victim_train,
                                    const ClassifierModel& reference,
                                    double omega, double tau_nt,
                                    const ModelConfig& model_cfg,
                                    const TrainConfig& train_cfg,
                                    const DefenseConfig& defense) {
  if (omega < 0.0) throw ConfigError("nasty teacher omega must be >= 0");
  if (tau_nt <= 0.0) throw ConfigError("nasty teacher tau must be > 0");
  if (victim_train.empty()) throw EmptyDataset("train_nasty_victim: no documents");
  if (!reference.trained) {
    throw ConfigError("nasty training needs a trained reference model");
  }
  require_same_config(reference.config, model_cfg);
  validate_defense(defense);

  std::vector<Vec> inputs;
  std::vector<Vec> reference_soft;  // softmax(z_ref / tau) per document
  std::vector<size_t> labels;
  inputs.reserve(victim_train.size());
  reference_soft.reserve(victim_train.size());
  for (const Document& doc : victim_train) {
    if (doc.task_label < 0 ||
        doc.task_label >= static_cast<int>(model_cfg.num_classes)) {
      throw InvalidLabel("document '" + doc.id + "' label out of range");
    }
    inputs.push_back(featurize(doc, model_cfg));
    reference_soft.push_back(
        softmax(forward(reference, inputs.back()).second, tau_nt));
    labels.push_back(static_cast<size_t>(doc.task_label));
  }

  NastyTrainResult result;
  result.victim.model = ClassifierModel::make(model_cfg);
  Mlp& net = result.victim.model.net;

  auto loss = [&](size_t idx, const Vec& logits, Vec& dlogits) {
    const Vec p = softmax(logits);
    const Vec s = softmax(logits, tau_nt);
    const Vec& r = reference_soft[idx];
    const double kl = kl_divergence(s, r);
    const double value =
        cross_entropy(p, labels[idx]) - omega * tau_nt * tau_nt * kl;
    for (size_t k = 0; k < logits.size(); ++k) {
      const double log_ratio = std::log(std::max(s[k], kProbFloor)) -
                               std::log(std::max(r[k], kProbFloor));
      dlogits[k] = p[k] - (k == labels[idx] ? 1.0 : 0.0) -
                   omega * tau_nt * s[k] * (log_ratio - kl);
    }
    return value;
  };

  result.log = train_mlp(net, inputs, loss, train_cfg);
  result.victim.model.trained = true;
  result.victim.defense = defense;
  result.victim.training_kind = TrainingKind::kNastyTeacher;
  result.victim.prediction_seed = derive_seed(train_cfg.seed, "predict");

  result.clean_accuracy = evaluate_accuracy(result.victim.model, victim_train);
  double kl_sum = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Vec s =
        softmax(forward(result.victim.model, inputs[i]).second, tau_nt);
    kl_sum += kl_divergence(s, reference_soft[i]);
  }
  result.mean_kl_to_reference = kl_sum / static_cast<double>(inputs.size());
  return result;
}

uint64_t content_hash(const Document& doc) { return fnv1a64(doc.text()); }

RngStream request_stream(const VictimModel& victim, const Document& doc) {
  const uint64_t base =
      derive_seed(victim.prediction_seed, defense_stream_base(victim.defense));
  return RngStream(derive_seed(base, content_hash(doc)));
}

Vec predict(const VictimModel& victim, const Document& doc, RngStream& rng) {
  if (!victim.model.trained) {
    throw ConfigError("victim model is not trained");
  }
  const Vec logits =
      forward(victim.model, featurize(doc, victim.model.config)).second;
  return apply_defense(logits, victim.defense, rng);
}

Vec predict(const VictimModel& victim, const Document& doc) {
  RngStream rng = request_stream(victim, doc);
  return predict(victim, doc, rng);
}

void save_victim(const VictimModel& victim, const std::string& path) {
  save_model(victim.model, path);
  json sidecar;
  sidecar["defense"] = defense_to_json(victim.defense);
  sidecar["training_kind"] = victim.training_kind == TrainingKind::kStandard
                                 ? "standard"
                                 : "nasty_teacher";
  sidecar["prediction_seed"] = victim.prediction_seed;
  std::ofstream out(path + ".defense.json");
  if (!out) throw Error("cannot write '" + path + ".defense.json'");
  out << sidecar.dump(2) << '\n';
}

VictimModel load_victim(const std::string& path) {
  VictimModel victim;
  victim.model = load_model(path);
  std::ifstream in(path + ".defense.json");
  if (!in) throw ParseError("cannot open '" + path + ".defense.json'");
  json sidecar;
  try {
    in >> sidecar;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad defense sidecar: ") + e.what());
  }
  victim.defense = defense_from_json(sidecar.at("defense"));
  const std::string kind =
      sidecar.value("training_kind", std::string("standard"));
  if (kind == "standard") {
    victim.training_kind = TrainingKind::kStandard;
  } else if (kind == "nasty_teacher") {
    victim.training_kind = TrainingKind::kNastyTeacher;
  } else {
    throw ParseError("unknown training kind '" + kind + "'");
  }
  victim.prediction_seed = sidecar.value("prediction_seed", uint64_t{0});
  return victim;
}

}  // namespace modelleak
