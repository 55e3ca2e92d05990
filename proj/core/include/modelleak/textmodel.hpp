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

#ifndef MODELLEAK_TEXTMODEL_HPP_
#define MODELLEAK_TEXTMODEL_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "modelleak/corpus.hpp"
#include "modelleak/nn.hpp"

namespace modelleak {

// Architecture of a text classifier. vocab_size declares the token space the
// hashed featurizer is sized for; it is recorded in checkpoints but the
// feature hash itself only depends on feature_dim.
struct ModelConfig {
  size_t vocab_size = 2000;
  size_t feature_dim = 512;
  std::vector<size_t> hidden_dims = {64, 32};
  size_t num_classes = 4;
  uint64_t seed = 0;
  Activation activation = Activation::kRelu;

  void validate() const;
  size_t representation_dim() const { return hidden_dims.back(); }
  MlpSpec mlp_spec() const;
};

// A classifier over hashed n-gram features. The final hidden activation is
// the exposed representation; the head maps it to class logits.
struct ClassifierModel {
  ModelConfig config;
  Mlp net;
  bool trained = false;

  static ClassifierModel make(const ModelConfig& config);
};

// Hashed bag of unigrams and bigrams, counts L2-normalized to unit length.
Vec featurize(const Document& doc, const ModelConfig& config);

// Returns (representation, logits) for one feature vector.
std::pair<Vec, Vec> forward(const ClassifierModel& model, const Vec& features);

// Posterior for one document at the given softmax temperature.
Vec predict_posterior(const ClassifierModel& model, const Document& doc,
                      double temperature = 1.0);

// Supervised training on gold labels.
TrainLog train_classifier(ClassifierModel& model,
                          const std::vector<Document>& docs,
                          const TrainConfig& cfg);

// Distillation on per-document teacher posteriors.
TrainLog train_classifier_soft(ClassifierModel& model,
                               const std::vector<Document>& docs,
                               const std::vector<Vec>& teacher_posteriors,
                               const TrainConfig& cfg);

double evaluate_accuracy(const ClassifierModel& model,
                         const std::vector<Document>& docs);

// Checkpoint: magic + version, a JSON config block, then every layer's
// weights (row-major) and biases as little-endian IEEE doubles.
void save_model(const ClassifierModel& model, const std::string& path);
ClassifierModel load_model(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace modelleak

#endif  // MODELLEAK_TEXTMODEL_HPP_
