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

#ifndef MODELLEAK_AIA_HPP_
#define MODELLEAK_AIA_HPP_

#include <map>
#include <string>
#include <vector>

#include "modelleak/corpus.hpp"
#include "modelleak/textmodel.hpp"

namespace modelleak {

// Penultimate-layer representations for a document set, with the gold
// attribute value indices alongside. Only built from attribute-labeled
// data (the attacker's auxiliary set, or evaluation gold).
struct RepresentationDataset {
  AttributeSchema schema;
  size_t dim = 0;
  std::vector<std::string> doc_ids;
  std::vector<Vec> representations;
  std::map<std::string, std::vector<int>> values;  // attribute -> gold index per row

  size_t size() const { return representations.size(); }
};

RepresentationDataset harvest_representations(const ClassifierModel& model,
                                              const std::vector<Document>& docs,
                                              const AttributeSchema& schema);

struct InferenceConfig {
  size_t hidden_dim = 0;  // 0 means: use the representation dimension
  TrainConfig train;

  InferenceConfig() { train.epochs = 3; }
};

// One small classifier head per attribute, all reading the same
// representation space.
struct AttributeInferenceModel {
  AttributeSchema schema;
  size_t representation_dim = 0;
  std::map<std::string, Mlp> heads;
};

AttributeInferenceModel train_inference(const RepresentationDataset& data,
                                        const InferenceConfig& cfg);

// Runs documents through the source model's representation and each
// attribute head. Reads tokens only; document attributes are ignored.
std::map<std::string, std::vector<int>> infer_attributes(
    const AttributeInferenceModel& inference, const ClassifierModel& source,
    const std::vector<Document>& docs);

// Fraction of rows where prediction matches gold.
double attribute_accuracy(const std::vector<int>& predicted,
                          const std::vector<int>& gold);

// Modal attribute value in the dataset; ties take the lowest index.
int majority_baseline(const RepresentationDataset& data,
                      const std::string& attribute);

// An untrained model with the same architecture, for the
// representation-only floor. Prediction still works; training never ran.
ClassifierModel plain_baseline_model(const ModelConfig& cfg, uint64_t seed);

// doc_id,attribute,predicted,gold rows; value names come from schema.
void save_inference_csv(const std::string& path,
                        const RepresentationDataset& gold,
                        const std::map<std::string, std::vector<int>>& predicted);

}  // namespace modelleak

#endif  // MODELLEAK_AIA_HPP_
