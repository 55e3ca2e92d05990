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

#include "modelleak/aia.hpp"

#include <algorithm>
#include <fstream>

#include "modelleak/error.hpp"
#include "modelleak/rng.hpp"

namespace modelleak {

RepresentationDataset harvest_representations(const ClassifierModel& model,
                                              const std::vector<Document>& docs,
                                              const AttributeSchema& schema) {
  if (docs.empty()) throw EmptyDataset("no documents to harvest");
  schema.validate();
  RepresentationDataset data;
  data.schema = schema;
  data.dim = model.config.representation_dim();
  for (const auto& attr : schema.attributes) {
    data.values[attr.name] = {};
  }
  for (const auto& doc : docs) {
    auto [representation, logits] = forward(model, featurize(doc, model.config));
    if (representation.size() != data.dim) {
      throw ShapeError("representation dimension drifted during harvest");
    }
    data.doc_ids.push_back(doc.id);
    data.representations.push_back(std::move(representation));
    for (const auto& attr : schema.attributes) {
      auto it = doc.attributes.find(attr.name);
      if (it == doc.attributes.end()) {
        throw SchemaError("document " + doc.id + " lacks attribute " + attr.name);
      }
      data.values[attr.name].push_back(
          static_cast<int>(attr.value_index(it->second)));
    }
  }
  return data;
}

namespace {

MlpSpec head_spec(size_t representation_dim, size_t hidden_dim,
                  size_t num_values) {
  MlpSpec spec;
  spec.input_dim = representation_dim;
  spec.hidden_dims = {hidden_dim == 0 ? representation_dim : hidden_dim};
  spec.output_dim = num_values;
  spec.activation = Activation::kRelu;
  return spec;
}

std::vector<int> head_predict(const Mlp& head, const std::vector<Vec>& inputs) {
  std::vector<int> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) {
    const ForwardTrace trace = forward_trace(head, x);
    const Vec& logits = trace.logits();
    size_t best = 0;
    for (size_t k = 1; k < logits.size(); ++k) {
      if (logits[k] > logits[best]) best = k;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

}  // namespace

AttributeInferenceModel train_inference(const RepresentationDataset& data,
                                        const InferenceConfig& cfg) {
  if (data.size() == 0) throw EmptyDataset("representation dataset is empty");
  cfg.train.validate();
  AttributeInferenceModel inference;
  inference.schema = data.schema;
  inference.representation_dim = data.dim;
  for (const auto& attr : data.schema.attributes) {
    const auto& gold = data.values.at(attr.name);
    if (gold.size() != data.size()) {
      throw ShapeError("gold values misaligned for attribute " + attr.name);
    }
    Mlp head = Mlp::random_init(
        head_spec(data.dim, cfg.hidden_dim, attr.values.size()),
        derive_seed(cfg.train.seed, "aia-head-" + attr.name));
    TrainConfig head_cfg = cfg.train;
    head_cfg.seed = derive_seed(cfg.train.seed, "aia-train-" + attr.name);
    std::vector<size_t> labels(gold.begin(), gold.end());
    train_mlp_hard(head, data.representations, labels, head_cfg);
    inference.heads.emplace(attr.name, std::move(head));
  }
  return inference;
}

std::map<std::string, std::vector<int>> infer_attributes(
    const AttributeInferenceModel& inference, const ClassifierModel& source,
    const std::vector<Document>& docs) {
  if (docs.empty()) throw EmptyDataset("no documents to infer on");
  if (source.config.representation_dim() != inference.representation_dim) {
    throw ShapeError("source representation dim does not match inference model");
  }
  std::vector<Vec> representations;
  representations.reserve(docs.size());
  for (const auto& doc : docs) {
    representations.push_back(
        forward(source, featurize(doc, source.config)).first);
  }
  std::map<std::string, std::vector<int>> out;
  for (const auto& [name, head] : inference.heads) {
    out[name] = head_predict(head, representations);
  }
  return out;
}

double attribute_accuracy(const std::vector<int>& predicted,
                          const std::vector<int>& gold) {
  if (predicted.empty()) throw EmptyInput("no predictions to score");
  if (predicted.size() != gold.size()) {
    throw ShapeError("prediction and gold counts differ");
  }
  size_t hits = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == gold[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

int majority_baseline(const RepresentationDataset& data,
                      const std::string& attribute) {
  if (data.size() == 0) throw EmptyDataset("representation dataset is empty");
  const auto& spec = data.schema.find(attribute);
  const auto& gold = data.values.at(attribute);
  std::vector<size_t> counts(spec.values.size(), 0);
  for (int v : gold) {
    if (v < 0 || static_cast<size_t>(v) >= counts.size()) {
      throw InvalidLabel("attribute value index out of range");
    }
    ++counts[static_cast<size_t>(v)];
  }
  size_t best = 0;
  for (size_t k = 1; k < counts.size(); ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  return static_cast<int>(best);
}

ClassifierModel plain_baseline_model(const ModelConfig& cfg, uint64_t seed) {
  ModelConfig plain = cfg;
  plain.seed = seed;
  return ClassifierModel::make(plain);
}

void save_inference_csv(
    const std::string& path, const RepresentationDataset& gold,
    const std::map<std::string, std::vector<int>>& predicted) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "doc_id,attribute,predicted,gold\n";
  for (const auto& [name, preds] : predicted) {
    const auto& spec = gold.schema.find(name);
    const auto& truth = gold.values.at(name);
    if (preds.size() != gold.size() || truth.size() != gold.size()) {
      throw ShapeError("prediction rows misaligned with dataset");
    }
    for (size_t i = 0; i < preds.size(); ++i) {
      out << gold.doc_ids[i] << "," << name << ","
          << spec.values[static_cast<size_t>(preds[i])] << ","
          << spec.values[static_cast<size_t>(truth[i])] << "\n";
    }
  }
}

}  // namespace modelleak
