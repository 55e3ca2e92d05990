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

#include "modelleak/textmodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "modelleak/error.hpp"
#include "modelleak/rng.hpp"

namespace modelleak {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'L', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void write_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void write_f64(std::ostream& out, double v) {
  write_u64(out, std::bit_cast<uint64_t>(v));
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ParseError("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw ParseError("checkpoint truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_u64(in));
}

size_t bucket(const std::string& key, size_t feature_dim) {
  return static_cast<size_t>(fnv1a64(key) % feature_dim);
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (hidden_dims.empty()) throw ConfigError("hidden_dims must be non-empty");
  for (size_t d : hidden_dims) {
    if (d == 0) throw ConfigError("hidden dims must be positive");
  }
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
}

MlpSpec ModelConfig::mlp_spec() const {
  MlpSpec spec;
  spec.input_dim = feature_dim;
  spec.hidden_dims = hidden_dims;
  spec.output_dim = num_classes;
  spec.activation = activation;
  return spec;
}

ClassifierModel ClassifierModel::make(const ModelConfig& config) {
  config.validate();
  ClassifierModel model;
  model.config = config;
  model.net = Mlp::random_init(config.mlp_spec(), config.seed);
  model.trained = false;
  return model;
}

Vec featurize(const Document& doc, const ModelConfig& config) {
  config.validate();
  if (doc.tokens.empty()) {
    throw InvalidDocument("cannot featurize document '" + doc.id +
                          "': no tokens");
  }
  Vec features(config.feature_dim, 0.0);
  for (size_t i = 0; i < doc.tokens.size(); ++i) {
    features[bucket("u\x1f" + doc.tokens[i], config.feature_dim)] += 1.0;
    if (i + 1 < doc.tokens.size()) {
      features[bucket("b\x1f" + doc.tokens[i] + "\x1f" + doc.tokens[i + 1],
                      config.feature_dim)] += 1.0;
    }
  }
  double norm_sq = 0.0;
  for (double v : features) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  if (norm > 0.0) {
    for (double& v : features) v /= norm;
  }
  return features;
}

std::pair<Vec, Vec> forward(const ClassifierModel& model,
                            const Vec& features) {
  const ForwardTrace trace = forward_trace(model.net, features);
  return {trace.representation(), trace.logits()};
}

Vec predict_posterior(const ClassifierModel& model, const Document& doc,
                      double temperature) {
  const Vec features = featurize(doc, model.config);
  return softmax(forward(model, features).second, temperature);
}

namespace {

std::vector<Vec> featurize_all(const std::vector<Document>& docs,
                               const ModelConfig& config) {
  std::vector<Vec> out;
  out.reserve(docs.size());
  for (const Document& doc : docs) out.push_back(featurize(doc, config));
  return out;
}

std::vector<size_t> gold_labels(const std::vector<Document>& docs,
                                size_t num_classes) {
  std::vector<size_t> labels;
  labels.reserve(docs.size());
  for (const Document& doc : docs) {
    if (doc.task_label < 0 ||
        doc.task_label >= static_cast<int>(num_classes)) {
      throw InvalidLabel("document '" + doc.id + "' label " +
                         std::to_string(doc.task_label) + " out of range");
    }
    labels.push_back(static_cast<size_t>(doc.task_label));
  }
  return labels;
}

}  // namespace

TrainLog train_classifier(ClassifierModel& model,
                          const std::vector<Document>& docs,
                          const TrainConfig& cfg) {
  if (docs.empty()) throw EmptyDataset("train_classifier: no documents");
  const std::vector<Vec> inputs = featurize_all(docs, model.config);
  const std::vector<size_t> labels =
      gold_labels(docs, model.config.num_classes);
  const TrainLog log = train_mlp_hard(model.net, inputs, labels, cfg);
  model.trained = true;
  return log;
}

TrainLog train_classifier_soft(ClassifierModel& model,
                               const std::vector<Document>& docs,
                               const std::vector<Vec>& teacher_posteriors,
                               const TrainConfig& cfg) {
  if (docs.empty()) throw EmptyDataset("train_classifier_soft: no documents");
  if (docs.size() != teacher_posteriors.size()) {
    throw ShapeError("documents and teacher posteriors differ in length");
  }
  const std::vector<Vec> inputs = featurize_all(docs, model.config);
  const TrainLog log =
      train_mlp_soft(model.net, inputs, teacher_posteriors, cfg);
  model.trained = true;
  return log;
}

double evaluate_accuracy(const ClassifierModel& model,
                         const std::vector<Document>& docs) {
  if (docs.empty()) throw EmptyDataset("evaluate_accuracy: no documents");
  const std::vector<size_t> labels =
      gold_labels(docs, model.config.num_classes);
  size_t correct = 0;
  for (size_t i = 0; i < docs.size(); ++i) {
    const Vec logits = forward(model, featurize(docs[i], model.config)).second;
    const auto arg =
        std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (static_cast<size_t>(arg) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(docs.size());
}

json model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["vocab_size"] = cfg.vocab_size;
  j["feature_dim"] = cfg.feature_dim;
  j["hidden_dims"] = cfg.hidden_dims;
  j["num_classes"] = cfg.num_classes;
  j["seed"] = cfg.seed;
  j["activation"] = cfg.activation == Activation::kRelu ? "relu" : "tanh";
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
  cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
  cfg.hidden_dims = j.value("hidden_dims", cfg.hidden_dims);
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  cfg.seed = j.value("seed", cfg.seed);
  const std::string act = j.value("activation", std::string("relu"));
  if (act == "relu") {
    cfg.activation = Activation::kRelu;
  } else if (act == "tanh") {
    cfg.activation = Activation::kTanh;
  } else {
    throw ConfigError("unknown activation '" + act + "'");
  }
  cfg.validate();
  return cfg;
}

void save_model(const ClassifierModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(kMagic, 4);
  write_u32(out, kCheckpointVersion);

  json cfg = model_config_to_json(model.config);
  cfg["trained"] = model.trained;
  const std::string blob = cfg.dump();
  write_u64(out, blob.size());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  write_u64(out, model.net.parameter_count());
  for (size_t layer = 0; layer < model.net.num_layers(); ++layer) {
    for (double v : model.net.weights[layer].data) write_f64(out, v);
    for (double v : model.net.biases[layer]) write_f64(out, v);
  }
  if (!out) throw Error("short write to '" + path + "'");
}

ClassifierModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError("'" + path + "' is not a model checkpoint");
  }
  const uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " +
                     std::to_string(version));
  }
  const uint64_t blob_size = read_u64(in);
  std::string blob(blob_size, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(blob_size));
  if (!in) throw ParseError("checkpoint truncated");
  json cfg_json;
  try {
    cfg_json = json::parse(blob);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad checkpoint config block: ") + e.what());
  }

  ClassifierModel model = ClassifierModel::make(model_config_from_json(cfg_json));
  model.trained = cfg_json.value("trained", false);

  const uint64_t count = read_u64(in);
  if (count != model.net.parameter_count()) {
    throw ShapeError("checkpoint holds " + std::to_string(count) +
                     " parameters, config implies " +
                     std::to_string(model.net.parameter_count()));
  }
  for (size_t layer = 0; layer < model.net.num_layers(); ++layer) {
    for (double& v : model.net.weights[layer].data) v = read_f64(in);
    for (double& v : model.net.biases[layer]) v = read_f64(in);
  }
  if (!model.net.finite()) {
    throw NumericError("checkpoint contains non-finite parameters");
  }
  return model;
}

}  // namespace modelleak
