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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace modelleak {

// A labeled text record. `tokens` is the non-sensitive part that models
// may read; `attributes` holds the sensitive categorical values that
// only evaluation code and the inference-attack training set may touch.
struct Document {
  std::string id;
  std::vector<std::string> tokens;
  int task_label = -1;
  std::map<std::string, std::string> attributes;
  std::string domain_tag = "same";

  // Tokens joined by single spaces; what crosses the prediction API.
  std::string text() const;
};

enum class AttributeKind { kDemographic, kEntityPresence };

struct AttributeSpec {
  std::string name;
  std::vector<std::string> values;  // ordered; >= 2 entries
  AttributeKind kind = AttributeKind::kDemographic;

  // Index of `value` in `values`; SchemaError if absent.
  size_t value_index(const std::string& value) const;
};

struct AttributeSchema {
  std::vector<AttributeSpec> attributes;

  void validate() const;
  const AttributeSpec& find(const std::string& name) const;
  bool has(const std::string& name) const;
};

struct Corpus {
  std::vector<Document> docs;
  AttributeSchema schema;
  std::vector<std::string> class_names;  // index = task_label

  size_t num_classes() const { return class_names.size(); }
  size_t size() const { return docs.size(); }
};

// The experiment partition: victim half, then the attacker half split
// into an extraction query pool and the attribute-labeled auxiliary set.
// `test` is attached separately by the caller; the three main parts are
// pairwise disjoint by document id.
struct CorpusSplit {
  std::vector<Document> victim_train;  // trains the victim
  std::vector<Document> query_pool;    // same-domain extraction queries
  std::vector<Document> aux;           // trains the inference model
  std::vector<Document> test;          // task-accuracy evaluation
};

// One synthetic attribute: its schema entry, the marginal distribution
// of its values, and the token-level leakage strength rho. At rho = 0
// attribute tokens are drawn independently of the value; at rho = 1
// every attribute token deterministically marks the true value.
struct SynthAttributeConfig {
  AttributeSpec spec;
  std::vector<double> marginals;  // same length as spec.values
  double leakage = 0.8;
};

// Vocabulary is partitioned into disjoint slices: per-class task tokens,
// per-(attribute, value) tokens, and noise tokens. Each token position
// picks a slice by the mixing weights, then a token within the slice.
struct SynthConfig {
  size_t num_classes = 4;
  std::vector<double> class_marginals;  // empty = uniform
  std::vector<SynthAttributeConfig> attributes;
  size_t tokens_per_class = 30;
  size_t tokens_per_value = 8;
  size_t noise_tokens = 300;
  double task_token_weight = 0.45;
  double attribute_token_weight = 0.30;  // total, split across attributes
  double noise_token_weight = 0.25;
  size_t min_doc_length = 15;
  size_t max_doc_length = 30;
  size_t corpus_size = 1200;
  uint64_t seed = 7;
  std::string domain_tag = "same";
  // Shifts the noise slice to a disjoint vocabulary range; used to model
  // cross-domain query distributions.
  size_t noise_vocab_offset = 0;

  void validate() const;
};

// Lowercases and splits on non-word characters (underscore counts as a
// word character, so generated token names survive a round trip).
std::vector<std::string> tokenize(const std::string& text);

Corpus generate_synthetic(const SynthConfig& cfg);

// One JSON object per line: {"id", "text", "label", "attributes"} with
// optional "domain". Task labels are the sorted distinct label strings.
Corpus load_jsonl(const std::string& path, const AttributeSchema& schema);
void save_jsonl(const Corpus& corpus, const std::string& path);

// Seeded shuffle, first half to victim_train, second half split into
// query_pool (1 - aux_fraction) and aux (aux_fraction). `test` is left
// empty.
CorpusSplit split(const Corpus& corpus, uint64_t seed, double aux_fraction);

// Fraction of distinct n-gram types of `reference` that also occur in
// `query`.
double ngram_overlap(const Corpus& reference, const Corpus& query, size_t n);

// Population variance of the empirical value-frequency histogram.
double attribute_histogram_variance(const Corpus& corpus,
                                    const std::string& attribute);
double attribute_histogram_variance(const std::vector<Document>& docs,
                                    const AttributeSchema& schema,
                                    const std::string& attribute);

nlohmann::json schema_to_json(const AttributeSchema& schema);
AttributeSchema schema_from_json(const nlohmann::json& j);
nlohmann::json synth_to_json(const SynthConfig& cfg);
SynthConfig synth_from_json(const nlohmann::json& j);
nlohmann::json document_to_json(const Document& doc,
                                const std::vector<std::string>& class_names);
Document document_from_json(const nlohmann::json& j,
                            const AttributeSchema& schema,
                            const std::map<std::string, int>& label_index);

}  // namespace modelleak
