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

#include "modelleak/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "modelleak/error.hpp"
#include "modelleak/rng.hpp"

namespace modelleak {

namespace {

using nlohmann::json;

constexpr double kMarginalTolerance = 1e-9;

void check_marginals(const std::vector<double>& m, const std::string& what) {
  double sum = 0.0;
  for (double p : m) {
    if (p < 0.0) throw ConfigError(what + ": negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kMarginalTolerance) {
    throw ConfigError(what + ": marginals must sum to 1");
  }
}

size_t sample_categorical(const std::vector<double>& marginals,
                          RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (size_t i = 0; i < marginals.size(); ++i) {
    acc += marginals[i];
    if (u < acc) return i;
  }
  return marginals.size() - 1;
}

std::string json_to_label(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw SchemaError("label must be a string or integer");
}

}  // namespace

std::string Document::text() const {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

size_t AttributeSpec::value_index(const std::string& value) const {
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] == value) return i;
  }
  throw SchemaError("attribute '" + name + "' has no value '" + value + "'");
}

void AttributeSchema::validate() const {
  std::set<std::string> names;
  for (const AttributeSpec& a : attributes) {
    if (a.name.empty()) throw ConfigError("attribute with empty name");
    if (!names.insert(a.name).second) {
      throw ConfigError("duplicate attribute '" + a.name + "'");
    }
    if (a.values.size() < 2) {
      throw ConfigError("attribute '" + a.name + "' needs >= 2 values");
    }
    if (a.kind == AttributeKind::kEntityPresence && a.values.size() != 2) {
      throw ConfigError("entity_presence attribute '" + a.name +
                        "' must be binary");
    }
    std::set<std::string> vals(a.values.begin(), a.values.end());
    if (vals.size() != a.values.size()) {
      throw ConfigError("attribute '" + a.name + "' has duplicate values");
    }
  }
}

const AttributeSpec& AttributeSchema::find(const std::string& name) const {
  for (const AttributeSpec& a : attributes) {
    if (a.name == name) return a;
  }
  throw SchemaError("unknown attribute '" + name + "'");
}

bool AttributeSchema::has(const std::string& name) const {
  for (const AttributeSpec& a : attributes) {
    if (a.name == name) return true;
  }
  return false;
}

void SynthConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (!class_marginals.empty()) {
    if (class_marginals.size() != num_classes) {
      throw ConfigError("class_marginals size != num_classes");
    }
    check_marginals(class_marginals, "class_marginals");
  }
  AttributeSchema schema;
  for (const auto& a : attributes) schema.attributes.push_back(a.spec);
  schema.validate();
  for (const auto& a : attributes) {
    if (a.marginals.size() != a.spec.values.size()) {
      throw ConfigError("attribute '" + a.spec.name +
                        "': marginals size != value count");
    }
    check_marginals(a.marginals, "attribute '" + a.spec.name + "'");
    if (!(a.leakage >= 0.0 && a.leakage <= 1.0)) {
      throw ConfigError("attribute '" + a.spec.name +
                        "': leakage must be in [0, 1]");
    }
  }
  if (tokens_per_class == 0 || tokens_per_value == 0 || noise_tokens == 0) {
    throw ConfigError("vocabulary partition sizes must be positive");
  }
  if (task_token_weight < 0.0 || attribute_token_weight < 0.0 ||
      noise_token_weight < 0.0 ||
      task_token_weight + attribute_token_weight + noise_token_weight <= 0.0) {
    throw ConfigError("token mixing weights must be non-negative and not all 0");
  }
  if (min_doc_length == 0 || max_doc_length < min_doc_length) {
    throw ConfigError("doc length range invalid");
  }
  if (corpus_size == 0) throw ConfigError("corpus_size must be positive");
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = std::isalnum(c) || c == '_' || c >= 0x80;
    if (word) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

Corpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  for (size_t c = 0; c < cfg.num_classes; ++c) {
    corpus.class_names.push_back("c" + std::to_string(c));
  }
  for (const auto& a : cfg.attributes) {
    corpus.schema.attributes.push_back(a.spec);
  }

  std::vector<double> class_marginals = cfg.class_marginals;
  if (class_marginals.empty()) {
    class_marginals.assign(cfg.num_classes, 1.0 / cfg.num_classes);
  }

  // Cumulative slice weights: task, one slice per attribute, noise.
  const size_t n_attrs = cfg.attributes.size();
  std::vector<double> slice_weights;
  slice_weights.push_back(cfg.task_token_weight);
  for (size_t a = 0; a < n_attrs; ++a) {
    slice_weights.push_back(cfg.attribute_token_weight /
                            static_cast<double>(n_attrs == 0 ? 1 : n_attrs));
  }
  slice_weights.push_back(cfg.noise_token_weight);
  const double total_weight =
      n_attrs == 0 ? cfg.task_token_weight + cfg.noise_token_weight
                   : cfg.task_token_weight + cfg.attribute_token_weight +
                         cfg.noise_token_weight;

  RngStream rng(derive_seed(cfg.seed, "synth"));
  corpus.docs.reserve(cfg.corpus_size);
  for (size_t i = 0; i < cfg.corpus_size; ++i) {
    Document doc;
    doc.id = cfg.domain_tag + "-" + std::to_string(cfg.seed) + "-" +
             std::to_string(i);
    doc.domain_tag = cfg.domain_tag;
    doc.task_label = static_cast<int>(sample_categorical(class_marginals, rng));

    std::vector<size_t> attr_values(n_attrs);
    for (size_t a = 0; a < n_attrs; ++a) {
      attr_values[a] = sample_categorical(cfg.attributes[a].marginals, rng);
      doc.attributes[cfg.attributes[a].spec.name] =
          cfg.attributes[a].spec.values[attr_values[a]];
    }

    const size_t len =
        cfg.min_doc_length +
        rng.uniform_index(cfg.max_doc_length - cfg.min_doc_length + 1);
    doc.tokens.reserve(len);
    for (size_t t = 0; t < len; ++t) {
      double u = rng.uniform() * total_weight;
      size_t slice = 0;
      while (slice + 1 < slice_weights.size() && u >= slice_weights[slice]) {
        u -= slice_weights[slice];
        ++slice;
      }
      if (slice == 0) {
        // Task-informative token for this document's class.
        doc.tokens.push_back("t" + std::to_string(doc.task_label) + "_" +
                             std::to_string(rng.uniform_index(
                                 cfg.tokens_per_class)));
      } else if (slice <= n_attrs) {
        const size_t a = slice - 1;
        const auto& attr = cfg.attributes[a];
        // With probability rho the token marks the true value, otherwise
        // a uniformly random value (independent of the truth).
        const bool informative = rng.uniform() < attr.leakage;
        const size_t v = informative
                             ? attr_values[a]
                             : rng.uniform_index(attr.spec.values.size());
        doc.tokens.push_back("a_" + attr.spec.name + "_" +
                             attr.spec.values[v] + "_" +
                             std::to_string(rng.uniform_index(
                                 cfg.tokens_per_value)));
      } else {
        doc.tokens.push_back("n" + std::to_string(cfg.noise_vocab_offset +
                                                  rng.uniform_index(
                                                      cfg.noise_tokens)));
      }
    }
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

Document document_from_json(const json& j, const AttributeSchema& schema,
                            const std::map<std::string, int>& label_index) {
  Document doc;
  if (!j.is_object()) throw SchemaError("document line must be a JSON object");
  if (!j.contains("id")) throw SchemaError("document missing 'id'");
  const json& id = j.at("id");
  doc.id = id.is_string() ? id.get<std::string>() : id.dump();
  if (!j.contains("text") || !j.at("text").is_string()) {
    throw SchemaError("document missing string 'text'");
  }
  doc.tokens = tokenize(j.at("text").get<std::string>());
  if (doc.tokens.empty()) {
    throw InvalidDocument("document '" + doc.id + "' has no tokens");
  }
  if (!j.contains("label")) throw SchemaError("document missing 'label'");
  const std::string label = json_to_label(j.at("label"));
  if (!label_index.empty()) {
    auto it = label_index.find(label);
    if (it == label_index.end()) {
      throw SchemaError("unknown label '" + label + "'");
    }
    doc.task_label = it->second;
  }
  doc.domain_tag = j.value("domain", std::string("same"));

  const json attrs = j.value("attributes", json::object());
  if (!attrs.is_object()) throw SchemaError("'attributes' must be an object");
  for (auto it = attrs.begin(); it != attrs.end(); ++it) {
    const AttributeSpec& spec = schema.find(it.key());
    if (!it.value().is_string()) {
      throw SchemaError("attribute '" + it.key() + "' must be a string");
    }
    const std::string value = it.value().get<std::string>();
    spec.value_index(value);  // throws on undeclared values
    doc.attributes[it.key()] = value;
  }
  for (const AttributeSpec& spec : schema.attributes) {
    if (!doc.attributes.count(spec.name)) {
      throw SchemaError("document '" + doc.id + "' missing attribute '" +
                        spec.name + "'");
    }
  }
  return doc;
}

Corpus load_jsonl(const std::string& path, const AttributeSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  // First pass: collect distinct labels so indices do not depend on the
  // order documents appear in.
  struct RawLine {
    json obj;
    size_t line_no;
  };
  std::vector<RawLine> lines;
  std::set<std::string> labels;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("label")) {
      throw ParseError("line is not an object with a 'label'", line_no);
    }
    labels.insert(json_to_label(obj.at("label")));
    lines.push_back({std::move(obj), line_no});
  }
  if (lines.empty()) throw EmptyDataset("no documents in '" + path + "'");

  Corpus corpus;
  corpus.schema = schema;
  corpus.class_names.assign(labels.begin(), labels.end());
  std::map<std::string, int> label_index;
  for (size_t i = 0; i < corpus.class_names.size(); ++i) {
    label_index[corpus.class_names[i]] = static_cast<int>(i);
  }
  for (const RawLine& raw : lines) {
    try {
      corpus.docs.push_back(
          document_from_json(raw.obj, schema, label_index));
    } catch (const SchemaError&) {
      throw;
    } catch (const InvalidDocument&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), raw.line_no);
    }
  }
  return corpus;
}

json document_to_json(const Document& doc,
                      const std::vector<std::string>& class_names) {
  json j;
  j["id"] = doc.id;
  j["text"] = doc.text();
  if (doc.task_label >= 0 &&
      doc.task_label < static_cast<int>(class_names.size())) {
    j["label"] = class_names[doc.task_label];
  } else {
    j["label"] = std::to_string(doc.task_label);
  }
  j["attributes"] = json::object();
  for (const auto& [name, value] : doc.attributes) {
    j["attributes"][name] = value;
  }
  j["domain"] = doc.domain_tag;
  return j;
}

void save_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  for (const Document& doc : corpus.docs) {
    out << document_to_json(doc, corpus.class_names).dump() << '\n';
  }
}

CorpusSplit split(const Corpus& corpus, uint64_t seed, double aux_fraction) {
  if (corpus.size() < 4) {
    throw EmptyDataset("split needs at least 4 documents");
  }
  if (!(aux_fraction > 0.0 && aux_fraction < 1.0)) {
    throw ConfigError("aux_fraction must be in (0, 1)");
  }
  std::vector<Document> docs = corpus.docs;
  RngStream rng(derive_seed(seed, "split"));
  rng.shuffle(docs);

  CorpusSplit out;
  const size_t n = docs.size();
  const size_t n_victim = (n + 1) / 2;
  out.victim_train.assign(docs.begin(), docs.begin() + n_victim);
  const size_t n_attacker = n - n_victim;
  const size_t n_aux = static_cast<size_t>(
      std::llround(aux_fraction * static_cast<double>(n_attacker)));
  const size_t n_query = n_attacker - n_aux;
  out.query_pool.assign(docs.begin() + n_victim,
                        docs.begin() + n_victim + n_query);
  out.aux.assign(docs.begin() + n_victim + n_query, docs.end());
  return out;
}

double ngram_overlap(const Corpus& reference, const Corpus& query, size_t n) {
  if (n < 1) throw ConfigError("ngram_overlap: n must be >= 1");
  if (reference.docs.empty() || query.docs.empty()) {
    throw EmptyDataset("ngram_overlap: empty corpus");
  }
  auto collect = [n](const Corpus& c) {
    std::unordered_set<std::string> grams;
    for (const Document& doc : c.docs) {
      if (doc.tokens.size() < n) continue;
      for (size_t i = 0; i + n <= doc.tokens.size(); ++i) {
        std::string key;
        for (size_t k = 0; k < n; ++k) {
          if (k) key += '\x1f';
          key += doc.tokens[i + k];
        }
        grams.insert(std::move(key));
      }
    }
    return grams;
  };
  const auto ref = collect(reference);
  if (ref.empty()) {
    throw EmptyInput("ngram_overlap: reference has no n-grams of order " +
                     std::to_string(n));
  }
  const auto q = collect(query);
  size_t hit = 0;
  for (const auto& g : ref) {
    if (q.count(g)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(ref.size());
}

double attribute_histogram_variance(const std::vector<Document>& docs,
                                    const AttributeSchema& schema,
                                    const std::string& attribute) {
  const AttributeSpec& spec = schema.find(attribute);
  std::vector<size_t> counts(spec.values.size(), 0);
  size_t total = 0;
  for (const Document& doc : docs) {
    auto it = doc.attributes.find(attribute);
    if (it == doc.attributes.end()) continue;
    counts[spec.value_index(it->second)] += 1;
    ++total;
  }
  if (total == 0) {
    throw EmptyInput("no documents carry attribute '" + attribute + "'");
  }
  const double k = static_cast<double>(counts.size());
  const double mean = 1.0 / k;  // frequencies sum to 1
  double var = 0.0;
  for (size_t c : counts) {
    const double f = static_cast<double>(c) / static_cast<double>(total);
    var += (f - mean) * (f - mean);
  }
  return var / k;
}

double attribute_histogram_variance(const Corpus& corpus,
                                    const std::string& attribute) {
  return attribute_histogram_variance(corpus.docs, corpus.schema, attribute);
}

json schema_to_json(const AttributeSchema& schema) {
  json out = json::array();
  for (const AttributeSpec& a : schema.attributes) {
    json ja;
    ja["name"] = a.name;
    ja["values"] = a.values;
    ja["kind"] = a.kind == AttributeKind::kDemographic ? "demographic"
                                                       : "entity_presence";
    out.push_back(std::move(ja));
  }
  return out;
}

AttributeSchema schema_from_json(const json& j) {
  AttributeSchema schema;
  for (const json& ja : j) {
    AttributeSpec a;
    a.name = ja.at("name").get<std::string>();
    a.values = ja.at("values").get<std::vector<std::string>>();
    const std::string kind = ja.value("kind", std::string("demographic"));
    if (kind == "demographic") {
      a.kind = AttributeKind::kDemographic;
    } else if (kind == "entity_presence") {
      a.kind = AttributeKind::kEntityPresence;
    } else {
      throw ConfigError("unknown attribute kind '" + kind + "'");
    }
    schema.attributes.push_back(std::move(a));
  }
  schema.validate();
  return schema;
}

json synth_to_json(const SynthConfig& cfg) {
  json j;
  j["num_classes"] = cfg.num_classes;
  if (!cfg.class_marginals.empty()) j["class_marginals"] = cfg.class_marginals;
  j["attributes"] = json::array();
  for (const auto& a : cfg.attributes) {
    json ja;
    ja["name"] = a.spec.name;
    ja["values"] = a.spec.values;
    ja["kind"] = a.spec.kind == AttributeKind::kDemographic
                     ? "demographic"
                     : "entity_presence";
    ja["marginals"] = a.marginals;
    ja["leakage"] = a.leakage;
    j["attributes"].push_back(std::move(ja));
  }
  j["tokens_per_class"] = cfg.tokens_per_class;
  j["tokens_per_value"] = cfg.tokens_per_value;
  j["noise_tokens"] = cfg.noise_tokens;
  j["task_token_weight"] = cfg.task_token_weight;
  j["attribute_token_weight"] = cfg.attribute_token_weight;
  j["noise_token_weight"] = cfg.noise_token_weight;
  j["min_doc_length"] = cfg.min_doc_length;
  j["max_doc_length"] = cfg.max_doc_length;
  j["corpus_size"] = cfg.corpus_size;
  j["seed"] = cfg.seed;
  j["domain_tag"] = cfg.domain_tag;
  j["noise_vocab_offset"] = cfg.noise_vocab_offset;
  return j;
}

SynthConfig synth_from_json(const json& j) {
  SynthConfig cfg;
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  cfg.class_marginals =
      j.value("class_marginals", std::vector<double>{});
  cfg.attributes.clear();
  for (const json& ja : j.value("attributes", json::array())) {
    SynthAttributeConfig a;
    a.spec.name = ja.at("name").get<std::string>();
    a.spec.values = ja.at("values").get<std::vector<std::string>>();
    const std::string kind = ja.value("kind", std::string("demographic"));
    if (kind == "demographic") {
      a.spec.kind = AttributeKind::kDemographic;
    } else if (kind == "entity_presence") {
      a.spec.kind = AttributeKind::kEntityPresence;
    } else {
      throw ConfigError("unknown attribute kind '" + kind + "'");
    }
    if (ja.contains("marginals")) {
      a.marginals = ja.at("marginals").get<std::vector<double>>();
    } else {
      a.marginals.assign(a.spec.values.size(),
                         1.0 / static_cast<double>(a.spec.values.size()));
    }
    a.leakage = ja.value("leakage", a.leakage);
    cfg.attributes.push_back(std::move(a));
  }
  cfg.tokens_per_class = j.value("tokens_per_class", cfg.tokens_per_class);
  cfg.tokens_per_value = j.value("tokens_per_value", cfg.tokens_per_value);
  cfg.noise_tokens = j.value("noise_tokens", cfg.noise_tokens);
  cfg.task_token_weight = j.value("task_token_weight", cfg.task_token_weight);
  cfg.attribute_token_weight =
      j.value("attribute_token_weight", cfg.attribute_token_weight);
  cfg.noise_token_weight =
      j.value("noise_token_weight", cfg.noise_token_weight);
  cfg.min_doc_length = j.value("min_doc_length", cfg.min_doc_length);
  cfg.max_doc_length = j.value("max_doc_length", cfg.max_doc_length);
  cfg.corpus_size = j.value("corpus_size", cfg.corpus_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.domain_tag = j.value("domain_tag", cfg.domain_tag);
  cfg.noise_vocab_offset =
      j.value("noise_vocab_offset", cfg.noise_vocab_offset);
  cfg.validate();
  return cfg;
}

}  // namespace modelleak
