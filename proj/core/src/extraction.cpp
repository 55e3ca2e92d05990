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

#include "modelleak/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "modelleak/error.hpp"
#include "modelleak/rng.hpp"

namespace modelleak {

using nlohmann::json;

size_t plan_budget(const QueryPlan& plan, size_t victim_train_size) {
  if (!(plan.budget_multiplier > 0.0) || !std::isfinite(plan.budget_multiplier)) {
    throw ConfigError("budget_multiplier must be finite and positive");
  }
  if (victim_train_size == 0) throw EmptyDataset("victim training set is empty");
  auto budget = static_cast<size_t>(
      std::llround(plan.budget_multiplier * static_cast<double>(victim_train_size)));
  if (budget == 0) {
    throw ConfigError("query budget rounds to zero");
  }
  return budget;
}

std::string plan_label(const QueryPlan& plan) {
  std::ostringstream out;
  out << (plan.source == QuerySource::kSameDomain ? "same" : "cross");
  out << "-" << plan.budget_multiplier << "x";
  return out.str();
}

namespace {

std::vector<Document> sample_queries(const QueryPlan& plan,
                                     const std::vector<Document>& query_pool,
                                     size_t budget) {
  if (plan.source == QuerySource::kCrossDomain) {
    SynthConfig cfg = plan.cross_generator;
    cfg.corpus_size = budget;
    cfg.seed = derive_seed(plan.seed, "cross-queries");
    return generate_synthetic(cfg).docs;
  }
  if (query_pool.empty()) throw EmptyDataset("query pool is empty");
  RngStream rng(derive_seed(plan.seed, "transfer-sample"));
  std::vector<Document> out;
  out.reserve(budget);
  if (budget <= query_pool.size()) {
    std::vector<size_t> order(query_pool.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (size_t i = 0; i < budget; ++i) out.push_back(query_pool[order[i]]);
  } else {
    for (size_t i = 0; i < budget; ++i) {
      out.push_back(query_pool[rng.uniform_index(query_pool.size())]);
    }
  }
  return out;
}

}  // namespace

TransferSet build_transfer_set(const QueryPlan& plan,
                               const std::vector<Document>& query_pool,
                               Transport& transport, BudgetLedger& ledger,
                               size_t victim_train_size,
                               const ClientConfig& client_cfg) {
  const size_t budget = plan_budget(plan, victim_train_size);
  std::vector<Document> queries = sample_queries(plan, query_pool, budget);
  std::vector<Vec> posteriors = client_query(transport, queries, ledger, client_cfg);

  TransferSet ts;
  ts.pairs.reserve(queries.size());
  for (size_t i = 0; i < queries.size(); ++i) {
    ts.pairs.push_back({std::move(queries[i]), std::move(posteriors[i])});
  }
  return ts;
}

ClassifierModel train_extracted(const TransferSet& ts,
                                const ModelConfig& model_cfg,
                                const TrainConfig& train_cfg) {
  if (ts.pairs.empty()) throw EmptyDataset("transfer set is empty");
  std::vector<Document> docs;
  std::vector<Vec> targets;
  docs.reserve(ts.size());
  targets.reserve(ts.size());
  for (const auto& pair : ts.pairs) {
    if (pair.posterior.size() != model_cfg.num_classes) {
      throw ShapeError("transfer posterior length does not match num_classes");
    }
    docs.push_back(pair.doc);
    targets.push_back(pair.posterior);
  }
  ClassifierModel model = ClassifierModel::make(model_cfg);
  train_classifier_soft(model, docs, targets, train_cfg);
  return model;
}

std::vector<int> argmax_labels(const ClassifierModel& model,
                               const std::vector<Document>& docs) {
  std::vector<int> labels;
  labels.reserve(docs.size());
  for (const auto& doc : docs) {
    const Vec posterior = predict_posterior(model, doc);
    size_t best = 0;
    for (size_t k = 1; k < posterior.size(); ++k) {
      if (posterior[k] > posterior[best]) best = k;
    }
    labels.push_back(static_cast<int>(best));
  }
  return labels;
}

double agreement(const ClassifierModel& extracted,
                 const std::vector<int>& victim_labels,
                 const std::vector<Document>& docs) {
  if (docs.empty()) throw EmptyDataset("agreement over empty document set");
  if (victim_labels.size() != docs.size()) {
    throw ShapeError("victim label count does not match document count");
  }
  const std::vector<int> extracted_labels = argmax_labels(extracted, docs);
  size_t matches = 0;
  for (size_t i = 0; i < docs.size(); ++i) {
    if (extracted_labels[i] == victim_labels[i]) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(docs.size());
}

void save_transfer_set(const TransferSet& ts, const std::string& path,
                       const std::vector<std::string>& class_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  for (const auto& pair : ts.pairs) {
    json line;
    line["doc"] = document_to_json(pair.doc, class_names);
    line["posterior"] = pair.posterior;
    out << line.dump() << "\n";
  }
}

TransferSet load_transfer_set(const std::string& path,
                              const AttributeSchema& schema,
                              const std::vector<std::string>& class_names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);
  std::map<std::string, int> label_index;
  for (size_t i = 0; i < class_names.size(); ++i) {
    label_index[class_names[i]] = static_cast<int>(i);
  }
  TransferSet ts;
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json line;
    try {
      line = json::parse(raw);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad transfer line: ") + e.what(), line_no);
    }
    if (!line.contains("doc") || !line.contains("posterior") ||
        !line["posterior"].is_array()) {
      throw ParseError("transfer line missing doc or posterior", line_no);
    }
    TransferPair pair;
    pair.doc = document_from_json(line["doc"], schema, label_index);
    pair.posterior = line["posterior"].get<Vec>();
    ts.pairs.push_back(std::move(pair));
  }
  return ts;
}

}  // namespace modelleak
