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

#ifndef MODELLEAK_EXTRACTION_HPP_
#define MODELLEAK_EXTRACTION_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "modelleak/apiserve.hpp"
#include "modelleak/corpus.hpp"
#include "modelleak/textmodel.hpp"

namespace modelleak {

// One query and the posterior the victim released for it.
struct TransferPair {
  Document doc;
  Vec posterior;
};

struct TransferSet {
  std::vector<TransferPair> pairs;
  size_t size() const { return pairs.size(); }
};

enum class QuerySource { kSameDomain, kCrossDomain };

// Where queries come from and how many: budget = round(multiplier * |D_V|).
struct QueryPlan {
  QuerySource source = QuerySource::kSameDomain;
  double budget_multiplier = 1.0;
  uint64_t seed = 0;
  // Generator for cross-domain queries; corpus_size and seed are
  // overridden by the plan at build time.
  SynthConfig cross_generator;
};

size_t plan_budget(const QueryPlan& plan, size_t victim_train_size);

std::string plan_label(const QueryPlan& plan);

// Samples `budget` query documents (without replacement while the pool
// lasts, with replacement beyond it), sends them through the transport,
// and pairs each with the returned posterior.
TransferSet build_transfer_set(const QueryPlan& plan,
                               const std::vector<Document>& query_pool,
                               Transport& transport, BudgetLedger& ledger,
                               size_t victim_train_size,
                               const ClientConfig& client_cfg = {});

// Distills the extracted model on teacher posteriors. The architecture
// is whatever model_cfg says; it need not match the victim.
ClassifierModel train_extracted(const TransferSet& ts,
                                const ModelConfig& model_cfg,
                                const TrainConfig& train_cfg);

// Victim argmax labels over a dataset, for agreement scoring.
std::vector<int> argmax_labels(const ClassifierModel& model,
                               const std::vector<Document>& docs);

// Fraction of documents where the extracted argmax matches the victim's.
double agreement(const ClassifierModel& extracted,
                 const std::vector<int>& victim_labels,
                 const std::vector<Document>& docs);

// JSONL persistence: {"doc": {...}, "posterior": [...]} per line.
void save_transfer_set(const TransferSet& ts, const std::string& path,
                       const std::vector<std::string>& class_names);
TransferSet load_transfer_set(const std::string& path,
                              const AttributeSchema& schema,
                              const std::vector<std::string>& class_names);

}  // namespace modelleak

#endif  // MODELLEAK_EXTRACTION_HPP_
