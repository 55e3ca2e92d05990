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
#include <cstdio>
#include <set>
#include <vector>

#include <doctest.h>

#include "modelleak/error.hpp"
#include "modelleak/victim.hpp"

using namespace modelleak;

namespace {

SynthConfig task_config(uint64_t seed) {
  SynthConfig cfg;
  cfg.num_classes = 4;
  SynthAttributeConfig attr;
  attr.spec.name = "region";
  attr.spec.values = {"north", "south"};
  attr.marginals = {0.5, 0.5};
  attr.leakage = 0.8;
  cfg.attributes = {attr};
  cfg.corpus_size = 900;
  cfg.seed = seed;
  return cfg;
}

ModelConfig small_model_config() {
  ModelConfig cfg;
  cfg.vocab_size = 1000;
  cfg.feature_dim = 256;
  cfg.hidden_dims = {32, 16};
  cfg.num_classes = 4;
  cfg.seed = 2;
  return cfg;
}

struct Fixture {
  Corpus corpus;
  CorpusSplit splits;
  VictimModel victim;
  std::vector<Document> eval_docs;

  explicit Fixture(DefenseConfig defense = NoDefense{}) {
    corpus = generate_synthetic(task_config(77));
    splits = split(corpus, 5, 0.25);
    TrainConfig train_cfg;
    train_cfg.seed = 21;
    victim = train_victim(splits.victim_train, small_model_config(), train_cfg,
                          defense);
    Corpus held_out = generate_synthetic(task_config(1234));
    eval_docs.assign(held_out.docs.begin(), held_out.docs.begin() + 300);
  }
};

TransferSet build_with_budget(Fixture& fx, const QueryPlan& plan,
                              size_t max_budget) {
  DirectTransport transport(fx.victim);
  BudgetLedger ledger(max_budget);
  return build_transfer_set(plan, fx.splits.query_pool, transport, ledger,
                            fx.splits.victim_train.size());
}

}  // namespace

TEST_SUITE("extraction") {

TEST_CASE("plan budget arithmetic") {
  QueryPlan plan;
  plan.budget_multiplier = 0.1;
  CHECK(plan_budget(plan, 500) == 50);
  plan.budget_multiplier = 1.0;
  CHECK(plan_budget(plan, 500) == 500);
  plan.budget_multiplier = 5.0;
  CHECK(plan_budget(plan, 500) == 2500);
  plan.budget_multiplier = 0.1;
  CHECK(plan_budget(plan, 450) == 45);

  plan.budget_multiplier = 0.0;
  CHECK_THROWS_AS(plan_budget(plan, 500), ConfigError);
  plan.budget_multiplier = -1.0;
  CHECK_THROWS_AS(plan_budget(plan, 500), ConfigError);
  plan.budget_multiplier = 1e-9;
  CHECK_THROWS_AS(plan_budget(plan, 500), ConfigError);
  plan.budget_multiplier = 1.0;
  CHECK_THROWS_AS(plan_budget(plan, 0), EmptyDataset);
}

TEST_CASE("same-domain sampling without replacement when budget fits pool") {
  Fixture fx;
  QueryPlan plan;
  plan.budget_multiplier = 0.1;
  plan.seed = 3;
  const size_t budget = plan_budget(plan, fx.splits.victim_train.size());
  REQUIRE(budget <= fx.splits.query_pool.size());

  const TransferSet ts = build_with_budget(fx, plan, budget);
  CHECK(ts.size() == budget);
  std::set<std::string> ids;
  for (const auto& pair : ts.pairs) ids.insert(pair.doc.id);
  CHECK(ids.size() == ts.size());

  std::set<std::string> pool_ids;
  for (const auto& doc : fx.splits.query_pool) pool_ids.insert(doc.id);
  for (const auto& id : ids) CHECK(pool_ids.count(id) == 1);
}

TEST_CASE("sampling with replacement once budget exceeds the pool") {
  Fixture fx;
  QueryPlan plan;
  plan.budget_multiplier = 5.0;
  plan.seed = 3;
  const size_t budget = plan_budget(plan, fx.splits.victim_train.size());
  REQUIRE(budget > fx.splits.query_pool.size());

  const TransferSet ts = build_with_budget(fx, plan, budget);
  CHECK(ts.size() == budget);
  std::set<std::string> ids;
  for (const auto& pair : ts.pairs) ids.insert(pair.doc.id);
  CHECK(ids.size() < ts.size());
  CHECK(ids.size() <= fx.splits.query_pool.size());
}

TEST_CASE("fixed seed reproduces the sample, another seed changes it") {
  Fixture fx;
  QueryPlan plan;
  plan.budget_multiplier = 0.5;
  plan.seed = 9;

  const TransferSet a = build_with_budget(fx, plan, 10000);
  const TransferSet b = build_with_budget(fx, plan, 10000);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a.pairs[i].doc.id == b.pairs[i].doc.id);
    CHECK(a.pairs[i].posterior == b.pairs[i].posterior);
  }

  plan.seed = 10;
  const TransferSet c = build_with_budget(fx, plan, 10000);
  bool any_difference = false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a.pairs[i].doc.id != c.pairs[i].doc.id) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("pairs carry the victim posterior for their own document") {
  Fixture fx;
  QueryPlan plan;
  plan.budget_multiplier = 0.2;
  plan.seed = 4;
  const TransferSet ts = build_with_budget(fx, plan, 10000);
  for (size_t i = 0; i < std::min<size_t>(ts.size(), 25); ++i) {
    const Vec direct = predict(fx.victim, ts.pairs[i].doc);
    REQUIRE(direct.size() == ts.pairs[i].posterior.size());
    for (size_t k = 0; k < direct.size(); ++k) {
      CHECK(ts.pairs[i].posterior[k] == doctest::Approx(direct[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("budget ledger is spent exactly and exhaustion propagates") {
  Fixture fx;
  QueryPlan plan;
  plan.budget_multiplier = 0.1;
  plan.seed = 1;
  const size_t budget = plan_budget(plan, fx.splits.victim_train.size());

  DirectTransport transport(fx.victim);
  BudgetLedger ledger(budget);
  const TransferSet ts = build_transfer_set(plan, fx.splits.query_pool,
                                            transport, ledger,
                                            fx.splits.victim_train.size());
  CHECK(ts.size() == budget);
  CHECK(ledger.used() == budget);
  CHECK(ledger.remaining() == 0);

  BudgetLedger tight(budget - 1);
  CHECK_THROWS_AS(build_transfer_set(plan, fx.splits.query_pool, transport,
                                     tight, fx.splits.victim_train.size()),
                  BudgetExhausted);
  CHECK(tight.used() == 0);
}

TEST_CASE("empty pool raises EmptyDataset for same-domain plans") {
  Fixture fx;
  QueryPlan plan;
  plan.budget_multiplier = 1.0;
  plan.seed = 0;
  DirectTransport transport(fx.victim);
  BudgetLedger ledger(10000);
  const std::vector<Document> empty_pool;
  CHECK_THROWS_AS(build_transfer_set(plan, empty_pool, transport, ledger,
                                     fx.splits.victim_train.size()),
                  EmptyDataset);
}

TEST_CASE("cross-domain plans generate their own queries") {
  Fixture fx;
  QueryPlan plan;
  plan.source = QuerySource::kCrossDomain;
  plan.budget_multiplier = 0.4;
  plan.seed = 6;
  plan.cross_generator = task_config(0);
  plan.cross_generator.noise_vocab_offset = plan.cross_generator.noise_tokens;
  plan.cross_generator.domain_tag = "cross";

  const size_t budget = plan_budget(plan, fx.splits.victim_train.size());
  const TransferSet ts = build_with_budget(fx, plan, budget);
  CHECK(ts.size() == budget);
  for (const auto& pair : ts.pairs) {
    CHECK(pair.doc.domain_tag == "cross");
    REQUIRE(pair.posterior.size() == 4);
  }

  const TransferSet again = build_with_budget(fx, plan, budget);
  for (size_t i = 0; i < ts.size(); ++i) {
    CHECK(ts.pairs[i].doc.id == again.pairs[i].doc.id);
    CHECK(ts.pairs[i].doc.tokens == again.pairs[i].doc.tokens);
  }
}

TEST_CASE("hard-label victim yields one-hot transfer targets") {
  Fixture fx{Temperature{0.0}};
  QueryPlan plan;
  plan.budget_multiplier = 0.2;
  plan.seed = 2;
  const TransferSet ts = build_with_budget(fx, plan, 10000);
  for (const auto& pair : ts.pairs) {
    size_t ones = 0, zeros = 0;
    for (double v : pair.posterior) {
      if (v == 1.0) ++ones;
      if (v == 0.0) ++zeros;
    }
    CHECK(ones == 1);
    CHECK(zeros == pair.posterior.size() - 1);
  }
}

TEST_CASE("distilled model approaches victim accuracy at 1x, no defense") {
  Fixture fx;
  QueryPlan plan;
  plan.budget_multiplier = 1.0;
  plan.seed = 12;
  const TransferSet ts = build_with_budget(fx, plan, 10000);

  ModelConfig extracted_cfg = small_model_config();
  extracted_cfg.seed = 31;
  TrainConfig extracted_train;
  extracted_train.seed = 44;
  const ClassifierModel extracted =
      train_extracted(ts, extracted_cfg, extracted_train);
  CHECK(extracted.trained);

  const double victim_acc = evaluate_accuracy(fx.victim.model, fx.eval_docs);
  const double extracted_acc = evaluate_accuracy(extracted, fx.eval_docs);
  CHECK(extracted_acc >= victim_acc - 0.05);
}

TEST_CASE("train_extracted validates inputs") {
  Fixture fx;
  TransferSet empty;
  CHECK_THROWS_AS(train_extracted(empty, small_model_config(), TrainConfig{}),
                  EmptyDataset);

  QueryPlan plan;
  plan.budget_multiplier = 0.1;
  plan.seed = 0;
  TransferSet ts = build_with_budget(fx, plan, 10000);
  ModelConfig wrong = small_model_config();
  wrong.num_classes = 3;
  CHECK_THROWS_AS(train_extracted(ts, wrong, TrainConfig{}), ShapeError);
}

TEST_CASE("agreement of a model with itself is exactly one") {
  Fixture fx;
  const std::vector<int> labels =
      argmax_labels(fx.victim.model, fx.eval_docs);
  CHECK(agreement(fx.victim.model, labels, fx.eval_docs) == 1.0);
}

TEST_CASE("agreement against a constant predictor matches the modal rate") {
  Fixture fx;
  const std::vector<int> victim_labels =
      argmax_labels(fx.victim.model, fx.eval_docs);

  // A model with zero weights scores alike everywhere; argmax ties go to
  // class 0, making it a constant predictor.
  ClassifierModel constant = ClassifierModel::make(small_model_config());
  for (auto& w : constant.net.weights) {
    std::fill(w.data.begin(), w.data.end(), 0.0);
  }
  for (auto& b : constant.net.biases) {
    std::fill(b.begin(), b.end(), 0.0);
  }
  constant.trained = true;

  size_t zeros = 0;
  for (int label : victim_labels) {
    if (label == 0) ++zeros;
  }
  const double expected =
      static_cast<double>(zeros) / static_cast<double>(victim_labels.size());
  CHECK(agreement(constant, victim_labels, fx.eval_docs) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("agreement input validation") {
  Fixture fx;
  const std::vector<int> labels =
      argmax_labels(fx.victim.model, fx.eval_docs);
  CHECK_THROWS_AS(agreement(fx.victim.model, labels, {}), EmptyDataset);
  std::vector<int> short_labels(labels.begin(), labels.end() - 1);
  CHECK_THROWS_AS(agreement(fx.victim.model, short_labels, fx.eval_docs),
                  ShapeError);
}

TEST_CASE("transfer set round trips through JSONL") {
  Fixture fx;
  QueryPlan plan;
  plan.budget_multiplier = 0.1;
  plan.seed = 8;
  const TransferSet ts = build_with_budget(fx, plan, 10000);

  const std::string path = "transfer_roundtrip.jsonl";
  save_transfer_set(ts, path, fx.corpus.class_names);
  const TransferSet loaded =
      load_transfer_set(path, fx.corpus.schema, fx.corpus.class_names);
  std::remove(path.c_str());

  REQUIRE(loaded.size() == ts.size());
  for (size_t i = 0; i < ts.size(); ++i) {
    CHECK(loaded.pairs[i].doc.id == ts.pairs[i].doc.id);
    CHECK(loaded.pairs[i].doc.tokens == ts.pairs[i].doc.tokens);
    CHECK(loaded.pairs[i].doc.task_label == ts.pairs[i].doc.task_label);
    CHECK(loaded.pairs[i].doc.attributes == ts.pairs[i].doc.attributes);
    CHECK(loaded.pairs[i].posterior == ts.pairs[i].posterior);
  }
}

TEST_CASE("loading rejects malformed transfer lines") {
  Fixture fx;
  const std::string path = "transfer_bad.jsonl";
  {
    FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fputs("not json\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(
      static_cast<void>(load_transfer_set(path, fx.corpus.schema,
                                          fx.corpus.class_names)),
      doctest::Contains("line 1"), ParseError);

  {
    FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fputs("{\"doc\": {\"id\": \"x\"}}\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(static_cast<void>(load_transfer_set(path, fx.corpus.schema,
                                                      fx.corpus.class_names)),
                  ParseError);
  std::remove(path.c_str());
}

}  // TEST_SUITE
