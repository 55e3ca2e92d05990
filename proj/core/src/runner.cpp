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

#include "modelleak/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "modelleak/apiserve.hpp"
#include "modelleak/error.hpp"
#include "modelleak/rng.hpp"
#include "modelleak/victim.hpp"

namespace modelleak {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  return json(v).dump();
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"learning_rate", cfg.learning_rate},
              {"batch_size", cfg.batch_size},
              {"adam_beta1", cfg.adam_beta1},
              {"adam_beta2", cfg.adam_beta2},
              {"adam_epsilon", cfg.adam_epsilon},
              {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<size_t>();
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<size_t>();
  if (j.contains("adam_beta1")) cfg.adam_beta1 = j.at("adam_beta1").get<double>();
  if (j.contains("adam_beta2")) cfg.adam_beta2 = j.at("adam_beta2").get<double>();
  if (j.contains("adam_epsilon")) cfg.adam_epsilon = j.at("adam_epsilon").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

std::string source_name(QuerySource source) {
  return source == QuerySource::kSameDomain ? "same_domain" : "cross_domain";
}

QuerySource source_from_name(const std::string& name) {
  if (name == "same_domain") return QuerySource::kSameDomain;
  if (name == "cross_domain") return QuerySource::kCrossDomain;
  throw ConfigError("unknown query source: " + name);
}

std::string spec_label(const PlanSpec& spec) {
  std::ostringstream out;
  out << (spec.source == QuerySource::kSameDomain ? "same" : "cross") << "-"
      << spec.multiplier << "x";
  return out.str();
}

// Distinguishes grid entries that share a kind but differ in parameters.
std::string defense_label(const DefenseConfig& defense) {
  const std::string kind = defense_kind(defense);
  const json j = defense_to_json(defense);
  std::ostringstream out;
  out << kind;
  std::vector<std::string> params;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") continue;
    params.push_back(value.dump());
  }
  if (!params.empty()) {
    out << "(";
    for (size_t i = 0; i < params.size(); ++i) {
      if (i > 0) out << ",";
      out << params[i];
    }
    out << ")";
  }
  return out.str();
}

std::map<std::string, std::vector<int>> attribute_values(
    const std::vector<Document>& docs, const AttributeSchema& schema) {
  std::map<std::string, std::vector<int>> out;
  for (const auto& attr : schema.attributes) {
    auto& column = out[attr.name];
    column.reserve(docs.size());
    for (const auto& doc : docs) {
      auto it = doc.attributes.find(attr.name);
      if (it == doc.attributes.end()) {
        throw SchemaError("document " + doc.id + " lacks attribute " + attr.name);
      }
      column.push_back(static_cast<int>(attr.value_index(it->second)));
    }
  }
  return out;
}

// RepresentationDataset carrier for value counting only.
RepresentationDataset values_only(const std::vector<Document>& docs,
                                  const AttributeSchema& schema) {
  RepresentationDataset data;
  data.schema = schema;
  data.dim = 0;
  data.values = attribute_values(docs, schema);
  for (const auto& doc : docs) {
    data.doc_ids.push_back(doc.id);
    data.representations.emplace_back();
  }
  return data;
}

struct AttackScores {
  std::map<std::string, double> accuracy;
  std::map<std::string, double> entity_f1_local;
  double demographic_privacy = kNaN;
  double entities_privacy = kNaN;
  double entities_macro = kNaN;
};

AttackScores score_predictions(
    const std::map<std::string, std::vector<int>>& predicted,
    const std::map<std::string, std::vector<int>>& gold,
    const AttributeSchema& schema) {
  AttackScores scores;
  std::vector<double> demographic_accs;
  std::map<std::string, std::vector<int>> entity_pred, entity_gold;
  for (const auto& attr : schema.attributes) {
    const auto& pred_column = predicted.at(attr.name);
    const auto& gold_column = gold.at(attr.name);
    const double acc = attribute_accuracy(pred_column, gold_column);
    scores.accuracy[attr.name] = acc;
    if (attr.kind == AttributeKind::kEntityPresence) {
      entity_pred[attr.name] = pred_column;
      entity_gold[attr.name] = gold_column;
      scores.entity_f1_local[attr.name] =
          entity_f1({{attr.name, pred_column}}, {{attr.name, gold_column}})
              .micro_f1;
    } else {
      demographic_accs.push_back(acc);
    }
  }
  if (!demographic_accs.empty()) {
    scores.demographic_privacy = empirical_privacy_demographic(demographic_accs);
  }
  if (!entity_gold.empty()) {
    const EntityF1 f1 = entity_f1(entity_pred, entity_gold);
    scores.entities_privacy = 1.0 - f1.micro_f1;
    scores.entities_macro = f1.macro_f1;
  }
  return scores;
}

// Demographic privacy when demographic attributes exist, entity privacy
// otherwise; the single number used by the sweeps.
double primary_privacy(double demographic, double entities) {
  return std::isnan(demographic) ? entities : demographic;
}

// AIA through one harvest source: train on aux, attack D_V.
AttackScores attack_through(const ClassifierModel& source,
                            const std::vector<Document>& aux,
                            const std::vector<Document>& victim_train,
                            const std::map<std::string, std::vector<int>>& gold,
                            const AttributeSchema& schema,
                            const InferenceConfig& aia_cfg) {
  const RepresentationDataset aux_data =
      harvest_representations(source, aux, schema);
  const AttributeInferenceModel inference = train_inference(aux_data, aia_cfg);
  const auto predictions = infer_attributes(inference, source, victim_train);
  return score_predictions(predictions, gold, schema);
}

struct SeedContext {
  uint64_t seed = 0;
  Corpus corpus;
  CorpusSplit splits;
  std::vector<Document> test_docs;
  ModelConfig victim_model_cfg;
  TrainConfig victim_train_cfg;
  ModelConfig extracted_model_cfg;
  TrainConfig extracted_train_cfg;
  InferenceConfig aia_cfg;
  VictimModel standard_victim;
  double standard_victim_accuracy = 0.0;
  std::vector<int> standard_victim_test_labels;
  std::map<std::string, std::vector<int>> gold_values;  // on victim_train
  AttackScores majority_scores;
  AttackScores plain_scores;
  std::map<std::string, double> attribute_variance;
};

Corpus load_experiment_corpus(const ExperimentConfig& cfg, uint64_t seed) {
  if (!cfg.corpus_path.empty()) {
    return load_jsonl(cfg.corpus_path, cfg.corpus_schema);
  }
  SynthConfig synth = cfg.corpus;
  synth.seed = derive_seed(cfg.corpus.seed, seed);
  return generate_synthetic(synth);
}

std::vector<Document> make_test_docs(const ExperimentConfig& cfg,
                                     uint64_t seed, CorpusSplit& splits) {
  if (!cfg.corpus_path.empty()) {
    // File corpora have no generator; hold test documents out of the
    // query pool instead.
    const size_t take = std::min(cfg.test_size, splits.query_pool.size() / 2);
    if (take == 0) throw EmptyDataset("query pool too small to hold out a test set");
    std::vector<Document> test(splits.query_pool.end() - static_cast<long>(take),
                               splits.query_pool.end());
    splits.query_pool.resize(splits.query_pool.size() - take);
    return test;
  }
  SynthConfig synth = cfg.corpus;
  synth.corpus_size = cfg.test_size;
  synth.seed = derive_seed(derive_seed(cfg.corpus.seed, "test"), seed);
  synth.domain_tag = "test";
  return generate_synthetic(synth).docs;
}

SeedContext build_seed_context(const ExperimentConfig& cfg, uint64_t seed) {
  SeedContext ctx;
  ctx.seed = seed;
  ctx.corpus = load_experiment_corpus(cfg, seed);
  ctx.splits = split(ctx.corpus, derive_seed(seed, "split"), cfg.aux_fraction);
  ctx.test_docs = make_test_docs(cfg, seed, ctx.splits);

  ctx.victim_model_cfg = cfg.victim_model;
  ctx.victim_model_cfg.seed = derive_seed(seed, "victim-model");
  ctx.victim_train_cfg = cfg.victim_train;
  ctx.victim_train_cfg.seed = derive_seed(seed, "victim-train");
  ctx.extracted_model_cfg = cfg.extracted_model;
  ctx.extracted_model_cfg.seed = derive_seed(seed, "extracted-model");
  ctx.extracted_train_cfg = cfg.extracted_train;
  ctx.extracted_train_cfg.seed = derive_seed(seed, "extracted-train");
  ctx.aia_cfg = cfg.aia;
  ctx.aia_cfg.train.seed = derive_seed(seed, "aia-train");

  ctx.standard_victim = train_victim(ctx.splits.victim_train,
                                     ctx.victim_model_cfg,
                                     ctx.victim_train_cfg);
  ctx.standard_victim_accuracy =
      evaluate_accuracy(ctx.standard_victim.model, ctx.test_docs);
  ctx.standard_victim_test_labels =
      argmax_labels(ctx.standard_victim.model, ctx.test_docs);

  const AttributeSchema& schema = ctx.corpus.schema;
  ctx.gold_values = attribute_values(ctx.splits.victim_train, schema);

  const RepresentationDataset aux_values = values_only(ctx.splits.aux, schema);
  std::map<std::string, std::vector<int>> majority_pred;
  for (const auto& attr : schema.attributes) {
    majority_pred[attr.name].assign(ctx.splits.victim_train.size(),
                                    majority_baseline(aux_values, attr.name));
  }
  ctx.majority_scores = score_predictions(majority_pred, ctx.gold_values, schema);

  const ClassifierModel plain = plain_baseline_model(
      ctx.extracted_model_cfg, derive_seed(seed, "plain-baseline"));
  ctx.plain_scores =
      attack_through(plain, ctx.splits.aux, ctx.splits.victim_train,
                     ctx.gold_values, schema, ctx.aia_cfg);

  for (const auto& attr : schema.attributes) {
    ctx.attribute_variance[attr.name] = attribute_histogram_variance(
        ctx.splits.victim_train, schema, attr.name);
  }
  return ctx;
}

DefenseConfig seed_defense(const DefenseConfig& defense, uint64_t seed) {
  if (const auto* gaussian = std::get_if<GaussianNoise>(&defense)) {
    GaussianNoise seeded = *gaussian;
    seeded.seed = derive_seed(derive_seed(seed, "defense-noise"), gaussian->seed);
    return seeded;
  }
  return defense;
}

VictimModel victim_for_defense(const SeedContext& ctx,
                               const DefenseConfig& defense) {
  if (const auto* nasty = std::get_if<NastyTeacher>(&defense)) {
    NastyTrainResult result = train_nasty_victim(
        ctx.splits.victim_train, ctx.standard_victim.model, nasty->omega,
        nasty->tau_nt, ctx.victim_model_cfg, ctx.victim_train_cfg);
    return std::move(result.victim);
  }
  VictimModel victim = ctx.standard_victim;
  victim.defense = seed_defense(defense, ctx.seed);
  return victim;
}

Corpus as_corpus(const std::vector<Document>& docs, const Corpus& base) {
  Corpus out;
  out.docs = docs;
  out.schema = base.schema;
  out.class_names = base.class_names;
  return out;
}

CellResult run_cell(const ExperimentConfig& cfg, const SeedContext& ctx,
                    const DefenseConfig& defense, const VictimModel& victim,
                    const PlanSpec& spec, size_t plan_index,
                    TransportKind transport_kind) {
  CellResult cell;
  cell.defense = defense_label(defense);
  cell.plan = spec_label(spec);
  cell.seed_label = std::to_string(ctx.seed);

  QueryPlan plan;
  plan.source = spec.source;
  plan.budget_multiplier = spec.multiplier;
  plan.seed = derive_seed(derive_seed(ctx.seed, "plan"), plan_index);
  plan.cross_generator = cfg.cross_corpus;

  const size_t budget = plan_budget(plan, ctx.splits.victim_train.size());
  cell.budget = static_cast<double>(budget);

  const bool nasty = std::holds_alternative<NastyTeacher>(defense);
  cell.victim_accuracy = nasty
                             ? evaluate_accuracy(victim.model, ctx.test_docs)
                             : ctx.standard_victim_accuracy;

  BudgetLedger ledger(budget);
  TransferSet transfer;
  if (transport_kind == TransportKind::kHttp) {
    auto server = serve(victim);
    HttpTransport transport(server->host(), server->port());
    transfer = build_transfer_set(plan, ctx.splits.query_pool, transport,
                                  ledger, ctx.splits.victim_train.size());
    server->stop();
  } else {
    DirectTransport transport(victim);
    transfer = build_transfer_set(plan, ctx.splits.query_pool, transport,
                                  ledger, ctx.splits.victim_train.size());
  }

  const ClassifierModel extracted = train_extracted(
      transfer, ctx.extracted_model_cfg, ctx.extracted_train_cfg);
  cell.extracted_accuracy = evaluate_accuracy(extracted, ctx.test_docs);
  const std::vector<int> victim_labels =
      nasty ? argmax_labels(victim.model, ctx.test_docs)
            : ctx.standard_victim_test_labels;
  cell.agreement_rate = agreement(extracted, victim_labels, ctx.test_docs);

  std::vector<Vec> posteriors;
  std::vector<Document> query_docs;
  posteriors.reserve(transfer.size());
  query_docs.reserve(transfer.size());
  for (const auto& pair : transfer.pairs) {
    posteriors.push_back(pair.posterior);
    query_docs.push_back(pair.doc);
  }
  cell.sharpness = sharpness_stats(posteriors);

  const Corpus reference = as_corpus(ctx.splits.victim_train, ctx.corpus);
  const Corpus queries = as_corpus(query_docs, ctx.corpus);
  cell.overlap_unigram = ngram_overlap(reference, queries, 1);
  cell.overlap_bigram = ngram_overlap(reference, queries, 2);

  const AttackScores scores =
      attack_through(extracted, ctx.splits.aux, ctx.splits.victim_train,
                     ctx.gold_values, ctx.corpus.schema, ctx.aia_cfg);
  cell.attack_accuracy = scores.accuracy;
  cell.entity_attack_f1 = scores.entity_f1_local;
  cell.privacy_demographic = scores.demographic_privacy;
  cell.privacy_entities = scores.entities_privacy;
  cell.privacy_entities_macro = scores.entities_macro;
  cell.baseline_majority_privacy_demographic =
      ctx.majority_scores.demographic_privacy;
  cell.baseline_majority_privacy_entities = ctx.majority_scores.entities_privacy;
  cell.baseline_plain_privacy_demographic = ctx.plain_scores.demographic_privacy;
  cell.baseline_plain_privacy_entities = ctx.plain_scores.entities_privacy;
  cell.attribute_variance = ctx.attribute_variance;
  cell.completed = true;
  return cell;
}

CellResult failed_cell(const DefenseConfig& defense, const PlanSpec& spec,
                       const std::string& seed_label, const std::string& error) {
  CellResult cell;
  cell.defense = defense_label(defense);
  cell.plan = spec_label(spec);
  cell.seed_label = seed_label;
  cell.completed = false;
  cell.error = error;
  cell.victim_accuracy = kNaN;
  cell.extracted_accuracy = kNaN;
  cell.agreement_rate = kNaN;
  cell.privacy_demographic = kNaN;
  cell.privacy_entities = kNaN;
  cell.privacy_entities_macro = kNaN;
  cell.baseline_majority_privacy_demographic = kNaN;
  cell.baseline_majority_privacy_entities = kNaN;
  cell.baseline_plain_privacy_demographic = kNaN;
  cell.baseline_plain_privacy_entities = kNaN;
  cell.sharpness = {kNaN, kNaN};
  cell.overlap_unigram = kNaN;
  cell.overlap_bigram = kNaN;
  return cell;
}

std::map<std::string, double> mean_map(
    const std::vector<const CellResult*>& done,
    const std::map<std::string, double>& (*get)(const CellResult&)) {
  std::map<std::string, double> out;
  if (done.empty()) return out;
  std::map<std::string, std::pair<double, size_t>> sums;
  for (const CellResult* cell : done) {
    for (const auto& [key, value] : get(*cell)) {
      if (std::isnan(value)) continue;
      sums[key].first += value;
      sums[key].second += 1;
    }
  }
  for (const auto& [key, pair] : sums) {
    out[key] = pair.second ? pair.first / static_cast<double>(pair.second) : kNaN;
  }
  return out;
}

CellResult aggregate_group(const std::vector<const CellResult*>& group) {
  CellResult agg;
  agg.defense = group.front()->defense;
  agg.plan = group.front()->plan;
  agg.seed_label = "mean";

  std::vector<const CellResult*> done;
  for (const CellResult* cell : group) {
    if (cell->completed) done.push_back(cell);
  }
  agg.completed = done.size() == group.size();
  if (done.size() < group.size()) {
    std::ostringstream msg;
    msg << (group.size() - done.size()) << " of " << group.size()
        << " seeds failed";
    agg.error = msg.str();
  }
  const auto mean_of = [&](auto accessor) -> double {
    double sum = 0.0;
    size_t n = 0;
    for (const CellResult* cell : done) {
      const double v = accessor(*cell);
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
    }
    return n ? sum / static_cast<double>(n) : kNaN;
  };
  agg.budget = mean_of([](const CellResult& c) { return c.budget; });
  agg.victim_accuracy = mean_of([](const CellResult& c) { return c.victim_accuracy; });
  agg.extracted_accuracy =
      mean_of([](const CellResult& c) { return c.extracted_accuracy; });
  agg.agreement_rate = mean_of([](const CellResult& c) { return c.agreement_rate; });
  agg.privacy_demographic =
      mean_of([](const CellResult& c) { return c.privacy_demographic; });
  agg.privacy_entities =
      mean_of([](const CellResult& c) { return c.privacy_entities; });
  agg.privacy_entities_macro =
      mean_of([](const CellResult& c) { return c.privacy_entities_macro; });
  agg.baseline_majority_privacy_demographic = mean_of(
      [](const CellResult& c) { return c.baseline_majority_privacy_demographic; });
  agg.baseline_majority_privacy_entities = mean_of(
      [](const CellResult& c) { return c.baseline_majority_privacy_entities; });
  agg.baseline_plain_privacy_demographic = mean_of(
      [](const CellResult& c) { return c.baseline_plain_privacy_demographic; });
  agg.baseline_plain_privacy_entities = mean_of(
      [](const CellResult& c) { return c.baseline_plain_privacy_entities; });
  agg.sharpness.mean_max =
      mean_of([](const CellResult& c) { return c.sharpness.mean_max; });
  agg.sharpness.median_max =
      mean_of([](const CellResult& c) { return c.sharpness.median_max; });
  agg.overlap_unigram = mean_of([](const CellResult& c) { return c.overlap_unigram; });
  agg.overlap_bigram = mean_of([](const CellResult& c) { return c.overlap_bigram; });
  agg.attack_accuracy = mean_map(
      done, +[](const CellResult& c) -> const std::map<std::string, double>& {
        return c.attack_accuracy;
      });
  agg.entity_attack_f1 = mean_map(
      done, +[](const CellResult& c) -> const std::map<std::string, double>& {
        return c.entity_attack_f1;
      });
  agg.attribute_variance = mean_map(
      done, +[](const CellResult& c) -> const std::map<std::string, double>& {
        return c.attribute_variance;
      });
  return agg;
}

json cell_to_json(const CellResult& cell) {
  json j;
  j["defense"] = cell.defense;
  j["plan"] = cell.plan;
  j["seed"] = cell.seed_label;
  j["budget"] = cell.budget;
  j["completed"] = cell.completed;
  if (!cell.error.empty()) j["error"] = cell.error;
  j["victim_accuracy"] = cell.victim_accuracy;
  j["extracted_accuracy"] = cell.extracted_accuracy;
  j["agreement"] = cell.agreement_rate;
  j["attack_accuracy"] = cell.attack_accuracy;
  j["entity_attack_f1"] = cell.entity_attack_f1;
  j["empirical_privacy_demographic"] = cell.privacy_demographic;
  j["empirical_privacy_entities"] = cell.privacy_entities;
  j["entity_macro_f1"] = cell.privacy_entities_macro;
  j["baseline_majority_privacy_demographic"] =
      cell.baseline_majority_privacy_demographic;
  j["baseline_majority_privacy_entities"] =
      cell.baseline_majority_privacy_entities;
  j["baseline_plain_privacy_demographic"] =
      cell.baseline_plain_privacy_demographic;
  j["baseline_plain_privacy_entities"] = cell.baseline_plain_privacy_entities;
  j["sharpness_mean_max"] = cell.sharpness.mean_max;
  j["sharpness_median_max"] = cell.sharpness.median_max;
  j["overlap_unigram"] = cell.overlap_unigram;
  j["overlap_bigram"] = cell.overlap_bigram;
  j["attribute_variance"] = cell.attribute_variance;
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (experiment_id.empty()) throw ConfigError("experiment_id is empty");
  if (seeds.empty()) throw ConfigError("need at least one seed");
  if (!(aux_fraction > 0.0 && aux_fraction < 1.0)) {
    throw ConfigError("aux_fraction must lie in (0,1)");
  }
  if (test_size == 0) throw ConfigError("test_size must be positive");
  if (corpus_path.empty()) {
    corpus.validate();
    if (corpus.num_classes != victim_model.num_classes) {
      throw ConfigError("victim num_classes does not match the corpus");
    }
  } else {
    corpus_schema.validate();
  }
  victim_model.validate();
  victim_train.validate();
  extracted_model.validate();
  extracted_train.validate();
  aia.train.validate();
  if (victim_model.num_classes != extracted_model.num_classes) {
    throw ConfigError("extracted num_classes does not match the victim");
  }
  if (defenses.empty()) throw ConfigError("defense grid is empty");
  for (const auto& defense : defenses) validate_defense(defense);
  if (plans.empty()) throw ConfigError("plan grid is empty");
  bool any_cross = false;
  for (const auto& plan : plans) {
    if (!(plan.multiplier > 0.0) || !std::isfinite(plan.multiplier)) {
      throw ConfigError("plan multiplier must be finite and positive");
    }
    if (plan.source == QuerySource::kCrossDomain) any_cross = true;
  }
  if (any_cross) cross_corpus.validate();
}

bool ExperimentReport::all_completed() const {
  for (const auto& cell : cells) {
    if (!cell.completed) return false;
  }
  return !cells.empty();
}

ExperimentReport run_pipeline(const ExperimentConfig& cfg,
                              TransportKind transport, const RunLogger& log) {
  cfg.validate();
  ExperimentReport report;
  report.config = experiment_to_json(cfg);
  report.transport = transport == TransportKind::kDirect ? "direct" : "http";

  const auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };

  for (uint64_t seed : cfg.seeds) {
    bool context_ok = true;
    SeedContext ctx;
    try {
      ctx = build_seed_context(cfg, seed);
    } catch (const std::exception& e) {
      context_ok = false;
      for (const auto& defense : cfg.defenses) {
        for (const auto& spec : cfg.plans) {
          report.cells.push_back(
              failed_cell(defense, spec, std::to_string(seed), e.what()));
        }
      }
      say("seed " + std::to_string(seed) + ": context failed: " + e.what());
    }
    if (!context_ok) continue;

    for (const auto& defense : cfg.defenses) {
      VictimModel victim;
      bool victim_ok = true;
      std::string victim_error;
      try {
        victim = victim_for_defense(ctx, defense);
      } catch (const std::exception& e) {
        victim_ok = false;
        victim_error = e.what();
      }
      for (size_t p = 0; p < cfg.plans.size(); ++p) {
        const PlanSpec& spec = cfg.plans[p];
        if (!victim_ok) {
          report.cells.push_back(failed_cell(defense, spec,
                                             std::to_string(seed),
                                             victim_error));
          continue;
        }
        try {
          report.cells.push_back(
              run_cell(cfg, ctx, defense, victim, spec, p, transport));
          const CellResult& done = report.cells.back();
          say("cell " + done.defense + " " + done.plan + " seed=" +
              done.seed_label + ": extracted_acc=" +
              fmt_double(done.extracted_accuracy));
        } catch (const std::exception& e) {
          report.cells.push_back(
              failed_cell(defense, spec, std::to_string(seed), e.what()));
          say("cell " + defense_label(defense) + " " + spec_label(spec) +
              " seed=" + std::to_string(seed) + ": failed: " + e.what());
        }
      }
    }
  }

  for (const auto& defense : cfg.defenses) {
    for (const auto& spec : cfg.plans) {
      const std::string dl = defense_label(defense);
      const std::string pl = spec_label(spec);
      std::vector<const CellResult*> group;
      for (const auto& cell : report.cells) {
        if (cell.defense == dl && cell.plan == pl) group.push_back(&cell);
      }
      if (!group.empty()) report.aggregates.push_back(aggregate_group(group));
    }
  }
  return report;
}

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "experiment_id,defense,budget,attribute,attack_acc_or_f1,"
         "empirical_privacy,baseline_majority,baseline_plain\n";
  const std::string base_id =
      report.config.value("experiment_id", std::string("modelleak"));

  const auto emit = [&](const CellResult& cell) {
    const std::string id =
        base_id + "/" + cell.defense + "/" + cell.plan + "/seed=" +
        cell.seed_label;
    if (!cell.completed && cell.attack_accuracy.empty()) {
      out << id << "," << cell.defense << "," << fmt_double(cell.budget)
          << ",,,,,\n";
      return;
    }
    for (const auto& [attr, acc] : cell.attack_accuracy) {
      const bool entity = cell.entity_attack_f1.count(attr) > 0;
      const double metric = entity ? cell.entity_attack_f1.at(attr) : acc;
      const double privacy =
          entity ? cell.privacy_entities : cell.privacy_demographic;
      const double majority = entity
                                  ? cell.baseline_majority_privacy_entities
                                  : cell.baseline_majority_privacy_demographic;
      const double plain = entity ? cell.baseline_plain_privacy_entities
                                  : cell.baseline_plain_privacy_demographic;
      out << id << "," << cell.defense << "," << fmt_double(cell.budget) << ","
          << attr << "," << fmt_double(metric) << "," << fmt_double(privacy)
          << "," << fmt_double(majority) << "," << fmt_double(plain) << "\n";
    }
  };
  for (const auto& cell : report.cells) emit(cell);
  for (const auto& cell : report.aggregates) emit(cell);
  return out.str();
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  json j;
  j["config"] = report.config;
  j["transport"] = report.transport;
  j["cells"] = json::array();
  for (const auto& cell : report.cells) j["cells"].push_back(cell_to_json(cell));
  j["aggregates"] = json::array();
  for (const auto& cell : report.aggregates) {
    j["aggregates"].push_back(cell_to_json(cell));
  }
  return j;
}

nlohmann::json manifest_json(const ExperimentReport& report) {
  json j;
  j["experiment_id"] = report.config.value("experiment_id", std::string());
  j["transport"] = report.transport;
  j["seeds"] = report.config.value("seeds", json::array());
  json cells = json::array();
  for (const auto& cell : report.cells) {
    json c;
    c["defense"] = cell.defense;
    c["plan"] = cell.plan;
    c["seed"] = cell.seed_label;
    c["completed"] = cell.completed;
    if (!cell.error.empty()) c["error"] = cell.error;
    cells.push_back(c);
  }
  j["cells"] = cells;
  j["all_completed"] = report.all_completed();
  j["outputs"] = json::array({"report.csv", "report.json"});
  return j;
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(out_dir + "/report.csv", std::ios::binary);
    if (!csv) throw ParseError("cannot write " + out_dir + "/report.csv");
    csv << report_csv(report);
  }
  {
    std::ofstream jf(out_dir + "/report.json", std::ios::binary);
    if (!jf) throw ParseError("cannot write " + out_dir + "/report.json");
    jf << report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream mf(out_dir + "/manifest.json", std::ios::binary);
    if (!mf) throw ParseError("cannot write " + out_dir + "/manifest.json");
    mf << manifest_json(report).dump(2) << "\n";
  }
}

SharpnessSweep sweep_sharpness(const ExperimentConfig& cfg,
                               const std::vector<double>& tau_grid,
                               TransportKind transport, const RunLogger& log) {
  if (tau_grid.size() < 3) {
    throw InvalidInput("temperature grid needs at least 3 values");
  }
  for (double tau : tau_grid) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw InvalidInput("temperature grid values must be finite and positive");
    }
  }
  ExperimentConfig base = cfg;
  base.plans = {cfg.plans.front()};

  SharpnessSweep sweep;
  for (double tau : tau_grid) {
    ExperimentConfig run_cfg = base;
    run_cfg.defenses = {Temperature{tau}};
    const ExperimentReport report = run_pipeline(run_cfg, transport, log);
    const CellResult& agg = report.aggregates.front();
    if (!agg.completed) {
      throw Error("sharpness sweep cell failed at tau=" + fmt_double(tau) +
                  ": " + agg.error);
    }
    SharpnessPoint point;
    point.tau = tau;
    point.mean_max = agg.sharpness.mean_max;
    point.empirical_privacy =
        primary_privacy(agg.privacy_demographic, agg.privacy_entities);
    sweep.points.push_back(point);
  }

  std::vector<double> xs, ys;
  for (const auto& point : sweep.points) {
    xs.push_back(point.mean_max);
    ys.push_back(point.empirical_privacy);
  }
  sweep.spearman_rho = rank_correlation(xs, ys);
  sweep.direction_pass = sweep.spearman_rho > 0.0;
  return sweep;
}

void write_sharpness_svg(const SharpnessSweep& sweep, const std::string& path) {
  if (sweep.points.empty()) throw EmptyInput("no sweep points to plot");
  const double width = 480.0, height = 360.0, margin = 48.0;
  double min_x = sweep.points.front().mean_max, max_x = min_x;
  double min_y = sweep.points.front().empirical_privacy, max_y = min_y;
  for (const auto& p : sweep.points) {
    min_x = std::min(min_x, p.mean_max);
    max_x = std::max(max_x, p.mean_max);
    min_y = std::min(min_y, p.empirical_privacy);
    max_y = std::max(max_y, p.empirical_privacy);
  }
  if (max_x == min_x) max_x = min_x + 1e-9;
  if (max_y == min_y) max_y = min_y + 1e-9;
  const auto sx = [&](double x) {
    return margin + (x - min_x) / (max_x - min_x) * (width - 2 * margin);
  };
  const auto sy = [&](double y) {
    return height - margin - (y - min_y) / (max_y - min_y) * (height - 2 * margin);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">mean max posterior</text>\n";
  svg << "<text x=\"14\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
      << height / 2 << ")\">empirical privacy</text>\n";
  for (const auto& p : sweep.points) {
    svg << "<circle cx=\"" << sx(p.mean_max) << "\" cy=\""
        << sy(p.empirical_privacy) << "\" r=\"4\" fill=\"steelblue\"/>\n";
    svg << "<text x=\"" << sx(p.mean_max) + 6 << "\" y=\""
        << sy(p.empirical_privacy) - 6 << "\" font-size=\"10\">tau="
        << fmt_double(p.tau) << "</text>\n";
  }
  svg << "<text x=\"" << width - margin << "\" y=\"" << margin - 8
      << "\" text-anchor=\"end\" font-size=\"12\">spearman rho="
      << fmt_double(sweep.spearman_rho) << "</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  out << svg.str();
}

namespace {

std::string architecture_label(const ModelConfig& cfg) {
  std::ostringstream out;
  out << "h";
  for (size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
    if (i > 0) out << "-";
    out << cfg.hidden_dims[i];
  }
  out << (cfg.activation == Activation::kRelu ? "-relu" : "-tanh");
  return out.str();
}

bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
  return a.feature_dim == b.feature_dim && a.hidden_dims == b.hidden_dims &&
         a.num_classes == b.num_classes && a.activation == b.activation;
}

}  // namespace

MismatchSweep sweep_mismatch(const ExperimentConfig& cfg,
                             const std::vector<ModelConfig>& victim_grid,
                             TransportKind transport, const RunLogger& log) {
  if (victim_grid.size() < 2) {
    throw InvalidInput("mismatch sweep needs at least 2 victim configs");
  }
  ExperimentConfig base = cfg;
  base.defenses = {NoDefense{}};
  base.plans = {cfg.plans.front()};

  MismatchSweep sweep;
  for (const ModelConfig& victim_cfg : victim_grid) {
    MismatchCell cell;
    cell.victim_architecture = architecture_label(victim_cfg);
    cell.matched = same_architecture(victim_cfg, cfg.extracted_model);
    ExperimentConfig run_cfg = base;
    run_cfg.victim_model = victim_cfg;
    try {
      const ExperimentReport report = run_pipeline(run_cfg, transport, log);
      const CellResult& agg = report.aggregates.front();
      cell.completed = agg.completed;
      cell.error = agg.error;
      cell.extracted_accuracy = agg.extracted_accuracy;
      cell.agreement_rate = agg.agreement_rate;
      cell.empirical_privacy =
          primary_privacy(agg.privacy_demographic, agg.privacy_entities);
    } catch (const std::exception& e) {
      cell.completed = false;
      cell.error = e.what();
    }
    sweep.cells.push_back(cell);
  }
  return sweep;
}

nlohmann::json experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment_id"] = cfg.experiment_id;
  if (cfg.corpus_path.empty()) {
    j["corpus"] = synth_to_json(cfg.corpus);
  } else {
    j["corpus_path"] = cfg.corpus_path;
    j["corpus_schema"] = schema_to_json(cfg.corpus_schema);
  }
  j["cross_corpus"] = synth_to_json(cfg.cross_corpus);
  j["test_size"] = cfg.test_size;
  j["aux_fraction"] = cfg.aux_fraction;
  j["victim"] = {{"model", model_config_to_json(cfg.victim_model)},
                 {"train", train_config_to_json(cfg.victim_train)}};
  j["extracted"] = {{"model", model_config_to_json(cfg.extracted_model)},
                    {"train", train_config_to_json(cfg.extracted_train)}};
  j["defenses"] = json::array();
  for (const auto& defense : cfg.defenses) {
    j["defenses"].push_back(defense_to_json(defense));
  }
  j["plans"] = json::array();
  for (const auto& plan : cfg.plans) {
    j["plans"].push_back(json{{"source", source_name(plan.source)},
                              {"multiplier", plan.multiplier}});
  }
  j["aia"] = {{"hidden_dim", cfg.aia.hidden_dim},
              {"train", train_config_to_json(cfg.aia.train)}};
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("experiment_id")) {
    cfg.experiment_id = j.at("experiment_id").get<std::string>();
  }
  if (j.contains("corpus_path")) {
    cfg.corpus_path = j.at("corpus_path").get<std::string>();
    if (j.contains("corpus_schema")) {
      cfg.corpus_schema = schema_from_json(j.at("corpus_schema"));
    }
  } else if (j.contains("corpus")) {
    cfg.corpus = synth_from_json(j.at("corpus"));
  }
  if (j.contains("cross_corpus")) {
    cfg.cross_corpus = synth_from_json(j.at("cross_corpus"));
  } else if (cfg.corpus_path.empty()) {
    // Default cross generator: the corpus with a disjoint noise slice.
    cfg.cross_corpus = cfg.corpus;
    cfg.cross_corpus.noise_vocab_offset = cfg.corpus.noise_tokens;
    cfg.cross_corpus.domain_tag = "cross";
  }
  if (j.contains("test_size")) cfg.test_size = j.at("test_size").get<size_t>();
  if (j.contains("aux_fraction")) {
    cfg.aux_fraction = j.at("aux_fraction").get<double>();
  }
  if (j.contains("victim")) {
    const json& v = j.at("victim");
    if (v.contains("model")) cfg.victim_model = model_config_from_json(v.at("model"));
    if (v.contains("train")) cfg.victim_train = train_config_from_json(v.at("train"));
  }
  if (j.contains("extracted")) {
    const json& e = j.at("extracted");
    if (e.contains("model")) {
      cfg.extracted_model = model_config_from_json(e.at("model"));
    }
    if (e.contains("train")) {
      cfg.extracted_train = train_config_from_json(e.at("train"));
    }
  }
  if (j.contains("defenses")) {
    cfg.defenses.clear();
    for (const auto& d : j.at("defenses")) {
      cfg.defenses.push_back(defense_from_json(d));
    }
  }
  if (j.contains("plans")) {
    cfg.plans.clear();
    for (const auto& p : j.at("plans")) {
      PlanSpec spec;
      spec.source = source_from_name(p.value("source", std::string("same_domain")));
      spec.multiplier = p.value("multiplier", 1.0);
      cfg.plans.push_back(spec);
    }
  }
  if (j.contains("aia")) {
    const json& a = j.at("aia");
    if (a.contains("hidden_dim")) {
      cfg.aia.hidden_dim = a.at("hidden_dim").get<size_t>();
    }
    if (a.contains("train")) cfg.aia.train = train_config_from_json(a.at("train"));
  }
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  if (j.contains("output_dir")) {
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config JSON: ") + e.what());
  }
  ExperimentConfig cfg = experiment_from_json(j);
  cfg.validate();
  return cfg;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.experiment_id = "modelleak-default";

  SynthConfig corpus;
  corpus.num_classes = 4;
  corpus.corpus_size = 1200;
  corpus.seed = 7;
  corpus.tokens_per_value = 4;
  corpus.noise_tokens = 120;
  corpus.task_token_weight = 0.35;
  corpus.attribute_token_weight = 0.40;
  corpus.noise_token_weight = 0.25;
  {
    SynthAttributeConfig region;
    region.spec.name = "region";
    region.spec.values = {"north", "south"};
    region.spec.kind = AttributeKind::kDemographic;
    region.marginals = {0.5, 0.5};
    region.leakage = 0.8;
    corpus.attributes.push_back(region);

    SynthAttributeConfig entity;
    entity.spec.name = "mentions_acme";
    entity.spec.values = {"absent", "present"};
    entity.spec.kind = AttributeKind::kEntityPresence;
    entity.marginals = {0.5, 0.5};
    entity.leakage = 0.8;
    corpus.attributes.push_back(entity);
  }
  cfg.corpus = corpus;
  // Cross-domain query distribution: same label space and attribute
  // pools, but a disjoint and much larger noise vocabulary, noise-heavy
  // token mix, and shorter documents.
  cfg.cross_corpus = corpus;
  cfg.cross_corpus.noise_vocab_offset = corpus.noise_tokens;
  cfg.cross_corpus.domain_tag = "cross";
  cfg.cross_corpus.noise_tokens = 600;
  cfg.cross_corpus.task_token_weight = 0.10;
  cfg.cross_corpus.attribute_token_weight = 0.15;
  cfg.cross_corpus.noise_token_weight = 0.75;
  cfg.cross_corpus.min_doc_length = 6;
  cfg.cross_corpus.max_doc_length = 12;
  cfg.test_size = 300;
  cfg.aux_fraction = 0.25;

  cfg.victim_model.vocab_size = 2000;
  cfg.victim_model.feature_dim = 96;
  cfg.victim_model.hidden_dims = {64};
  cfg.victim_model.num_classes = 4;
  cfg.victim_train.epochs = 5;

  cfg.extracted_model = cfg.victim_model;
  cfg.extracted_train.epochs = 8;

  cfg.defenses = {NoDefense{},        Temperature{0.0},
                  Temperature{4.0},   GaussianNoise{0.05, 0},
                  ReverseSigmoid{0.2, 0.5, 0.0}, TopK{2},
                  MostLeast{1e-5},    NastyTeacher{0.1, 4.0}};
  cfg.plans = {PlanSpec{QuerySource::kSameDomain, 1.0},
               PlanSpec{QuerySource::kCrossDomain, 1.0}};

  cfg.aia.train.epochs = 30;
  cfg.seeds = {1, 2, 3};
  cfg.output_dir = "out";
  return cfg;
}

}  // namespace modelleak
