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

// Command-line front end. Every subcommand replays deterministically
// from the experiment config; stage subcommands (synth, split,
// train-victim, serve, extract, aia) expose intermediate artifacts,
// while run / sweep-sharpness / sweep-mismatch drive the full grids.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "modelleak/aia.hpp"
#include "modelleak/apiserve.hpp"
#include "modelleak/corpus.hpp"
#include "modelleak/error.hpp"
#include "modelleak/extraction.hpp"
#include "modelleak/metrics.hpp"
#include "modelleak/rng.hpp"
#include "modelleak/runner.hpp"
#include "modelleak/victim.hpp"

namespace {

using namespace modelleak;

struct CommonOpts {
  std::string config_path;
  std::string out = "out";
  std::optional<uint64_t> seed;
  std::string transport = "direct";
};

ExperimentConfig load_config(const CommonOpts& opts) {
  if (opts.config_path.empty()) return default_config();
  return load_experiment_config(opts.config_path);
}

TransportKind transport_kind(const CommonOpts& opts) {
  if (opts.transport == "direct") return TransportKind::kDirect;
  if (opts.transport == "http") return TransportKind::kHttp;
  throw ConfigError("unknown transport '" + opts.transport + "'");
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_transport = false) {
  cmd->add_option("--config", opts.config_path,
                  "Experiment config JSON (built-in defaults when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out, "Output directory");
  cmd->add_option("--seed", opts.seed, "Override the experiment seed");
  if (with_transport) {
    cmd->add_option("--transport", opts.transport, "direct or http")
        ->check(CLI::IsMember({"direct", "http"}));
  }
}

// Stage subcommands use the config's first experiment seed unless
// --seed overrides it, and derive per-stage streams the same way the
// grid runner does, so stage artifacts match run's seed-column cells.
uint64_t stage_seed(const ExperimentConfig& cfg, const CommonOpts& opts) {
  if (opts.seed) return *opts.seed;
  return cfg.seeds.empty() ? 1 : cfg.seeds.front();
}

Corpus stage_corpus(const ExperimentConfig& cfg, uint64_t seed) {
  if (!cfg.corpus_path.empty()) {
    return load_jsonl(cfg.corpus_path, cfg.corpus_schema);
  }
  SynthConfig synth = cfg.corpus;
  synth.seed = derive_seed(cfg.corpus.seed, seed);
  return generate_synthetic(synth);
}

CorpusSplit stage_split(const ExperimentConfig& cfg, const Corpus& corpus,
                        uint64_t seed) {
  return split(corpus, derive_seed(seed, "split"), cfg.aux_fraction);
}

VictimModel stage_victim(const ExperimentConfig& cfg, const CorpusSplit& sp,
                         uint64_t seed) {
  ModelConfig model_cfg = cfg.victim_model;
  model_cfg.seed = derive_seed(seed, "victim-model");
  TrainConfig train_cfg = cfg.victim_train;
  train_cfg.seed = derive_seed(seed, "victim-train");
  return train_victim(sp.victim_train, model_cfg, train_cfg);
}

struct ExtractionArtifacts {
  TransferSet transfer;
  ClassifierModel extracted;
  size_t budget = 0;
  std::string plan;
};

ExtractionArtifacts stage_extract(const ExperimentConfig& cfg,
                                  const CorpusSplit& sp,
                                  const VictimModel& victim, uint64_t seed,
                                  TransportKind transport) {
  if (cfg.plans.empty()) throw ConfigError("config has no query plans");
  QueryPlan plan;
  plan.source = cfg.plans.front().source;
  plan.budget_multiplier = cfg.plans.front().multiplier;
  plan.seed = derive_seed(derive_seed(seed, "plan"), uint64_t{0});
  plan.cross_generator = cfg.cross_corpus;

  ExtractionArtifacts out;
  out.plan = plan_label(plan);
  out.budget = plan_budget(plan, sp.victim_train.size());
  BudgetLedger ledger(out.budget);

  if (transport == TransportKind::kHttp) {
    auto server = serve(victim);
    HttpTransport http(server->host(), server->port());
    out.transfer = build_transfer_set(plan, sp.query_pool, http, ledger,
                                      sp.victim_train.size());
    server->stop();
  } else {
    DirectTransport direct(victim);
    out.transfer = build_transfer_set(plan, sp.query_pool, direct, ledger,
                                      sp.victim_train.size());
  }

  ModelConfig model_cfg = cfg.extracted_model;
  model_cfg.seed = derive_seed(seed, "extracted-model");
  TrainConfig train_cfg = cfg.extracted_train;
  train_cfg.seed = derive_seed(seed, "extracted-train");
  out.extracted = train_extracted(out.transfer, model_cfg, train_cfg);
  return out;
}

std::vector<Document> stage_test_docs(const ExperimentConfig& cfg,
                                      uint64_t seed) {
  SynthConfig test_cfg = cfg.corpus;
  test_cfg.corpus_size = cfg.test_size;
  test_cfg.seed = derive_seed(derive_seed(cfg.corpus.seed, "test"), seed);
  test_cfg.domain_tag = "test";
  return generate_synthetic(test_cfg).docs;
}

int cmd_synth(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const uint64_t seed = stage_seed(cfg, opts);
  const Corpus corpus = stage_corpus(cfg, seed);
  std::filesystem::create_directories(opts.out);
  const std::string path = opts.out + "/corpus.jsonl";
  save_jsonl(corpus, path);
  std::printf("wrote %zu documents to %s\n", corpus.size(), path.c_str());
  return 0;
}

int cmd_split(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const uint64_t seed = stage_seed(cfg, opts);
  const Corpus corpus = stage_corpus(cfg, seed);
  const CorpusSplit sp = stage_split(cfg, corpus, seed);
  std::filesystem::create_directories(opts.out);
  const std::map<std::string, const std::vector<Document>*> parts = {
      {"victim_train", &sp.victim_train},
      {"query_pool", &sp.query_pool},
      {"aux", &sp.aux}};
  for (const auto& [name, docs] : parts) {
    Corpus part;
    part.docs = *docs;
    part.schema = corpus.schema;
    part.class_names = corpus.class_names;
    save_jsonl(part, opts.out + "/" + name + ".jsonl");
    std::printf("%-12s %zu docs\n", name.c_str(), docs->size());
  }
  return 0;
}

int cmd_train_victim(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const uint64_t seed = stage_seed(cfg, opts);
  const Corpus corpus = stage_corpus(cfg, seed);
  const CorpusSplit sp = stage_split(cfg, corpus, seed);
  const VictimModel victim = stage_victim(cfg, sp, seed);
  const std::vector<Document> test_docs = stage_test_docs(cfg, seed);
  const double acc = evaluate_accuracy(victim.model, test_docs);
  std::filesystem::create_directories(opts.out);
  const std::string path = opts.out + "/victim.ckpt";
  save_victim(victim, path);
  std::printf("victim test accuracy %.4f, checkpoint %s\n", acc, path.c_str());
  return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const CommonOpts& opts, const std::string& host, int port) {
  const ExperimentConfig cfg = load_config(opts);
  const uint64_t seed = stage_seed(cfg, opts);
  const Corpus corpus = stage_corpus(cfg, seed);
  const CorpusSplit sp = stage_split(cfg, corpus, seed);
  const VictimModel victim = stage_victim(cfg, sp, seed);

  ServeConfig serve_cfg;
  serve_cfg.host = host;
  serve_cfg.port = port;
  auto server = serve(victim, serve_cfg);
  std::printf("serving on %s:%d (Ctrl-C to stop)\n", server->host().c_str(),
              server->port());
  std::fflush(stdout);
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server->stop();
  return 0;
}

int cmd_extract(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const uint64_t seed = stage_seed(cfg, opts);
  const Corpus corpus = stage_corpus(cfg, seed);
  const CorpusSplit sp = stage_split(cfg, corpus, seed);
  const VictimModel victim = stage_victim(cfg, sp, seed);
  const ExtractionArtifacts art =
      stage_extract(cfg, sp, victim, seed, transport_kind(opts));

  const std::vector<Document> test_docs = stage_test_docs(cfg, seed);
  const double extracted_acc = evaluate_accuracy(art.extracted, test_docs);
  const double victim_acc = evaluate_accuracy(victim.model, test_docs);
  const double agree =
      agreement(art.extracted, argmax_labels(victim.model, test_docs),
                test_docs);

  std::filesystem::create_directories(opts.out);
  save_transfer_set(art.transfer, opts.out + "/transfer.jsonl",
                    corpus.class_names);
  save_model(art.extracted, opts.out + "/extracted.ckpt");
  std::printf("plan %s, budget %zu\n", art.plan.c_str(), art.budget);
  std::printf("victim accuracy %.4f, extracted accuracy %.4f, agreement %.4f\n",
              victim_acc, extracted_acc, agree);
  return 0;
}

int cmd_aia(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const uint64_t seed = stage_seed(cfg, opts);
  const Corpus corpus = stage_corpus(cfg, seed);
  const CorpusSplit sp = stage_split(cfg, corpus, seed);
  const VictimModel victim = stage_victim(cfg, sp, seed);
  const ExtractionArtifacts art =
      stage_extract(cfg, sp, victim, seed, transport_kind(opts));

  InferenceConfig aia_cfg = cfg.aia;
  aia_cfg.train.seed = derive_seed(seed, "aia-train");
  const RepresentationDataset aux_rd =
      harvest_representations(art.extracted, sp.aux, corpus.schema);
  const AttributeInferenceModel inference = train_inference(aux_rd, aia_cfg);
  const auto predicted =
      infer_attributes(inference, art.extracted, sp.victim_train);
  const RepresentationDataset gold_rd =
      harvest_representations(art.extracted, sp.victim_train, corpus.schema);

  std::filesystem::create_directories(opts.out);
  save_inference_csv(opts.out + "/aia_predictions.csv", gold_rd, predicted);

  nlohmann::json summary;
  for (const auto& attr : corpus.schema.attributes) {
    const double acc =
        attribute_accuracy(predicted.at(attr.name), gold_rd.values.at(attr.name));
    const int majority = majority_baseline(aux_rd, attr.name);
    size_t hits = 0;
    for (int v : gold_rd.values.at(attr.name)) {
      if (v == majority) ++hits;
    }
    const double majority_acc =
        static_cast<double>(hits) / static_cast<double>(gold_rd.size());
    summary[attr.name] = {{"attack_accuracy", acc},
                          {"majority_accuracy", majority_acc},
                          {"empirical_privacy", 1.0 - acc}};
    std::printf("%-16s attack %.4f, majority %.4f, privacy %.4f\n",
                attr.name.c_str(), acc, majority_acc, 1.0 - acc);
  }
  std::ofstream out(opts.out + "/aia.json");
  out << summary.dump(2) << "\n";
  return 0;
}

int cmd_run(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  if (opts.seed) cfg.seeds = {*opts.seed};
  cfg.output_dir = opts.out;
  const RunLogger log = [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  };
  const ExperimentReport report = run_pipeline(cfg, transport_kind(opts), log);
  write_report(report, opts.out);
  size_t completed = 0, total = 0;
  for (const auto& cell : report.cells) {
    if (cell.seed_label == "mean") continue;
    ++total;
    if (cell.completed) ++completed;
  }
  std::printf("%zu/%zu cells completed; reports in %s\n", completed, total,
              opts.out.c_str());
  return report.all_completed() ? 0 : 1;
}

int cmd_sweep_sharpness(const CommonOpts& opts, std::vector<double> taus) {
  ExperimentConfig cfg = load_config(opts);
  if (opts.seed) cfg.seeds = {*opts.seed};
  const SharpnessSweep sweep =
      sweep_sharpness(cfg, taus, transport_kind(opts));
  std::filesystem::create_directories(opts.out);

  nlohmann::json j;
  j["spearman_rho"] = sweep.spearman_rho;
  j["direction_pass"] = sweep.direction_pass;
  j["points"] = nlohmann::json::array();
  for (const auto& p : sweep.points) {
    j["points"].push_back({{"tau", p.tau},
                           {"mean_max", p.mean_max},
                           {"empirical_privacy", p.empirical_privacy}});
    std::printf("tau %.3f  mean-max %.4f  privacy %.4f\n", p.tau, p.mean_max,
                p.empirical_privacy);
  }
  std::ofstream out(opts.out + "/sharpness.json");
  out << j.dump(2) << "\n";
  write_sharpness_svg(sweep, opts.out + "/sharpness.svg");
  std::printf("spearman rho %+.4f (%s)\n", sweep.spearman_rho,
              sweep.direction_pass ? "sharper posteriors go with higher privacy"
                                   : "direction violated");
  return 0;
}

int cmd_sweep_mismatch(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  if (opts.seed) cfg.seeds = {*opts.seed};

  std::vector<ModelConfig> victims;
  ModelConfig v = cfg.victim_model;
  v.hidden_dims = {32};
  victims.push_back(v);
  victims.push_back(cfg.victim_model);
  v.hidden_dims = {64, 64};
  victims.push_back(v);

  const MismatchSweep sweep = sweep_mismatch(cfg, victims);
  std::filesystem::create_directories(opts.out);
  nlohmann::json j = nlohmann::json::array();
  bool all_ok = true;
  for (const auto& cell : sweep.cells) {
    j.push_back({{"victim_architecture", cell.victim_architecture},
                 {"matched", cell.matched},
                 {"completed", cell.completed},
                 {"extracted_accuracy", cell.extracted_accuracy},
                 {"agreement_rate", cell.agreement_rate},
                 {"empirical_privacy", cell.empirical_privacy}});
    std::printf("%-14s %s extracted %.4f, agreement %.4f, privacy %.4f\n",
                cell.victim_architecture.c_str(),
                cell.matched ? "[matched]" : "          ",
                cell.extracted_accuracy, cell.agreement_rate,
                cell.empirical_privacy);
    all_ok = all_ok && cell.completed;
  }
  std::ofstream out(opts.out + "/mismatch.json");
  out << j.dump(2) << "\n";
  return all_ok ? 0 : 1;
}

int cmd_report(const CommonOpts& opts) {
  const std::string path = opts.out + "/report.json";
  std::ifstream in(path);
  if (!in.good()) throw Error("no report at '" + path + "' (run `run` first)");
  nlohmann::json j;
  in >> j;

  const std::string experiment_id =
      j.contains("config") ? j["config"].value("experiment_id", std::string("?"))
                           : std::string("?");
  std::printf("experiment %s, transport %s\n", experiment_id.c_str(),
              j.value("transport", std::string("?")).c_str());
  std::printf("%-26s %-10s %-8s %-9s %-9s %-8s\n", "defense", "plan", "victim",
              "extracted", "agreement", "privacy");
  for (const auto& cell : j["aggregates"]) {
    const auto num = [&](const char* key) {
      return cell.contains(key) && cell[key].is_number()
                 ? cell[key].get<double>()
                 : std::nan("");
    };
    std::printf("%-26s %-10s %-8.4f %-9.4f %-9.4f %-8.4f\n",
                cell.value("defense", std::string("?")).c_str(),
                cell.value("plan", std::string("?")).c_str(),
                num("victim_accuracy"), num("extracted_accuracy"),
                num("agreement"), num("empirical_privacy_demographic"));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model extraction and attribute inference testbed"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string host = "127.0.0.1";
  int port = 0;
  std::vector<double> taus = {0.125, 0.25, 0.5, 1.0};

  CLI::App* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  add_common(synth, opts);
  CLI::App* split_cmd =
      app.add_subcommand("split", "Write the victim/query/aux split");
  add_common(split_cmd, opts);
  CLI::App* train =
      app.add_subcommand("train-victim", "Train and checkpoint the victim");
  add_common(train, opts);
  CLI::App* serve_cmd =
      app.add_subcommand("serve", "Serve the victim over HTTP");
  add_common(serve_cmd, opts);
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)");
  CLI::App* extract =
      app.add_subcommand("extract", "Build a transfer set and distill a copy");
  add_common(extract, opts, true);
  CLI::App* aia =
      app.add_subcommand("aia", "Attribute inference on the extracted model");
  add_common(aia, opts, true);
  CLI::App* run = app.add_subcommand("run", "Run the full experiment grid");
  add_common(run, opts, true);
  CLI::App* sharp =
      app.add_subcommand("sweep-sharpness", "Temperature sharpness sweep");
  add_common(sharp, opts, true);
  sharp->add_option("--tau", taus, "Temperature grid (>=3 positive values)");
  CLI::App* mismatch =
      app.add_subcommand("sweep-mismatch", "Victim architecture sweep");
  add_common(mismatch, opts, true);
  CLI::App* report =
      app.add_subcommand("report", "Summarize a completed run directory");
  add_common(report, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(opts);
    if (split_cmd->parsed()) return cmd_split(opts);
    if (train->parsed()) return cmd_train_victim(opts);
    if (serve_cmd->parsed()) return cmd_serve(opts, host, port);
    if (extract->parsed()) return cmd_extract(opts);
    if (aia->parsed()) return cmd_aia(opts);
    if (run->parsed()) return cmd_run(opts);
    if (sharp->parsed()) return cmd_sweep_sharpness(opts, taus);
    if (mismatch->parsed()) return cmd_sweep_mismatch(opts);
    if (report->parsed()) return cmd_report(opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
