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
//
// Microbenchmarks for the hot paths: featurization, the forward pass,
// one training epoch, the defense transforms, and a defended predict.

#include <benchmark/benchmark.h>

#include <vector>

#include "modelleak/corpus.hpp"
#include "modelleak/defense.hpp"
#include "modelleak/rng.hpp"
#include "modelleak/runner.hpp"
#include "modelleak/textmodel.hpp"
#include "modelleak/victim.hpp"

namespace {

using namespace modelleak;

// Shared fixtures, built once. Sizes match the shipped default grid.
struct Fixture {
  Corpus corpus;
  ModelConfig model_cfg;
  VictimModel victim;
  Vec features;
  Vec logits;

  Fixture() {
    SynthConfig gen = default_config().corpus;
    gen.corpus_size = 600;
    gen.seed = 13;
    corpus = generate_synthetic(gen);

    model_cfg = default_config().victim_model;
    model_cfg.seed = 5;
    TrainConfig train_cfg = default_config().victim_train;
    train_cfg.epochs = 2;
    train_cfg.seed = 5;
    victim = train_victim(corpus.docs, model_cfg, train_cfg);

    features = featurize(corpus.docs.front(), model_cfg);
    logits = forward(victim.model, features).second;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Featurize(benchmark::State& state) {
  Fixture& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        featurize(f.corpus.docs[i++ % f.corpus.size()], f.model_cfg));
  }
}
BENCHMARK(BM_Featurize);

void BM_Forward(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(f.victim.model, f.features));
  }
}
BENCHMARK(BM_Forward);

void BM_Predict(benchmark::State& state) {
  Fixture& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        predict(f.victim, f.corpus.docs[i++ % f.corpus.size()]));
  }
}
BENCHMARK(BM_Predict);

// One full supervised epoch over the 600-document victim half.
void BM_TrainEpoch(benchmark::State& state) {
  Fixture& f = fixture();
  TrainConfig cfg = default_config().victim_train;
  cfg.epochs = 1;
  cfg.seed = 5;
  for (auto _ : state) {
    ClassifierModel model = ClassifierModel::make(f.model_cfg);
    benchmark::DoNotOptimize(train_classifier(model, f.corpus.docs, cfg));
  }
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_Defense(benchmark::State& state, DefenseConfig defense) {
  Fixture& f = fixture();
  RngStream rng(99);
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_defense(f.logits, defense, rng));
  }
}
BENCHMARK_CAPTURE(BM_Defense, none, NoDefense{});
BENCHMARK_CAPTURE(BM_Defense, hard_label, Temperature{0.0});
BENCHMARK_CAPTURE(BM_Defense, temperature, Temperature{4.0});
BENCHMARK_CAPTURE(BM_Defense, gaussian, GaussianNoise{0.05, 11});
BENCHMARK_CAPTURE(BM_Defense, reverse_sigmoid, ReverseSigmoid{0.2, 0.5, 0.0});
BENCHMARK_CAPTURE(BM_Defense, top_k, TopK{2});
BENCHMARK_CAPTURE(BM_Defense, most_least, MostLeast{1e-5});

}  // namespace

BENCHMARK_MAIN();
