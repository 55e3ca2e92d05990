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

#include "modelleak/victim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include <doctest.h>

#include "modelleak/error.hpp"

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

ModelConfig victim_model_config() {
  ModelConfig cfg;
  cfg.vocab_size = 1000;
  cfg.feature_dim = 256;
  cfg.hidden_dims = {32, 16};
  cfg.num_classes = 4;
  cfg.seed = 2;
  return cfg;
}

struct Fixture {
  CorpusSplit splits;
  ModelConfig model_cfg;
  TrainConfig train_cfg;

  Fixture() {
    const Corpus corpus = generate_synthetic(task_config(77));
    splits = split(corpus, 5, 0.25);
    model_cfg = victim_model_config();
    train_cfg.seed = 21;
  }
};

size_t argmax_of(const Vec& v) {
  return static_cast<size_t>(std::max_element(v.begin(), v.end()) -
                             v.begin());
}

}  // namespace

TEST_SUITE("victim") {

TEST_CASE("trained victim generalizes on the synthetic task") {
  Fixture fx;
  const VictimModel victim =
      train_victim(fx.splits.victim_train, fx.model_cfg, fx.train_cfg);
  CHECK(victim.model.trained);
  CHECK(evaluate_accuracy(victim.model, fx.splits.query_pool) >= 0.85);
}

TEST_CASE("victim training is deterministic") {
  Fixture fx;
  const VictimModel a =
      train_victim(fx.splits.victim_train, fx.model_cfg, fx.train_cfg);
  const VictimModel b =
      train_victim(fx.splits.victim_train, fx.model_cfg, fx.train_cfg);
  for (size_t l = 0; l < a.model.net.num_layers(); ++l) {
    CHECK(a.model.net.weights[l].data == b.model.net.weights[l].data);
  }
  CHECK_THROWS_AS(train_victim({}, fx.model_cfg, fx.train_cfg), EmptyDataset);
}

TEST_CASE("predict routes through the configured defense") {
  Fixture fx;
  VictimModel victim =
      train_victim(fx.splits.victim_train, fx.model_cfg, fx.train_cfg);
  const Document& doc = fx.splits.query_pool.front();

  const Vec plain = predict(victim, doc);
  const Vec undefended = predict_posterior(victim.model, doc);
  CHECK(argmax_of(plain) == argmax_of(undefended));
  double sum = 0.0;
  for (double v : plain) sum += v;
  CHECK(std::abs(sum - 1.0) <= 1e-9);

  victim.defense = Temperature{0.0};
  const Vec hard = predict(victim, doc);
  CHECK(*std::max_element(hard.begin(), hard.end()) == 1.0);
  CHECK(std::count(hard.begin(), hard.end(), 0.0) ==
        static_cast<long>(hard.size()) - 1);

  victim.defense = MostLeast{1e-5};
  const Vec ml = predict(victim, doc);
  CHECK(std::count_if(ml.begin(), ml.end(),
                      [](double v) { return v != 0.0; }) == 2);
  double ml_sum = 0.0;
  for (double v : ml) ml_sum += v;
  CHECK(ml_sum == 1.0);
}

TEST_CASE("stochastic defenses are deterministic per document content") {
  Fixture fx;
  VictimModel victim = train_victim(fx.splits.victim_train, fx.model_cfg,
                                    fx.train_cfg, GaussianNoise{0.05, 3});
  const Document& doc = fx.splits.query_pool.front();

  CHECK(predict(victim, doc) == predict(victim, doc));

  // Same tokens under a different id draw the same noise.
  Document renamed = doc;
  renamed.id = "completely-different-id";
  CHECK(predict(victim, renamed) == predict(victim, doc));

  // Different content draws different noise.
  const Document& other = fx.splits.query_pool[1];
  REQUIRE(other.tokens != doc.tokens);
  CHECK(predict(victim, other) != predict(victim, doc));

  // Different defense seeds decorrelate the streams.
  VictimModel reseeded = victim;
  reseeded.defense = GaussianNoise{0.05, 4};
  CHECK(predict(reseeded, doc) != predict(victim, doc));
}

TEST_CASE("untrained victim refuses to predict") {
  VictimModel victim;
  victim.model = ClassifierModel::make(victim_model_config());
  Document doc;
  doc.id = "d";
  doc.tokens = {"x"};
  CHECK_THROWS_AS(predict(victim, doc), ConfigError);
}

TEST_CASE("nasty training with omega 0 equals standard training") {
  Fixture fx;
  const VictimModel standard =
      train_victim(fx.splits.victim_train, fx.model_cfg, fx.train_cfg);
  const NastyTrainResult nasty =
      train_nasty_victim(fx.splits.victim_train, standard.model, 0.0, 4.0,
                         fx.model_cfg, fx.train_cfg);
  for (size_t l = 0; l < standard.model.net.num_layers(); ++l) {
    CHECK(nasty.victim.model.net.weights[l].data ==
          standard.model.net.weights[l].data);
    CHECK(nasty.victim.model.net.biases[l] == standard.model.net.biases[l]);
  }
  CHECK(nasty.victim.training_kind == TrainingKind::kNastyTeacher);
}

TEST_CASE("positive omega pushes the posterior away from the reference") {
  Fixture fx;
  const VictimModel standard =
      train_victim(fx.splits.victim_train, fx.model_cfg, fx.train_cfg);
  const NastyTrainResult at_zero =
      train_nasty_victim(fx.splits.victim_train, standard.model, 0.0, 4.0,
                         fx.model_cfg, fx.train_cfg);
  const NastyTrainResult at_pos =
      train_nasty_victim(fx.splits.victim_train, standard.model, 0.1, 4.0,
                         fx.model_cfg, fx.train_cfg);
  CHECK(at_pos.mean_kl_to_reference >= at_zero.mean_kl_to_reference);
  CHECK(at_pos.mean_kl_to_reference > 0.0);
  // The argmax channel stays useful.
  CHECK(at_pos.clean_accuracy >= 0.7);
}

TEST_CASE("nasty loss matches an independent formula evaluation") {
  Fixture fx;
  const VictimModel reference =
      train_victim(fx.splits.victim_train, fx.model_cfg, fx.train_cfg);

  const Document doc = fx.splits.victim_train.front();
  const double omega = 0.1;
  const double tau = 4.0;
  TrainConfig one_step;
  one_step.epochs = 1;
  one_step.batch_size = 1;
  one_step.seed = 21;

  // The first epoch's mean loss over a single document is the loss at the
  // freshly initialized parameters.
  const NastyTrainResult result =
      train_nasty_victim({doc}, reference.model, omega, tau, fx.model_cfg,
                         one_step);

  const ClassifierModel fresh = ClassifierModel::make(fx.model_cfg);
  const Vec x = featurize(doc, fx.model_cfg);
  const Vec z = forward(fresh, x).second;
  const Vec z_ref = forward(reference.model, x).second;
  const double expected =
      cross_entropy(softmax(z), static_cast<size_t>(doc.task_label)) -
      omega * tau * tau * kl_divergence(softmax(z, tau), softmax(z_ref, tau));
  REQUIRE(result.log.epoch_mean_loss.size() == 1);
  CHECK(result.log.epoch_mean_loss[0] ==
        doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("nasty training rejects mismatched or untrained references") {
  Fixture fx;
  const VictimModel standard =
      train_victim(fx.splits.victim_train, fx.model_cfg, fx.train_cfg);

  ModelConfig other = fx.model_cfg;
  other.hidden_dims = {8};
  CHECK_THROWS_AS(
      train_nasty_victim(fx.splits.victim_train, standard.model, 0.1, 4.0,
                         other, fx.train_cfg),
      ShapeError);

  const ClassifierModel untrained = ClassifierModel::make(fx.model_cfg);
  CHECK_THROWS_AS(
      train_nasty_victim(fx.splits.victim_train, untrained, 0.1, 4.0,
                         fx.model_cfg, fx.train_cfg),
      ConfigError);
  CHECK_THROWS_AS(
      train_nasty_victim(fx.splits.victim_train, standard.model, -0.1, 4.0,
                         fx.model_cfg, fx.train_cfg),
      ConfigError);
  CHECK_THROWS_AS(
      train_nasty_victim(fx.splits.victim_train, standard.model, 0.1, 0.0,
                         fx.model_cfg, fx.train_cfg),
      ConfigError);
}

TEST_CASE("victim checkpoint round trip preserves predictions") {
  Fixture fx;
  const VictimModel victim = train_victim(
      fx.splits.victim_train, fx.model_cfg, fx.train_cfg, GaussianNoise{0.1, 9});

  const std::string path = "tmp_victim.ckpt";
  save_victim(victim, path);
  const VictimModel loaded = load_victim(path);
  std::remove(path.c_str());
  std::remove((path + ".defense.json").c_str());

  CHECK(loaded.training_kind == victim.training_kind);
  CHECK(loaded.prediction_seed == victim.prediction_seed);
  CHECK(defense_kind(loaded.defense) == "gaussian");
  for (const Document& doc :
       std::vector<Document>(fx.splits.query_pool.begin(),
                             fx.splits.query_pool.begin() + 10)) {
    CHECK(predict(loaded, doc) == predict(victim, doc));
  }
}

}  // TEST_SUITE
