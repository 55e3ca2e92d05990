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
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "gradcheck.hpp"
#include "modelleak/error.hpp"
#include "modelleak/rng.hpp"

using namespace modelleak;

namespace {

Document make_doc(const std::string& id, std::vector<std::string> tokens,
                  int label) {
  Document d;
  d.id = id;
  d.tokens = std::move(tokens);
  d.task_label = label;
  return d;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.vocab_size = 100;
  cfg.feature_dim = 16;
  cfg.hidden_dims = {8, 5};
  cfg.num_classes = 3;
  cfg.seed = 4;
  cfg.activation = Activation::kTanh;
  return cfg;
}

void zero_parameters(ClassifierModel& model) {
  for (auto& w : model.net.weights) {
    std::fill(w.data.begin(), w.data.end(), 0.0);
  }
  for (auto& b : model.net.biases) std::fill(b.begin(), b.end(), 0.0);
}

double l2_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("textmodel") {

TEST_CASE("featurize is deterministic and unit length") {
  const ModelConfig cfg = small_config();
  const Document a = make_doc("a", {"a", "a"}, 0);
  const Document b = make_doc("b", {"a", "a"}, 0);
  CHECK(featurize(a, cfg) == featurize(b, cfg));
  CHECK(l2_norm(featurize(a, cfg)) == doctest::Approx(1.0).epsilon(1e-9));

  const Document x = make_doc("x", {"x"}, 0);
  const Document y = make_doc("y", {"y"}, 0);
  CHECK(featurize(x, cfg) != featurize(y, cfg));

  Document empty;
  empty.id = "e";
  CHECK_THROWS_AS(featurize(empty, cfg), InvalidDocument);
}

TEST_CASE("featurize counts bigrams, not just unigrams") {
  ModelConfig cfg = small_config();
  cfg.feature_dim = 4096;  // keep collisions unlikely
  const Document ab = make_doc("ab", {"a", "b"}, 0);
  const Document ba = make_doc("ba", {"b", "a"}, 0);
  // Same unigrams, different bigram: vectors must differ.
  CHECK(featurize(ab, cfg) != featurize(ba, cfg));
}

TEST_CASE("forward with zeroed parameters") {
  ClassifierModel model = ClassifierModel::make(small_config());
  zero_parameters(model);
  const Document doc = make_doc("d", {"hello", "world"}, 0);
  const Vec f = featurize(doc, model.config);
  auto [repr, logits] = forward(model, f);
  REQUIRE(logits.size() == 3);
  REQUIRE(repr.size() == 5);
  for (double v : logits) CHECK(v == 0.0);

  model.net.biases.back() = {1.5, -2.0, 0.25};
  auto logits2 = forward(model, f).second;
  CHECK(logits2 == Vec{1.5, -2.0, 0.25});
}

TEST_CASE("forward matches a straight-line recompute") {
  for (const Activation act : {Activation::kTanh, Activation::kRelu}) {
    ModelConfig cfg = small_config();
    cfg.activation = act;
    cfg.seed = act == Activation::kTanh ? 10 : 11;
    const ClassifierModel model = ClassifierModel::make(cfg);
    const Document doc =
        make_doc("d", {"alpha", "beta", "gamma", "alpha"}, 0);
    const Vec x = featurize(doc, cfg);

    // Independent affine/activation chain over the raw parameter arrays.
    Vec cur = x;
    Vec expected_repr;
    for (size_t layer = 0; layer < model.net.num_layers(); ++layer) {
      const Matrix& w = model.net.weights[layer];
      const Vec& b = model.net.biases[layer];
      Vec next(w.rows, 0.0);
      for (size_t r = 0; r < w.rows; ++r) {
        double z = b[r];
        for (size_t c = 0; c < w.cols; ++c) z += w.at(r, c) * cur[c];
        if (layer + 1 < model.net.num_layers()) {
          next[r] = act == Activation::kTanh ? std::tanh(z)
                                             : (z > 0.0 ? z : 0.0);
        } else {
          next[r] = z;
        }
      }
      if (layer + 1 == model.net.num_layers()) expected_repr = cur;
      cur = next;
    }

    auto [repr, logits] = forward(model, x);
    REQUIRE(repr.size() == expected_repr.size());
    for (size_t i = 0; i < repr.size(); ++i) {
      CHECK(repr[i] == doctest::Approx(expected_repr[i]).epsilon(1e-9));
    }
    REQUIRE(logits.size() == cur.size());
    for (size_t i = 0; i < logits.size(); ++i) {
      CHECK(logits[i] == doctest::Approx(cur[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("forward rejects mismatched input") {
  const ClassifierModel model = ClassifierModel::make(small_config());
  CHECK_THROWS_AS(forward(model, Vec(7, 0.0)), ShapeError);
}

TEST_CASE("softmax worked examples") {
  const Vec p = softmax({2.0, 1.0, 0.0}, 1.0);
  CHECK(p[0] == doctest::Approx(0.66524).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(0.09003).epsilon(1e-4));

  for (double v : softmax({5.5, 5.5, 5.5}, 2.0)) {
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  for (double v : softmax({2.0, 1.0, 0.0}, 1e6)) {
    CHECK(std::abs(v - 1.0 / 3.0) < 1e-5);
  }
  CHECK_THROWS_AS(softmax({1.0, std::nan("")}, 1.0), NumericError);
  CHECK_THROWS_AS(softmax({1.0, 2.0}, 0.0), ConfigError);
  CHECK_THROWS_AS(softmax({1.0, 2.0}, -1.0), ConfigError);
}

TEST_CASE("softmax preserves argmax and the simplex at any temperature") {
  RngStream rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 2 + rng.uniform_index(6);
    Vec logits(n);
    for (double& v : logits) v = rng.uniform(-30.0, 30.0);
    const double temps[] = {0.25, 0.5, 1.0, 2.0, 8.0, 64.0};
    const double t = temps[rng.uniform_index(6)];
    const Vec p = softmax(logits, t);
    double sum = 0.0;
    for (double v : p) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    const auto arg_l =
        std::max_element(logits.begin(), logits.end()) - logits.begin();
    const auto arg_p = std::max_element(p.begin(), p.end()) - p.begin();
    CHECK(arg_l == arg_p);
  }
}

TEST_CASE("cross_entropy worked examples") {
  CHECK(cross_entropy({1.0, 0.0, 0.0}, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(cross_entropy({1.0 / 3, 1.0 / 3, 1.0 / 3}, 1) ==
        doctest::Approx(std::log(3.0)));
  CHECK(cross_entropy({0.5, 0.5}, 0) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(cross_entropy({0.5, 0.5}, 2), InvalidLabel);
  // Floor keeps the loss finite on a zero probability.
  CHECK(cross_entropy({0.0, 1.0}, 0) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("soft_cross_entropy worked examples and oracle") {
  CHECK(soft_cross_entropy({0.7, 0.7, 0.7},
                           {1.0 / 3, 1.0 / 3, 1.0 / 3}) ==
        doctest::Approx(std::log(3.0)));

  // One-hot teacher degenerates to cross_entropy at that class.
  const Vec logits = {0.4, -1.2, 2.2};
  CHECK(soft_cross_entropy(logits, {0.0, 0.0, 1.0}) ==
        doctest::Approx(cross_entropy(softmax(logits), 2)));

  // Independent summation oracle on a seeded pair.
  RngStream rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    Vec l(4);
    for (double& v : l) v = rng.uniform(-5.0, 5.0);
    Vec t = softmax({rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                     rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)});
    const Vec s = softmax(l);
    double expected = 0.0;
    for (size_t i = 0; i < 4; ++i) {
      expected -= t[i] * std::log(std::max(s[i], 1e-12));
    }
    CHECK(soft_cross_entropy(l, t) ==
          doctest::Approx(expected).epsilon(1e-9));
  }
  CHECK_THROWS_AS(soft_cross_entropy({1.0, 2.0}, {0.5, 0.25, 0.25}),
                  ShapeError);
}

TEST_CASE("adam first step matches the hand-evaluated update") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.hidden_dims = {1};
  spec.output_dim = 2;
  Mlp net = Mlp::random_init(spec, 0);
  for (auto& w : net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);

  Gradients grads = Gradients::zeros_like(net);
  grads.weights[0].data[0] = 1.0;
  AdamState state = AdamState::zeros_like(net);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;

  adam_step(net, grads, state, cfg);
  CHECK(net.weights[0].data[0] == doctest::Approx(-0.1).epsilon(1e-6));
  // Every parameter with zero gradient stays put.
  CHECK(net.weights[1].data[0] == 0.0);
  CHECK(net.biases[0][0] == 0.0);
  CHECK(net.biases[1][0] == 0.0);
  CHECK(state.step == 1);
}

TEST_CASE("adam is deterministic and rejects non-finite gradients") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_dims = {3};
  spec.output_dim = 2;
  Mlp a = Mlp::random_init(spec, 9);
  Mlp b = a;
  Gradients grads = Gradients::zeros_like(a);
  for (auto& w : grads.weights) {
    for (double& v : w.data) v = 0.3;
  }
  AdamState sa = AdamState::zeros_like(a);
  AdamState sb = AdamState::zeros_like(b);
  TrainConfig cfg;
  adam_step(a, grads, sa, cfg);
  adam_step(b, grads, sb, cfg);
  for (size_t l = 0; l < a.num_layers(); ++l) {
    CHECK(a.weights[l].data == b.weights[l].data);
    CHECK(a.biases[l] == b.biases[l]);
  }

  grads.weights[0].data[0] = std::nan("");
  CHECK_THROWS_AS(adam_step(a, grads, sa, cfg), NumericError);
}

TEST_CASE("gradient check: hard and soft losses vs central differences") {
  ModelConfig cfg = small_config();
  cfg.activation = Activation::kTanh;  // no kinks near the sample points
  ClassifierModel model = ClassifierModel::make(cfg);
  const Document doc = make_doc("d", {"u", "v", "w", "u", "z"}, 0);
  const Vec x = featurize(doc, cfg);

  SUBCASE("hard label loss") {
    const size_t gold = 2;
    auto loss = [&] {
      const ForwardTrace t = forward_trace(model.net, x);
      return cross_entropy(softmax(t.logits()), gold);
    };
    const ForwardTrace t = forward_trace(model.net, x);
    Vec p = softmax(t.logits());
    Vec dlogits = p;
    dlogits[gold] -= 1.0;
    const Gradients analytic = backward(model.net, t, dlogits);
    const auto numeric = gradcheck::numeric_gradient(model.net, loss, 1e-5);
    CHECK(gradcheck::max_relative_error(gradcheck::flatten(analytic),
                                        numeric) < 1e-4);
  }

  SUBCASE("soft label loss") {
    const Vec teacher = {0.2, 0.5, 0.3};
    auto loss = [&] {
      const ForwardTrace t = forward_trace(model.net, x);
      return soft_cross_entropy(t.logits(), teacher);
    };
    const ForwardTrace t = forward_trace(model.net, x);
    Vec p = softmax(t.logits());
    Vec dlogits(p.size());
    for (size_t i = 0; i < p.size(); ++i) dlogits[i] = p[i] - teacher[i];
    const Gradients analytic = backward(model.net, t, dlogits);
    const auto numeric = gradcheck::numeric_gradient(model.net, loss, 1e-5);
    CHECK(gradcheck::max_relative_error(gradcheck::flatten(analytic),
                                        numeric) < 1e-4);
  }
}

TEST_CASE("training separates a linearly separable task") {
  // Two classes marked by disjoint token sets.
  std::vector<Document> docs;
  RngStream rng(91);
  for (int i = 0; i < 200; ++i) {
    const int label = static_cast<int>(rng.uniform_index(2));
    std::vector<std::string> tokens;
    for (int t = 0; t < 8; ++t) {
      const std::string stem = label == 0 ? "neg" : "pos";
      tokens.push_back(stem + std::to_string(rng.uniform_index(10)));
    }
    docs.push_back(make_doc("d" + std::to_string(i), tokens, label));
  }

  ModelConfig mcfg = small_config();
  mcfg.num_classes = 2;
  ClassifierModel model = ClassifierModel::make(mcfg);
  TrainConfig tcfg;
  tcfg.seed = 13;
  const TrainLog log = train_classifier(model, docs, tcfg);
  CHECK(model.trained);
  CHECK(evaluate_accuracy(model, docs) >= 0.95);
  REQUIRE(log.epoch_mean_loss.size() == static_cast<size_t>(tcfg.epochs));
  CHECK(log.epoch_mean_loss.back() <= log.epoch_mean_loss.front());
}

TEST_CASE("training is bitwise deterministic") {
  std::vector<Document> docs;
  for (int i = 0; i < 40; ++i) {
    docs.push_back(make_doc("d" + std::to_string(i),
                            {"tok" + std::to_string(i % 7), "filler"},
                            i % 3));
  }
  TrainConfig tcfg;
  tcfg.seed = 29;
  ClassifierModel a = ClassifierModel::make(small_config());
  ClassifierModel b = ClassifierModel::make(small_config());
  train_classifier(a, docs, tcfg);
  train_classifier(b, docs, tcfg);
  for (size_t l = 0; l < a.net.num_layers(); ++l) {
    CHECK(a.net.weights[l].data == b.net.weights[l].data);
    CHECK(a.net.biases[l] == b.net.biases[l]);
  }
}

TEST_CASE("training rejects bad inputs") {
  ClassifierModel model = ClassifierModel::make(small_config());
  TrainConfig tcfg;
  CHECK_THROWS_AS(train_classifier(model, {}, tcfg), EmptyDataset);
  tcfg.epochs = 0;
  CHECK_THROWS_AS(
      train_classifier(model, {make_doc("d", {"x"}, 0)}, tcfg), ConfigError);
}

TEST_CASE("soft training rejects length mismatch") {
  ClassifierModel model = ClassifierModel::make(small_config());
  TrainConfig tcfg;
  CHECK_THROWS_AS(train_classifier_soft(model, {make_doc("d", {"x"}, 0)},
                                        {{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}},
                                        tcfg),
                  ShapeError);
}

TEST_CASE("evaluate_accuracy hand count and constant model") {
  ModelConfig cfg = small_config();
  cfg.num_classes = 2;
  ClassifierModel model = ClassifierModel::make(cfg);
  zero_parameters(model);
  // All-zero logits predict class 0 everywhere.
  std::vector<Document> docs = {
      make_doc("a", {"x"}, 0), make_doc("b", {"y"}, 0),
      make_doc("c", {"z"}, 1), make_doc("d", {"w"}, 0)};
  CHECK(evaluate_accuracy(model, docs) == doctest::Approx(0.75));
  CHECK_THROWS_AS(evaluate_accuracy(model, {}), EmptyDataset);

  docs[0].task_label = 5;
  CHECK_THROWS_AS(evaluate_accuracy(model, docs), InvalidLabel);
}

TEST_CASE("predict_posterior lives on the simplex") {
  const ClassifierModel model = ClassifierModel::make(small_config());
  const Document doc = make_doc("d", {"some", "tokens", "here"}, 0);
  for (double t : {0.5, 1.0, 4.0}) {
    const Vec p = predict_posterior(model, doc, t);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("checkpoint round trip is bitwise exact") {
  ModelConfig cfg = small_config();
  cfg.activation = Activation::kRelu;
  ClassifierModel model = ClassifierModel::make(cfg);
  std::vector<Document> docs;
  for (int i = 0; i < 30; ++i) {
    docs.push_back(make_doc("d" + std::to_string(i),
                            {"a" + std::to_string(i % 5), "b"}, i % 3));
  }
  TrainConfig tcfg;
  tcfg.epochs = 2;
  train_classifier(model, docs, tcfg);

  const std::string path = "tmp_model.ckpt";
  save_model(model, path);
  const ClassifierModel loaded = load_model(path);
  std::remove(path.c_str());

  CHECK(loaded.trained == model.trained);
  CHECK(loaded.config.feature_dim == model.config.feature_dim);
  CHECK(loaded.config.hidden_dims == model.config.hidden_dims);
  CHECK(loaded.config.num_classes == model.config.num_classes);
  CHECK(loaded.config.vocab_size == model.config.vocab_size);
  CHECK(loaded.config.seed == model.config.seed);
  CHECK(loaded.config.activation == model.config.activation);
  REQUIRE(loaded.net.num_layers() == model.net.num_layers());
  for (size_t l = 0; l < model.net.num_layers(); ++l) {
    CHECK(loaded.net.weights[l].data == model.net.weights[l].data);
    CHECK(loaded.net.biases[l] == model.net.biases[l]);
  }
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  const std::string path = "tmp_corrupt.ckpt";

  SUBCASE("bad magic") {
    std::ofstream out(path, std::ios::binary);
    out << "XXXX then some garbage";
    out.close();
    CHECK_THROWS_AS(load_model(path), ParseError);
  }
  SUBCASE("truncated") {
    ClassifierModel model = ClassifierModel::make(small_config());
    save_model(model, path);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(),
              static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_model(path), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_model("does_not_exist.ckpt"), ParseError);
  }
  std::remove(path.c_str());
}

TEST_CASE("model config validation") {
  ModelConfig cfg = small_config();
  cfg.hidden_dims.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.num_classes = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.feature_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  CHECK(cfg.representation_dim() == 5);
}

}  // TEST_SUITE
