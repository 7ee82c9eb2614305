// tests/classifier_test.cpp

// Copyright 2026 The PCED Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "pced/classifier.hpp"
#include "support.hpp"

using namespace pced;
using nn::Architecture;

namespace {

nn::ModelConfig small_mlp() {
  nn::ModelConfig c;
  c.architecture = Architecture::kMlp;
  c.n_channels = 3;
  c.n_timepoints = 5;
  c.hidden = {8};
  return c;
}

nn::ModelConfig small_conv() {
  nn::ModelConfig c;
  c.architecture = Architecture::kShallowConv;
  c.n_channels = 3;
  c.n_timepoints = 12;
  c.n_filters = 2;
  c.kernel_length = 3;
  c.n_spatial = 3;
  return c;
}

std::vector<LabeledTrial> random_set(Rng& rng, const nn::ModelConfig& c, std::size_t n,
                                     double scale = 1.0) {
  std::vector<LabeledTrial> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({pced::testing::random_trial(rng, static_cast<std::size_t>(c.n_channels),
                                               static_cast<std::size_t>(c.n_timepoints), scale),
                   static_cast<int>(i % static_cast<std::size_t>(c.n_classes)),
                   static_cast<int>(i % 2), static_cast<std::uint32_t>(i)});
  }
  return out;
}

// Central differences with h = 1e-5 against the analytic gradient; returns the
// number of coordinates outside max(1e-4 abs, 1e-3 rel).
int finite_difference_mismatches(const nn::Model& model, const nn::Params& params,
                                 const std::vector<LabeledTrial>& batch) {
  const std::vector<double> g = model.gradient(params, batch);
  int bad = 0;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    nn::Params plus = params, minus = params;
    plus.values[i] += 1e-5;
    minus.values[i] -= 1e-5;
    const double fd = (model.loss(plus, batch) - model.loss(minus, batch)) / 2e-5;
    if (std::abs(fd - g[i]) > std::max(1e-4, 1e-3 * std::abs(fd))) ++bad;
  }
  return bad;
}

}  // namespace

TEST_SUITE("classifier") {

TEST_CASE("cross entropy reference values") {
  const Matrix uniform(1, 2, std::vector<double>{0.3, 0.3});
  const std::vector<int> zero{0};
  CHECK(nn::cross_entropy(uniform, zero) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const Matrix saturated(1, 2, std::vector<double>{100.0, 0.0});
  CHECK(nn::cross_entropy(saturated, zero) < 1e-6);

  const Matrix one_zero(1, 2, std::vector<double>{1.0, 0.0});
  const double oracle = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  CHECK(nn::cross_entropy(one_zero, zero) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(0.313262).epsilon(1e-6));

  const Matrix huge(1, 3, std::vector<double>{1000.0, -1000.0, 999.0});
  CHECK(std::isfinite(nn::cross_entropy(huge, std::vector<int>{1})));
}

TEST_CASE("cross entropy rejects bad labels") {
  const Matrix l(1, 2, std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(nn::cross_entropy(l, std::vector<int>{2}), RangeError);
  CHECK_THROWS_AS(nn::cross_entropy(l, std::vector<int>{-1}), RangeError);
  CHECK_THROWS_AS(nn::cross_entropy(l, std::vector<int>{0, 1}), ShapeError);
}

TEST_CASE("softmax shift invariance") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix l = pced::testing::random_matrix(rng, 1, 4);
    const std::vector<int> y{rep % 4};
    const double base = nn::cross_entropy(l, y);
    const int arg = nn::argmax(l.row(0));
    for (double& v : l.values()) v += 37.5;
    CHECK(std::abs(nn::cross_entropy(l, y) - base) < 1e-10);
    CHECK(nn::argmax(l.row(0)) == arg);
  }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(nn::argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
  CHECK(nn::argmax(std::vector<double>{2.0, 2.0}) == 0);
}

TEST_CASE("config validation") {
  nn::ModelConfig c = small_conv();
  c.kernel_length = 13;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_mlp();
  c.n_classes = 1;
  CHECK_THROWS_AS(nn::Model{c}, ConfigError);
  CHECK_THROWS_AS(nn::architecture_from_string("eegnet"), ConfigError);
  CHECK(nn::architecture_from_string("shallow_conv") == Architecture::kShallowConv);

  nn::TrainConfig t;
  t.learning_rate = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = {};
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = {};
  t.max_epochs = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("layout partitions the parameter vector") {
  for (const auto& cfg : {small_mlp(), small_conv()}) {
    const nn::Model m(cfg);
    std::size_t next = 0;
    for (const auto& s : m.layout()) {
      CHECK(s.offset == next);
      next += s.size();
    }
    CHECK(next == m.parameter_count());
    const nn::Params p = m.init();
    for (double v : p.slot("head_bias")) CHECK(v == 0.0);
  }
}

TEST_CASE("zero head gives equal logits per sample") {
  Rng rng(3);
  for (const auto& cfg : {small_mlp(), small_conv()}) {
    const nn::Model m(cfg);
    nn::Params p = m.init();
    for (double& v : p.slot("head")) v = 0.0;
    const auto set = random_set(rng, cfg, 5);
    std::vector<Trial> batch;
    for (const auto& s : set) batch.push_back(s.trial);
    const Matrix logits = m.forward(p, batch);
    for (std::size_t r = 0; r < logits.rows(); ++r) CHECK(logits(r, 0) == logits(r, 1));
  }
}

TEST_CASE("forward has no cross-sample coupling and is deterministic") {
  Rng rng(4);
  for (const auto& cfg : {small_mlp(), small_conv()}) {
    const nn::Model m(cfg);
    const nn::Params p = m.init();
    const auto set = random_set(rng, cfg, 6);
    std::vector<Trial> batch;
    for (const auto& s : set) batch.push_back(s.trial);
    const Matrix all = m.forward(p, batch);
    const Matrix one = m.forward(p, std::span(batch).subspan(3, 1));
    CHECK(one(0, 0) == all(3, 0));
    CHECK(one(0, 1) == all(3, 1));
    CHECK(m.forward(p, batch) == all);
    CHECK(nn::Model(cfg).init() == p);
  }
}

TEST_CASE("forward rejects mismatched shapes") {
  const nn::Model m(small_conv());
  const std::vector<Trial> wrong{Trial(2, 12)};
  CHECK_THROWS_AS(m.forward(m.init(), wrong), ShapeError);
  nn::Params p = nn::Model(small_mlp()).init();
  const std::vector<Trial> ok{Trial(3, 12)};
  CHECK_THROWS_AS(m.forward(p, ok), ShapeError);
}

TEST_CASE("shallow conv output shape over many configurations") {
  Rng rng(5);
  for (int c = 1; c <= 16; c += 3) {
    for (int t : {8, 9, 31, 64, 128}) {
      nn::ModelConfig cfg;
      cfg.n_channels = c;
      cfg.n_timepoints = t;
      cfg.kernel_length = std::min(9, t);
      cfg.n_classes = 3;
      const nn::Model m(cfg);
      const std::vector<Trial> batch{
          pced::testing::random_trial(rng, static_cast<std::size_t>(c),
                                      static_cast<std::size_t>(t)),
          pced::testing::random_trial(rng, static_cast<std::size_t>(c),
                                      static_cast<std::size_t>(t))};
      const Matrix logits = m.forward(m.init(), batch);
      CHECK(logits.rows() == 2);
      CHECK(logits.cols() == 3);
      for (double v : logits.values()) CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("gradients match central differences") {
  Rng rng(6);
  for (auto cfg : {small_mlp(), small_conv()}) {
    for (int rep = 0; rep < 5; ++rep) {
      cfg.seed = static_cast<std::uint64_t>(rep + 1);
      const nn::Model m(cfg);
      REQUIRE(m.parameter_count() <= 500);
      const auto batch = random_set(rng, cfg, 4);
      CHECK(finite_difference_mismatches(m, m.init(), batch) == 0);
    }
  }
}

TEST_CASE("gradients with the auxiliary subject head match central differences") {
  Rng rng(7);
  for (auto cfg : {small_mlp(), small_conv()}) {
    cfg.aux_subject_classes = 2;
    cfg.aux_weight = 0.7;
    const nn::Model m(cfg);
    const auto batch = random_set(rng, cfg, 4);
    CHECK(finite_difference_mismatches(m, m.init(), batch) == 0);
  }
}

TEST_CASE("mean gradient equals the mean of per-sample gradients") {
  Rng rng(8);
  for (const auto& cfg : {small_mlp(), small_conv()}) {
    const nn::Model m(cfg);
    const nn::Params p = m.init();
    const auto batch = random_set(rng, cfg, 7);
    const auto g = m.gradient(p, batch);
    std::vector<double> mean(g.size(), 0.0);
    for (const auto& s : batch) {
      const auto gi = m.sample_class_gradient(p, s);
      for (std::size_t i = 0; i < g.size(); ++i) mean[i] += gi[i] / 7.0;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i] - mean[i]));
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("saturated correct predictions have a vanishing gradient") {
  Rng rng(9);
  const nn::ModelConfig cfg = small_mlp();
  const nn::Model m(cfg);
  nn::Params p = m.init();
  for (double& v : p.slot("head")) v = 0.0;
  p.slot("head_bias")[0] = 100.0;
  std::vector<LabeledTrial> batch = random_set(rng, cfg, 4);
  for (auto& s : batch) s.class_label = 0;
  double norm = 0.0;
  for (double v : m.gradient(p, batch)) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-4);
  CHECK(nn::evaluate(m, p, batch) == 1.0);
}

TEST_CASE("evaluate on random parameters is near chance") {
  Rng rng(10);
  const nn::ModelConfig cfg = small_conv();
  const nn::Model m(cfg);
  const auto set = random_set(rng, cfg, 2000);
  const double acc = nn::evaluate(m, m.init(), set);
  CHECK(acc >= 0.4);
  CHECK(acc <= 0.6);
  const double single = nn::evaluate(m, m.init(), std::span(set).subspan(0, 1));
  CHECK((single == 0.0 || single == 1.0));
  CHECK_THROWS_AS(nn::evaluate(m, m.init(), {}), EmptyInputError);
}

TEST_CASE("training separates a linearly separable toy set") {
  Rng rng(11);
  nn::ModelConfig cfg = small_mlp();
  const nn::Model m(cfg);
  std::vector<LabeledTrial> set = random_set(rng, cfg, 64, 0.3);
  for (auto& s : set) {
    const float shift = s.class_label == 0 ? 1.0f : -1.0f;
    for (std::size_t t = 0; t < 5; ++t) s.trial(0, t) += shift;
  }
  nn::TrainConfig tc;
  tc.patience = 200;
  const auto result = nn::train(m, m.init(), set, set, tc);
  CHECK(nn::evaluate(m, result.params, set) == 1.0);
  CHECK(result.history.train_loss.size() <= 200);
}

TEST_CASE("training boundaries, determinism and hooks") {
  Rng rng(12);
  const nn::ModelConfig cfg = small_conv();
  const nn::Model m(cfg);
  const auto train_set = random_set(rng, cfg, 24);
  const auto val_set = random_set(rng, cfg, 8);
  nn::TrainConfig tc;
  tc.max_epochs = 15;
  tc.batch_size = 5;

  SUBCASE("patience 0 runs exactly one epoch") {
    nn::TrainConfig zero = tc;
    zero.patience = 0;
    const auto r = nn::train(m, m.init(), train_set, val_set, zero);
    CHECK(r.history.train_loss.size() == 1);
    CHECK(r.history.best_epoch == 0);
  }
  SUBCASE("same seeds give the same history") {
    const auto a = nn::train(m, m.init(), train_set, val_set, tc);
    const auto b = nn::train(m, m.init(), train_set, val_set, tc);
    CHECK(a.history == b.history);
    CHECK(a.params == b.params);
  }
  SUBCASE("a zero penalty hook is bitwise neutral") {
    const auto a = nn::train(m, m.init(), train_set, val_set, tc);
    const nn::PenaltyHook zero = [](std::span<const double>, std::span<double>) { return 0.0; };
    const auto b = nn::train(m, m.init(), train_set, val_set, tc, zero);
    CHECK(a.params == b.params);
    CHECK(a.history == b.history);
  }
  SUBCASE("best epoch is the earliest maximum of validation accuracy") {
    const auto r = nn::train(m, m.init(), train_set, val_set, tc);
    const auto& acc = r.history.val_accuracy;
    const auto best = std::max_element(acc.begin(), acc.end());
    CHECK(r.history.best_epoch == static_cast<int>(best - acc.begin()));
    CHECK(nn::evaluate(m, r.params, val_set) == doctest::Approx(*best));
    CHECK(static_cast<int>(acc.size()) - 1 - r.history.best_epoch <= tc.patience);
  }
  SUBCASE("sgd also trains") {
    nn::TrainConfig sgd = tc;
    sgd.optimizer = nn::Optimizer::kSgd;
    sgd.learning_rate = 0.05;
    const auto r = nn::train(m, m.init(), train_set, val_set, sgd);
    CHECK(r.history.train_loss.size() >= 1);
  }
  SUBCASE("non-finite loss aborts") {
    const nn::PenaltyHook nan = [](std::span<const double>, std::span<double>) {
      return std::nan("");
    };
    CHECK_THROWS_AS(nn::train(m, m.init(), train_set, val_set, tc, nan), NumericalError);
  }
  SUBCASE("empty sets are rejected") {
    CHECK_THROWS_AS(nn::train(m, m.init(), {}, val_set, tc), EmptyInputError);
    CHECK_THROWS_AS(nn::train(m, m.init(), train_set, {}, tc), EmptyInputError);
  }
}

TEST_CASE("parameter blobs round-trip and reject corruption") {
  const nn::Model m(small_conv());
  const nn::Params p = m.init();
  const auto blob = nn::encode_params(p);
  CHECK(nn::decode_params(blob) == p);
  CHECK(std::string(blob.begin(), blob.begin() + 4) == "PCEP");

  auto bad = blob;
  bad[0] = 'Q';
  CHECK_THROWS_AS(nn::decode_params(bad), FormatError);
  std::vector<std::uint8_t> truncated(blob.begin(), blob.end() - 3);
  CHECK_THROWS_AS(nn::decode_params(truncated), FormatError);
  auto trailing = blob;
  trailing.push_back(1);
  CHECK_THROWS_AS(nn::decode_params(trailing), FormatError);
}

}  // TEST_SUITE
