// Copyright 2026 The Spectree Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "spectree/errors.hpp"
#include "spectree/windowed_model.hpp"

using namespace spectree;

namespace {

std::vector<TokenId> cyclic(std::size_t n, TokenId vocab) {
  std::vector<TokenId> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<TokenId>(i % vocab);
  return s;
}

std::vector<TokenId> random_sequence(std::size_t n, TokenId vocab, RandomStream& rng) {
  std::vector<TokenId> s(n);
  for (auto& x : s) x = static_cast<TokenId>(rng.below(vocab));
  return s;
}

}  // namespace

TEST_CASE("head weights follow powers of lambda") {
  TrainConfig cfg;
  cfg.lambda = 0.8;
  const std::vector<double> expected{0.8, 0.64, 0.512, 0.4096};
  for (std::size_t i = 1; i <= 4; ++i) {
    CHECK(cfg.head_weight(i) == doctest::Approx(expected[i - 1]).epsilon(1e-15));
  }
  CHECK(cfg.head_weight(0) == 1.0);
  cfg.mode = TrainMode::kWithoutTuning;
  CHECK(cfg.head_weight(0) == 0.0);
  cfg.lambda = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("make_examples") {
  const auto ex = make_examples(cyclic(10, 3), 4, 2);
  // Positions 0..6 have three future targets.
  REQUIRE(ex.size() == 7);
  CHECK(ex[0].context == std::vector<TokenId>{0});
  CHECK(ex[0].targets == std::vector<TokenId>{1, 2, 0});
  CHECK(ex[6].context == std::vector<TokenId>{0, 1, 2, 0});
  CHECK(ex[6].targets == std::vector<TokenId>{1, 2, 0});
}

TEST_CASE("train_step skips items without enough targets") {
  RandomStream rng(41);
  WindowedARModel m({3, 4, 3, 5, 2}, rng);
  std::vector<TrainingExample> batch = make_examples(cyclic(12, 3), 4, 2);
  batch.push_back({{0, 1}, {2}});
  const auto r = train_step(m, batch, TrainConfig{});
  CHECK(r.skipped == 1);
  CHECK(r.used == batch.size() - 1);
  CHECK(r.head_ce.size() == 3);
  CHECK(std::isfinite(r.total_loss));
}

TEST_CASE("total loss is the weighted sum of head cross-entropies") {
  RandomStream rng(42);
  WindowedARModel m({4, 3, 3, 6, 4}, rng);
  const auto batch = make_examples(random_sequence(60, 4, rng), 3, 4);
  TrainConfig cfg;
  const auto r = m.evaluate(batch, cfg);
  double expected = 0.0;
  for (std::size_t i = 0; i < r.head_ce.size(); ++i) expected += cfg.head_weight(i) * r.head_ce[i];
  CHECK(r.total_loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gradient check on a fresh model") {
  RandomStream rng(43);
  WindowedARModel m({4, 4, 5, 8, 4}, rng);
  const auto batch = make_examples(random_sequence(40, 4, rng), 4, 4);
  TrainConfig cfg;
  CHECK(gradient_check(m, batch, cfg, 1e-4) < 1e-4);
  cfg.mode = TrainMode::kWithoutTuning;
  CHECK(gradient_check(m, batch, cfg, 1e-4) < 1e-4);
  CHECK_THROWS_AS(gradient_check(m, batch, cfg, 1e-2), PreconditionError);
}

TEST_CASE("frozen parameters get zero gradient in wot mode") {
  RandomStream rng(44);
  WindowedARModel m({3, 4, 3, 5, 2}, rng);
  const auto batch = make_examples(random_sequence(30, 3, rng), 4, 2);
  TrainConfig cfg;
  cfg.mode = TrainMode::kWithoutTuning;
  std::vector<double> g;
  m.loss_and_gradient(batch, cfg, &g);
  const auto [tb, te] = m.trunk_range();
  const auto [hb, he] = m.head_range(0);
  for (std::size_t i = tb; i < te; ++i) CHECK(g[i] == 0.0);
  for (std::size_t i = hb; i < he; ++i) CHECK(g[i] == 0.0);
  double draft_norm = 0.0;
  for (std::size_t i = m.head_range(1).first; i < g.size(); ++i) draft_norm += std::abs(g[i]);
  CHECK(draft_norm > 0.0);
}

TEST_CASE("wot training leaves the base bit-identical") {
  RandomStream rng(45);
  WindowedARModel m({3, 4, 3, 5, 3}, rng);
  const std::vector<double> before(m.parameters().begin(), m.parameters().end());
  const auto ex = make_examples(random_sequence(300, 3, rng), 4, 3);
  TrainConfig cfg;
  cfg.mode = TrainMode::kWithoutTuning;
  cfg.epochs = 2;
  RandomStream shuffle(46);
  train(m, ex, cfg, shuffle);
  const auto base_end = m.head_range(0).second;
  bool drafts_changed = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (i < base_end) {
      CHECK(m.parameters()[i] == before[i]);
    } else if (m.parameters()[i] != before[i]) {
      drafts_changed = true;
    }
  }
  CHECK(drafts_changed);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  RandomStream rng(47);
  WindowedARModel m({3, 4, 3, 5, 2}, rng);
  const std::vector<double> before(m.parameters().begin(), m.parameters().end());
  const auto batch = make_examples(random_sequence(30, 3, rng), 4, 2);
  TrainConfig cfg;
  const double err = gradient_check(m, batch, cfg, 1e-4);
  cfg.learning_rate = 0.0;
  train_step(m, batch, cfg);
  CHECK(std::equal(before.begin(), before.end(), m.parameters().begin()));
  CHECK(gradient_check(m, batch, cfg, 1e-4) == err);
}

TEST_CASE("loss goes to zero on a cyclic corpus") {
  RandomStream rng(48);
  WindowedARModel m({4, 4, 4, 16, 3}, rng);
  const auto ex = make_examples(cyclic(2000, 4), 4, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.epochs = 10;
  RandomStream shuffle(49);
  const auto history = train(m, ex, cfg, shuffle);
  REQUIRE(history.size() == 10);
  const auto final_eval = m.evaluate(ex, cfg);
  CHECK(final_eval.total_loss < 0.01);
  for (double ce : final_eval.head_ce) CHECK(ce < 0.01);
  CHECK(history.back()[0] < history.front()[0]);
}

TEST_CASE("training is deterministic") {
  RandomStream init_a(50), init_b(50);
  WindowedARModel a({3, 4, 3, 5, 2}, init_a);
  WindowedARModel b({3, 4, 3, 5, 2}, init_b);
  RandomStream data(51);
  const auto ex = make_examples(random_sequence(400, 3, data), 4, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  RandomStream sa(52), sb(52);
  train(a, ex, cfg, sa);
  train(b, ex, cfg, sb);
  CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}
