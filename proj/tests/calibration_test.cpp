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

#include "spectree/calibration.hpp"
#include "spectree/errors.hpp"
#include "spectree/markov_oracle.hpp"
#include "spectree/windowed_model.hpp"
#include "test_util.hpp"

using namespace spectree;

namespace {

std::vector<TokenId> walk_chain(const Matrix& t, std::size_t n, TokenId start, RandomStream& rng) {
  std::vector<TokenId> s{start};
  while (s.size() < n) {
    double u = rng.uniform();
    TokenId next = 0;
    const auto& row = t[s.back()];
    for (; next + 1 < row.size(); ++next) {
      u -= row[next];
      if (u < 0.0) break;
    }
    s.push_back(next);
  }
  return s;
}

// n-step transition probabilities by repeated squaring-free products.
Matrix power(const Matrix& t, int n) {
  Matrix r(t.size(), std::vector<double>(t.size(), 0.0));
  for (std::size_t i = 0; i < t.size(); ++i) r[i][i] = 1.0;
  for (int step = 0; step < n; ++step) {
    Matrix next(t.size(), std::vector<double>(t.size(), 0.0));
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t m = 0; m < t.size(); ++m) {
        for (std::size_t j = 0; j < t.size(); ++j) next[i][j] += r[i][m] * t[m][j];
      }
    }
    r = next;
  }
  return r;
}

}  // namespace

TEST_CASE("identity chain calibrates to exact acceptance") {
  const MarkovOracle oracle(MarkovOracle::identity_transition(3), 4);
  std::vector<std::vector<TokenId>> corpus;
  for (TokenId s = 0; s < 3; ++s) corpus.push_back(std::vector<TokenId>(500, s));
  CalibrationOptions opt;
  opt.branching = 3;
  const auto table = calibrate(oracle, corpus, opt);
  CHECK(table.heads() == 4);
  CHECK(table.trials() == 3 * 496);
  for (int i = 1; i <= 4; ++i) {
    CHECK(table.rate(i, 0) == 1.0);
    CHECK(table.rate(i, 1) == 0.0);
    CHECK(table.rate(i, 2) == 0.0);
  }
}

TEST_CASE("uniform chain calibrates to 1/V") {
  const std::size_t v = 6;
  const MarkovOracle oracle(MarkovOracle::uniform_transition(v), 3);
  RandomStream rng(61);
  const std::vector<std::vector<TokenId>> corpus{
      walk_chain(MarkovOracle::uniform_transition(v), 20000, 0, rng)};
  CalibrationOptions opt;
  opt.heads = 3;
  opt.branching = 4;
  opt.seed = 62;
  const auto table = calibrate(oracle, corpus, opt);
  const double p = 1.0 / v;
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(table.trials()));
  for (int i = 1; i <= 3; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(std::abs(table.rate(i, j) - p) <= 3.0 * sigma);
  }
}

TEST_CASE("two-state chain matches enumeration") {
  const Matrix t = {{0.9, 0.1}, {0.1, 0.9}};
  const MarkovOracle oracle(t, 3);
  RandomStream rng(63);
  const std::vector<std::vector<TokenId>> corpus{walk_chain(t, 60000, 0, rng)};
  CalibrationOptions opt;
  opt.heads = 3;
  opt.branching = 2;
  opt.seed = 64;
  const auto table = calibrate(oracle, corpus, opt);
  const double n = static_cast<double>(table.trials());
  const std::vector<double> pi{0.5, 0.5};
  for (int i = 1; i <= 3; ++i) {
    const Matrix ahead = power(t, i + 1);
    for (int j = 0; j < 2; ++j) {
      // Rank-j candidate of row s, then summed over the stationary start.
      double expected = 0.0;
      for (std::size_t s = 0; s < 2; ++s) {
        const std::size_t top = ahead[s][0] >= ahead[s][1] ? 0 : 1;
        const std::size_t cand = j == 0 ? top : 1 - top;
        expected += pi[s] * ahead[s][cand];
      }
      const double sigma = std::sqrt(expected * (1 - expected) / n);
      CHECK(std::abs(table.rate(i, j) - expected) <= 3.0 * sigma);
    }
  }
  CHECK(std::abs(table.rate(1, 0) - 0.82) < 0.01);
}

TEST_CASE("calibration underflow") {
  const MarkovOracle oracle(MarkovOracle::identity_transition(2), 4);
  const std::vector<std::vector<TokenId>> corpus{std::vector<TokenId>(600, 0),
                                                 std::vector<TokenId>(5, 1)};
  CalibrationOptions opt;
  opt.branching = 2;
  CHECK_THROWS_AS(calibrate(oracle, corpus, opt), CalibrationUnderflow);
  opt.min_trials = 500;
  CHECK_NOTHROW(calibrate(oracle, corpus, opt));
}

TEST_CASE("calibration dimension checks") {
  const MarkovOracle oracle(MarkovOracle::identity_transition(2), 2);
  const std::vector<std::vector<TokenId>> corpus{std::vector<TokenId>(2000, 0)};
  CalibrationOptions opt;
  opt.heads = 3;
  opt.branching = 2;
  CHECK_THROWS_AS(calibrate(oracle, corpus, opt), DimensionMismatch);
  opt.heads = 2;
  opt.branching = 3;
  CHECK_THROWS_AS(calibrate(oracle, corpus, opt), DimensionMismatch);
}

TEST_CASE("calibration does not depend on the worker count") {
  RandomStream rng(65);
  WindowedARModel model({4, 4, 3, 6, 3}, rng);
  std::vector<std::vector<TokenId>> corpus;
  const auto t = testutil::random_transition(4, rng);
  for (int s = 0; s < 3; ++s) corpus.push_back(walk_chain(t, 900 + 300 * s, 0, rng));
  CalibrationOptions opt;
  opt.heads = 3;
  opt.branching = 4;
  opt.seed = 66;
  opt.chunk = 250;
  opt.sampling = {0.9, 0.9};
  const auto one = calibrate(model, corpus, opt);
  opt.workers = 3;
  const auto three = calibrate(model, corpus, opt);
  CHECK(one.rates() == three.rates());
  for (int i = 1; i <= 3; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(one.hits(i, j) == three.hits(i, j));
  }
}
