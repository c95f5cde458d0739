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

#pragma once

// Shared generators and independent reference computations for tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstddef>
#include <vector>

#include "spectree/core.hpp"
#include "spectree/markov_oracle.hpp"
#include "spectree/random.hpp"
#include "spectree/tree.hpp"

namespace spectree::testutil {

// Random probability vector with a few near-zero entries mixed in.
inline Distribution random_distribution(std::size_t v, RandomStream& rng) {
  std::vector<double> w(v);
  for (auto& x : w) {
    const double u = rng.uniform();
    x = u < 0.15 ? 0.0 : -std::log(1.0 - rng.uniform());
  }
  w[rng.below(v)] += 0.5;
  return Distribution::normalize(std::move(w));
}

inline Matrix random_transition(std::size_t v, RandomStream& rng, double concentration = 1.0) {
  Matrix m(v, std::vector<double>(v));
  for (auto& row : m) {
    double sum = 0.0;
    for (auto& x : row) {
      x = std::pow(-std::log(1.0 - rng.uniform()), concentration);
      sum += x;
    }
    for (auto& x : row) x /= sum;
  }
  return m;
}

// Transition matrix whose rows all equal one random distribution.
inline Matrix memoryless_transition(std::size_t v, RandomStream& rng, double concentration) {
  Matrix one = random_transition(v, rng, concentration);
  return Matrix(v, one[0]);
}

// Random table with rows non-increasing in rank and summing to at most 1.
inline CalibrationTable random_table(int heads, int ranks, RandomStream& rng) {
  std::vector<std::vector<double>> rates(static_cast<std::size_t>(heads));
  for (auto& row : rates) {
    row.resize(static_cast<std::size_t>(ranks));
    double sum = 0.0;
    for (auto& a : row) {
      a = -std::log(1.0 - rng.uniform());
      sum += a;
    }
    const double mass = 0.3 + 0.7 * rng.uniform();
    for (auto& a : row) a = a / sum * mass;
    std::sort(row.begin(), row.end(), std::greater<>());
  }
  return CalibrationTable(std::move(rates), 1);
}

// Best summed path probability over every downward-closed node set of each
// size 1..max_size of the complete (heads, branching) tree, found by
// enumerating the sets one by one. Node probabilities are recomputed here
// from the table independently of the library.
inline std::vector<double> exhaustive_best_objective(const CalibrationTable& table, int heads,
                                                     int branching, std::size_t max_size) {
  struct Node {
    std::size_t parent;
    double prob;
  };
  std::vector<Node> nodes{{0, 1.0}};
  std::vector<std::size_t> layer{0};
  for (int d = 1; d <= heads; ++d) {
    std::vector<std::size_t> next;
    for (std::size_t p : layer) {
      for (int r = 0; r < branching; ++r) {
        nodes.push_back({p, nodes[p].prob * table.rate(d, r)});
        next.push_back(nodes.size() - 1);
      }
    }
    layer = std::move(next);
  }
  std::vector<double> best(max_size + 1, -1.0);
  std::vector<char> in(nodes.size(), 0);
  in[0] = 1;
  // Include/exclude each node in id order; a node may join only if its
  // parent already has, so every visited set is downward-closed exactly once.
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i,
                                                                   std::size_t count, double sum) {
    best[count] = std::max(best[count], sum);
    if (count == max_size) return;
    for (std::size_t j = i; j < nodes.size(); ++j) {
      if (!in[nodes[j].parent]) continue;
      in[j] = 1;
      walk(j + 1, count + 1, sum + nodes[j].prob);
      in[j] = 0;
    }
  };
  walk(1, 1, 1.0);
  return best;
}

inline double summed_path_probability(const DraftTreeTopology& t, const CalibrationTable& table) {
  std::vector<double> prob(t.size(), 1.0);
  double sum = 1.0;
  for (std::size_t n = 1; n < t.size(); ++n) {
    prob[n] = prob[t.node(n).parent] * table.rate(t.node(n).head, t.node(n).rank);
    sum += prob[n];
  }
  return sum;
}

}  // namespace spectree::testutil
