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

#include <cstddef>
#include <string_view>
#include <vector>

#include "spectree/model.hpp"

namespace spectree {

using Matrix = std::vector<std::vector<double>>;

Matrix matrix_multiply(const Matrix& a, const Matrix& b);
Matrix matrix_power(const Matrix& m, int exponent);

// Order-1 Markov chain used as a ground-truth model. The original head is
// the transition row of the last context token; draft head i is the row of
// T^(i+1), optionally mixed with the uniform distribution.
class MarkovOracle final : public Model {
 public:
  struct Options {
    // Weight on the uniform distribution mixed into every draft head.
    double draft_noise = 0.0;
    // Synthetic parameters streamed once per forward call, whatever the
    // number of tokens evaluated. Emulates the weight-bandwidth cost of a
    // real decoder step; 0 disables it.
    std::size_t forward_cost = 0;
  };

  MarkovOracle(Matrix transition, std::size_t draft_heads);
  MarkovOracle(Matrix transition, std::size_t draft_heads, Options options);

  static Matrix uniform_transition(std::size_t vocab);
  static Matrix identity_transition(std::size_t vocab);
  // Row s puts `alpha` on token (s + 1) mod V and spreads the rest evenly.
  static Matrix skew_transition(std::size_t vocab, double alpha);

  std::size_t vocab_size() const override { return transition_.size(); }
  std::size_t num_draft_heads() const override { return heads_; }

  const Matrix& transition() const { return transition_; }
  const Options& options() const { return options_; }

  // Rows of T^horizon.
  std::vector<Distribution> marginal(int horizon) const;
  double probability(TokenId from, TokenId to) const { return transition_[from][to]; }
  // Stationary distribution by power iteration.
  std::vector<double> stationary(int iterations = 10000) const;

 protected:
  ModelOutput do_forward(const ModelState& state) const override;
  std::vector<ModelOutput> do_tree_forward(const ModelState& state,
                                           std::span<const TokenId> tree_tokens,
                                           const DraftTreeTopology& topology) const override;

 private:
  ModelOutput output_after(TokenId last) const;
  void stream_weights() const;

  Matrix transition_;
  std::size_t heads_;
  Options options_;
  std::vector<Distribution> rows_;                 // T
  std::vector<std::vector<Distribution>> drafts_;  // drafts_[i][s]
  std::vector<double> weights_;
};

// Rows of T^horizon as distributions.
std::vector<Distribution> oracle_draft_exactness(const MarkovOracle& oracle, int horizon);

}  // namespace spectree
