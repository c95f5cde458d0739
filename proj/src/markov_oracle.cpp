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

#include "spectree/markov_oracle.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "spectree/errors.hpp"

namespace spectree {

Matrix matrix_multiply(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.empty() ? 0 : b[0].size();
  Matrix out(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double aik = a[i][k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i][j] += aik * b[k][j];
    }
  }
  return out;
}

Matrix matrix_power(const Matrix& m, int exponent) {
  if (exponent < 1) throw PreconditionError("matrix power exponent must be >= 1");
  Matrix out = m;
  for (int i = 1; i < exponent; ++i) out = matrix_multiply(out, m);
  return out;
}

MarkovOracle::MarkovOracle(Matrix transition, std::size_t draft_heads)
    : MarkovOracle(std::move(transition), draft_heads, Options{}) {}

MarkovOracle::MarkovOracle(Matrix transition, std::size_t draft_heads, Options options)
    : transition_(std::move(transition)), heads_(draft_heads), options_(options) {
  const std::size_t v = transition_.size();
  if (v < 2) throw PreconditionError("oracle needs at least 2 states");
  if (!(options_.draft_noise >= 0.0 && options_.draft_noise <= 1.0)) {
    throw PreconditionError("draft noise must lie in [0,1]");
  }
  for (std::size_t s = 0; s < v; ++s) {
    if (transition_[s].size() != v) throw StructuralError("transition matrix must be square");
    // Validates entries and the row sum.
    rows_.push_back(Distribution::from_probs(transition_[s]));
  }
  Matrix power = transition_;
  for (std::size_t i = 0; i < heads_; ++i) {
    power = matrix_multiply(power, transition_);
    std::vector<Distribution> head;
    for (std::size_t s = 0; s < v; ++s) {
      std::vector<double> w = power[s];
      for (double& x : w) {
        x = (1.0 - options_.draft_noise) * x + options_.draft_noise / static_cast<double>(v);
      }
      head.push_back(Distribution::normalize(std::move(w)));
    }
    drafts_.push_back(std::move(head));
  }
  weights_.resize(options_.forward_cost);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] = 1.0 / static_cast<double>(i % 1024 + 1);
  }
}

Matrix MarkovOracle::uniform_transition(std::size_t vocab) {
  return Matrix(vocab, std::vector<double>(vocab, 1.0 / static_cast<double>(vocab)));
}

Matrix MarkovOracle::identity_transition(std::size_t vocab) {
  Matrix m(vocab, std::vector<double>(vocab, 0.0));
  for (std::size_t s = 0; s < vocab; ++s) m[s][s] = 1.0;
  return m;
}

Matrix MarkovOracle::skew_transition(std::size_t vocab, double alpha) {
  if (vocab < 2) throw PreconditionError("skew chain needs at least 2 states");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw PreconditionError("skew alpha must lie in [0,1]");
  const double rest = (1.0 - alpha) / static_cast<double>(vocab - 1);
  Matrix m(vocab, std::vector<double>(vocab, rest));
  for (std::size_t s = 0; s < vocab; ++s) m[s][(s + 1) % vocab] = alpha;
  return m;
}

std::vector<Distribution> MarkovOracle::marginal(int horizon) const {
  Matrix p = matrix_power(transition_, horizon);
  std::vector<Distribution> out;
  for (auto& row : p) out.push_back(Distribution::normalize(std::move(row)));
  return out;
}

std::vector<double> MarkovOracle::stationary(int iterations) const {
  const std::size_t v = vocab_size();
  std::vector<double> pi(v, 1.0 / static_cast<double>(v));
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> next(v, 0.0);
    for (std::size_t s = 0; s < v; ++s) {
      for (std::size_t t = 0; t < v; ++t) next[t] += pi[s] * transition_[s][t];
    }
    // Average with the previous iterate so periodic chains converge too.
    double delta = 0.0;
    for (std::size_t t = 0; t < v; ++t) {
      next[t] = 0.5 * (next[t] + pi[t]);
      delta += std::abs(next[t] - pi[t]);
    }
    pi = std::move(next);
    if (delta < 1e-15) break;
  }
  return pi;
}

ModelOutput MarkovOracle::output_after(TokenId last) const {
  ModelOutput out{rows_[last], {}};
  out.drafts.reserve(heads_);
  for (const auto& head : drafts_) out.drafts.push_back(head[last]);
  return out;
}

void MarkovOracle::stream_weights() const {
  if (weights_.empty()) return;
  double acc = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  // Keep the reduction observable so it is not optimized away.
  volatile double sink = acc;
  (void)sink;
}

ModelOutput MarkovOracle::do_forward(const ModelState& state) const {
  stream_weights();
  return output_after(state.context.back());
}

std::vector<ModelOutput> MarkovOracle::do_tree_forward(const ModelState&,
                                                       std::span<const TokenId> tree_tokens,
                                                       const DraftTreeTopology&) const {
  stream_weights();
  std::vector<ModelOutput> out;
  out.reserve(tree_tokens.size());
  // Order 1: only the node's own token matters.
  for (TokenId t : tree_tokens) out.push_back(output_after(t));
  return out;
}

std::vector<Distribution> oracle_draft_exactness(const MarkovOracle& oracle, int horizon) {
  return oracle.marginal(horizon);
}

}  // namespace spectree
