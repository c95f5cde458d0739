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
#include <cstdint>
#include <span>
#include <vector>

#include "spectree/random.hpp"

namespace spectree {

using TokenId = std::uint32_t;

// Probability vector over a vocabulary of size V >= 2.
//
// Instances are always valid: entries in [0, 1], sum within 1e-9 of one.
// Use `from_probs` for caller-supplied vectors (validated) and `normalize`
// for non-negative weights.
class Distribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  Distribution() = default;

  static Distribution from_probs(std::vector<double> probs);
  static Distribution normalize(std::vector<double> weights);
  static Distribution point_mass(std::size_t vocab_size, TokenId token);
  static Distribution uniform(std::size_t vocab_size);

  std::size_t size() const { return probs_.size(); }
  double operator[](TokenId t) const { return probs_[t]; }
  std::span<const double> probs() const { return probs_; }

  // Highest-probability token, ties toward the lowest id.
  TokenId argmax() const;

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

struct SamplingConfig {
  double top_p = 1.0;
  double temperature = 1.0;  // 0 selects the argmax

  void validate() const;
};

// Power transform p_i^(1/T), renormalized. T == 0 is the argmax point mass;
// T == 1 returns `d` unchanged.
Distribution apply_temperature(const Distribution& d, double temperature);

// Keeps the shortest probability-sorted prefix whose mass reaches `top_p`
// (the crossing token is kept) and renormalizes.
Distribution nucleus_truncate(const Distribution& d, double top_p);

// nucleus_truncate(apply_temperature(d, T), p): the distribution `sample`
// actually draws from.
Distribution prepare_sampling(const Distribution& d, const SamplingConfig& cfg);

// Inverse-CDF draw over token ids; consumes exactly one uniform.
TokenId draw(const Distribution& prepared, RandomStream& rng);

TokenId sample(const Distribution& d, const SamplingConfig& cfg, RandomStream& rng);

// `tau` independent draws, deduplicated in first-draw order. The first
// element is always the first draw. Consumes exactly `tau` uniforms.
std::vector<TokenId> sample_set(const Distribution& d, int tau, const SamplingConfig& cfg,
                                RandomStream& rng);
std::vector<TokenId> sample_set_prepared(const Distribution& prepared, int tau,
                                         RandomStream& rng);

// The k most probable tokens in descending order, ties toward lower ids.
// Position in the result is the token's rank.
std::vector<TokenId> top_k_tokens(const Distribution& d, std::size_t k);

}  // namespace spectree
