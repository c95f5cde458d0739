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

#include "spectree/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spectree/errors.hpp"

namespace spectree {
namespace {

// Absorbs rounding in cumulative sums so that e.g. 0.25 + 0.25 reaches 0.5.
constexpr double kCumulativeSlack = 1e-12;

bool prob_order(std::span<const double> p, TokenId a, TokenId b) {
  if (p[a] != p[b]) return p[a] > p[b];
  return a < b;
}

}  // namespace

Distribution Distribution::from_probs(std::vector<double> probs) {
  if (probs.size() < 2) {
    throw PreconditionError("distribution needs a vocabulary of at least 2 tokens");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw PreconditionError("probability outside [0,1]: " + std::to_string(p));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw PreconditionError("probabilities sum to " + std::to_string(sum));
  }
  return Distribution(std::move(probs));
}

Distribution Distribution::normalize(std::vector<double> weights) {
  if (weights.size() < 2) {
    throw PreconditionError("distribution needs a vocabulary of at least 2 tokens");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw PreconditionError("weights sum to zero");
  for (double& w : weights) w /= sum;
  return Distribution(std::move(weights));
}

Distribution Distribution::point_mass(std::size_t vocab_size, TokenId token) {
  if (vocab_size < 2 || token >= vocab_size) {
    throw PreconditionError("point mass token out of range");
  }
  std::vector<double> p(vocab_size, 0.0);
  p[token] = 1.0;
  return Distribution(std::move(p));
}

Distribution Distribution::uniform(std::size_t vocab_size) {
  if (vocab_size < 2) throw PreconditionError("uniform needs at least 2 tokens");
  return Distribution(std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size)));
}

TokenId Distribution::argmax() const {
  // max_element returns the first maximum, i.e. the lowest id.
  return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

void SamplingConfig::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be finite and >= 0");
  }
}

Distribution apply_temperature(const Distribution& d, double temperature) {
  if (temperature < 0.0) throw PreconditionError("negative temperature");
  if (temperature == 0.0) return Distribution::point_mass(d.size(), d.argmax());
  if (temperature == 1.0) return d;
  // Work relative to the max in log space so small temperatures do not underflow.
  auto p = d.probs();
  const double log_max = std::log(p[d.argmax()]);
  const double inv_t = 1.0 / temperature;
  std::vector<double> w(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    w[i] = p[i] > 0.0 ? std::exp((std::log(p[i]) - log_max) * inv_t) : 0.0;
  }
  return Distribution::normalize(std::move(w));
}

Distribution nucleus_truncate(const Distribution& d, double top_p) {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw PreconditionError("top_p must lie in (0, 1]");
  if (top_p >= 1.0) return d;
  auto p = d.probs();
  std::vector<TokenId> order(p.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::sort(order.begin(), order.end(),
            [&](TokenId a, TokenId b) { return prob_order(p, a, b); });
  std::vector<double> kept(p.size(), 0.0);
  double cumulative = 0.0;
  for (TokenId t : order) {
    kept[t] = p[t];
    cumulative += p[t];
    if (cumulative >= top_p - kCumulativeSlack) break;
  }
  return Distribution::normalize(std::move(kept));
}

Distribution prepare_sampling(const Distribution& d, const SamplingConfig& cfg) {
  return nucleus_truncate(apply_temperature(d, cfg.temperature), cfg.top_p);
}

TokenId draw(const Distribution& prepared, RandomStream& rng) {
  const double u = rng.uniform();
  auto p = prepared.probs();
  double cumulative = 0.0;
  TokenId last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    cumulative += p[i];
    last_positive = static_cast<TokenId>(i);
    if (u < cumulative) return last_positive;
  }
  return last_positive;
}

TokenId sample(const Distribution& d, const SamplingConfig& cfg, RandomStream& rng) {
  return draw(prepare_sampling(d, cfg), rng);
}

std::vector<TokenId> sample_set_prepared(const Distribution& prepared, int tau,
                                         RandomStream& rng) {
  if (tau < 1) throw PreconditionError("tau must be >= 1");
  std::vector<TokenId> out;
  out.reserve(static_cast<std::size_t>(tau));
  for (int i = 0; i < tau; ++i) {
    TokenId t = draw(prepared, rng);
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

std::vector<TokenId> sample_set(const Distribution& d, int tau, const SamplingConfig& cfg,
                                RandomStream& rng) {
  return sample_set_prepared(prepare_sampling(d, cfg), tau, rng);
}

std::vector<TokenId> top_k_tokens(const Distribution& d, std::size_t k) {
  if (k < 1 || k > d.size()) throw PreconditionError("top-k requires 1 <= k <= V");
  auto p = d.probs();
  std::vector<TokenId> order(p.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](TokenId a, TokenId b) { return prob_order(p, a, b); });
  order.resize(k);
  return order;
}

}  // namespace spectree
