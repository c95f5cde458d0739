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

#include "spectree/decode.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "spectree/errors.hpp"

namespace spectree {
namespace {

using Clock = std::chrono::steady_clock;

// True if the root path of `a` is left of that of `b` at the first rank
// where they differ. Both nodes have the same depth.
bool left_of(const DraftTreeTopology& t, std::size_t a, std::size_t b) {
  auto pa = t.root_path(a);
  auto pb = t.root_path(b);
  for (std::size_t i = 1; i < pa.size() && i < pb.size(); ++i) {
    const int ra = t.node(pa[i]).rank;
    const int rb = t.node(pb[i]).rank;
    if (ra != rb) return ra < rb;
  }
  return false;
}

}  // namespace

void ToleranceConfig::validate() const {
  if (tau < 1) throw ConfigError("tolerance tau must be >= 1");
}

std::vector<TokenId> VerificationResult::committed_tokens() const {
  std::vector<TokenId> out = accepted_tokens;
  out.push_back(next_root);
  return out;
}

double DecodeRun::mean_accepted() const {
  if (acceptance_lengths.empty()) return 0.0;
  const double sum = std::accumulate(acceptance_lengths.begin(), acceptance_lengths.end(), 0.0);
  return sum / static_cast<double>(acceptance_lengths.size());
}

DecodeRun vanilla_decode(const Model& model, std::span<const TokenId> prompt, std::size_t n,
                         const SamplingConfig& cfg, RandomStream& rng) {
  if (n < 1) throw PreconditionError("vanilla_decode needs n >= 1");
  cfg.validate();
  DecodeRun run;
  run.tokens.reserve(n);
  const auto start = Clock::now();
  ModelState state = model.prefill(prompt);
  for (std::size_t i = 0; i < n; ++i) {
    const ModelOutput out = model.forward(state);
    ++run.forwards;
    const TokenId t = sample(out.original, cfg, rng);
    run.tokens.push_back(t);
    if (i + 1 < n) model.commit(state, std::span(&t, 1));
  }
  run.duration = Clock::now() - start;
  return run;
}

VerificationResult verify_tree(std::span<const Distribution> node_dists,
                               std::span<const TokenId> tree_tokens,
                               const DraftTreeTopology& topology, const ToleranceConfig& tol,
                               const SamplingConfig& cfg, RandomStream& rng) {
  tol.validate();
  const std::size_t n = topology.size();
  if (node_dists.size() != n || tree_tokens.size() != n) {
    throw StructuralError("verify_tree: " + std::to_string(n) + " nodes, " +
                          std::to_string(node_dists.size()) + " distributions, " +
                          std::to_string(tree_tokens.size()) + " tokens");
  }
  const auto tau = static_cast<std::uint64_t>(tol.tau);
  std::vector<char> accepted(n, 0);
  std::vector<std::vector<TokenId>> sets(n);
  std::size_t winner = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      accepted[i] = 1;
    } else {
      const auto& parent_set = sets[topology.node(i).parent];
      accepted[i] = std::find(parent_set.begin(), parent_set.end(), tree_tokens[i]) !=
                    parent_set.end();
    }
    if (!accepted[i]) {
      // Draws of unreachable nodes cannot affect the result; skip the work
      // but keep the stream position identical.
      rng.discard(tau);
      continue;
    }
    sets[i] = sample_set(node_dists[i], tol.tau, cfg, rng);
    if (topology.depth(i) > topology.depth(winner) ||
        (topology.depth(i) == topology.depth(winner) && left_of(topology, i, winner))) {
      winner = i;
    }
  }
  VerificationResult result;
  result.accepted_nodes = topology.root_path(winner);
  for (std::size_t id : result.accepted_nodes) result.accepted_tokens.push_back(tree_tokens[id]);
  result.next_root = sets[winner].front();
  return result;
}

std::vector<TokenId> fill_tree_tokens(const PendingDraft& pending,
                                      const DraftTreeTopology& topology) {
  if (static_cast<std::size_t>(topology.max_depth()) > pending.drafts.size()) {
    throw StructuralError("tree depth " + std::to_string(topology.max_depth()) + " exceeds " +
                          std::to_string(pending.drafts.size()) + " draft heads");
  }
  std::vector<std::vector<TokenId>> candidates(static_cast<std::size_t>(topology.max_depth()));
  const std::size_t k = topology.branching();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (k > pending.drafts[i].size()) {
      throw StructuralError("tree rank " + std::to_string(k - 1) + " exceeds vocabulary");
    }
    candidates[i] = top_k_tokens(pending.drafts[i], k);
  }
  std::vector<TokenId> tokens(topology.size());
  tokens[0] = pending.root;
  for (std::size_t id = 1; id < topology.size(); ++id) {
    const TreeNode& node = topology.node(id);
    tokens[id] = candidates[static_cast<std::size_t>(node.head - 1)]
                           [static_cast<std::size_t>(node.rank)];
  }
  return tokens;
}

PendingDraft prefill_draft(const Model& model, const ModelState& state, const SamplingConfig& cfg,
                           RandomStream& rng) {
  ModelOutput out = model.forward(state);
  return PendingDraft{sample(out.original, cfg, rng), std::move(out.drafts)};
}

VerificationResult speculative_pass(const Model& model, ModelState& state, PendingDraft& pending,
                                    const DraftTreeTopology& topology, const ToleranceConfig& tol,
                                    const SamplingConfig& cfg, RandomStream& rng) {
  const auto tokens = fill_tree_tokens(pending, topology);
  auto outputs = model.tree_forward(state, tokens, topology);
  std::vector<Distribution> dists;
  dists.reserve(outputs.size());
  for (const auto& o : outputs) dists.push_back(o.original);
  VerificationResult result = verify_tree(dists, tokens, topology, tol, cfg, rng);
  model.commit(state, result.accepted_tokens);
  pending.root = result.next_root;
  pending.drafts = std::move(outputs[result.accepted_nodes.back()].drafts);
  return result;
}

DecodeRun speculative_decode(const Model& model, std::span<const TokenId> prompt, std::size_t n,
                             const DraftTreeTopology& topology, const ToleranceConfig& tol,
                             const SamplingConfig& cfg, RandomStream& rng) {
  if (n < 1) throw PreconditionError("speculative_decode needs n >= 1");
  cfg.validate();
  tol.validate();
  DecodeRun run;
  run.tokens.reserve(n + static_cast<std::size_t>(topology.max_depth()) + 1);
  const auto start = Clock::now();
  ModelState state = model.prefill(prompt);
  PendingDraft pending = prefill_draft(model, state, cfg, rng);
  run.forwards = 1;
  while (run.tokens.size() < n) {
    const VerificationResult r = speculative_pass(model, state, pending, topology, tol, cfg, rng);
    ++run.forwards;
    run.acceptance_lengths.push_back(r.acceptance_length());
    run.tokens.insert(run.tokens.end(), r.accepted_tokens.begin(), r.accepted_tokens.end());
  }
  run.tokens.resize(n);
  run.duration = Clock::now() - start;
  return run;
}

}  // namespace spectree
