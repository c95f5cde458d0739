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

#include <chrono>
#include <cstddef>
#include <span>
#include <vector>

#include "spectree/core.hpp"
#include "spectree/model.hpp"
#include "spectree/tree.hpp"

namespace spectree {

struct ToleranceConfig {
  int tau = 1;  // verification draws per node; 1 is plain single-sample verification

  void validate() const;
};

struct VerificationResult {
  std::vector<std::size_t> accepted_nodes;  // root path of the winning node
  std::vector<TokenId> accepted_tokens;     // tokens at accepted_nodes
  TokenId next_root = 0;                    // pending root of the next pass

  // Root counts as one.
  std::size_t acceptance_length() const { return accepted_nodes.size(); }
  // accepted_tokens followed by next_root.
  std::vector<TokenId> committed_tokens() const;
};

struct DecodeRun {
  std::vector<TokenId> tokens;
  std::vector<std::size_t> acceptance_lengths;  // one per pass; empty for vanilla
  std::chrono::nanoseconds duration{0};
  std::size_t forwards = 0;

  std::size_t passes() const { return acceptance_lengths.size(); }
  double mean_accepted() const;
};

// n sample-and-commit steps on the original head; exactly n forwards.
DecodeRun vanilla_decode(const Model& model, std::span<const TokenId> prompt, std::size_t n,
                         const SamplingConfig& cfg, RandomStream& rng);

// Tree verification with tolerance.
//
// Every node, in id order, owns one set of `tau` draws from its original-head
// distribution, shared by all branches through it. A non-root node is
// accepted iff its parent is accepted and its token is in the parent's set.
// The deepest accepted node wins, ties going to the lowest ranks at the first
// differing ancestor. `next_root` is the first draw of the winner's set.
// Exactly size() * tau uniforms are consumed.
VerificationResult verify_tree(std::span<const Distribution> node_dists,
                               std::span<const TokenId> tree_tokens,
                               const DraftTreeTopology& topology, const ToleranceConfig& tol,
                               const SamplingConfig& cfg, RandomStream& rng);

// Root token and the draft-head distributions that seed the next tree.
struct PendingDraft {
  TokenId root = 0;
  std::vector<Distribution> drafts;
};

// Node tokens: root -> pending.root, (head i, rank j) -> top_k(drafts[i-1])[j].
std::vector<TokenId> fill_tree_tokens(const PendingDraft& pending,
                                      const DraftTreeTopology& topology);

// Runs the prefill forward: samples the first root and keeps its drafts.
PendingDraft prefill_draft(const Model& model, const ModelState& state, const SamplingConfig& cfg,
                           RandomStream& rng);

// One tree_forward + verification. Commits the accepted tokens to `state`
// and replaces `pending` with the next root and the drafts read at the
// winning node.
VerificationResult speculative_pass(const Model& model, ModelState& state, PendingDraft& pending,
                                    const DraftTreeTopology& topology, const ToleranceConfig& tol,
                                    const SamplingConfig& cfg, RandomStream& rng);

// Prefill, then passes until at least n tokens are committed; truncated to n.
DecodeRun speculative_decode(const Model& model, std::span<const TokenId> prompt, std::size_t n,
                             const DraftTreeTopology& topology, const ToleranceConfig& tol,
                             const SamplingConfig& cfg, RandomStream& rng);

}  // namespace spectree
