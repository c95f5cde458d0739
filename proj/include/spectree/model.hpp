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
#include <span>
#include <vector>

#include "spectree/core.hpp"
#include "spectree/tree.hpp"

namespace spectree {

// Original-head distribution for the next position plus K draft-head
// distributions; drafts[i] predicts the token i + 2 positions ahead.
struct ModelOutput {
  Distribution original;
  std::vector<Distribution> drafts;
};

// Committed context plus a model-owned cache payload. A state is a value:
// copying it is a snapshot, and restoring the copy is a rollback.
struct ModelState {
  std::vector<TokenId> context;
  std::vector<double> cache;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

// Autoregressive model with an original head and K draft heads.
//
// Forward calls never mutate the state; only `commit` extends it.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t num_draft_heads() const = 0;

  // Fresh state with `prompt` committed.
  ModelState prefill(std::span<const TokenId> prompt) const;

  // Conditioned on the committed context only.
  ModelOutput forward(const ModelState& state) const;

  // One batched evaluation of a candidate tree: entry n conditions on the
  // committed context followed by the tokens on the root path to n.
  std::vector<ModelOutput> tree_forward(const ModelState& state,
                                        std::span<const TokenId> tree_tokens,
                                        const DraftTreeTopology& topology) const;

  // Appends `tokens` to the context and refreshes the cache.
  void commit(ModelState& state, std::span<const TokenId> tokens) const;

 protected:
  virtual ModelOutput do_forward(const ModelState& state) const = 0;
  virtual std::vector<ModelOutput> do_tree_forward(const ModelState& state,
                                                   std::span<const TokenId> tree_tokens,
                                                   const DraftTreeTopology& topology) const = 0;
  // Rebuild `state.cache` after `appended` tokens were added to the context.
  virtual void refresh_cache(ModelState& state, std::size_t appended) const;

 private:
  void check_tokens(std::span<const TokenId> tokens) const;
};

// Original-head distributions of a tree_forward.
std::vector<Distribution> tree_original_distributions(const std::vector<ModelOutput>& outputs);

}  // namespace spectree
