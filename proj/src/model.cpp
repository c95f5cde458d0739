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

#include "spectree/model.hpp"

#include <string>

#include "spectree/errors.hpp"

namespace spectree {

ModelState Model::prefill(std::span<const TokenId> prompt) const {
  if (prompt.empty()) throw PreconditionError("prompt must be non-empty");
  ModelState state;
  commit(state, prompt);
  return state;
}

ModelOutput Model::forward(const ModelState& state) const {
  if (state.context.empty()) throw PreconditionError("forward on an empty context");
  return do_forward(state);
}

std::vector<ModelOutput> Model::tree_forward(const ModelState& state,
                                             std::span<const TokenId> tree_tokens,
                                             const DraftTreeTopology& topology) const {
  if (state.context.empty()) throw PreconditionError("tree_forward on an empty context");
  if (tree_tokens.size() != topology.size()) {
    throw StructuralError("tree has " + std::to_string(topology.size()) + " nodes but " +
                          std::to_string(tree_tokens.size()) + " tokens were supplied");
  }
  check_tokens(tree_tokens);
  return do_tree_forward(state, tree_tokens, topology);
}

void Model::commit(ModelState& state, std::span<const TokenId> tokens) const {
  if (tokens.empty()) throw PreconditionError("commit of an empty token list");
  check_tokens(tokens);
  state.context.insert(state.context.end(), tokens.begin(), tokens.end());
  refresh_cache(state, tokens.size());
}

void Model::refresh_cache(ModelState&, std::size_t) const {}

void Model::check_tokens(std::span<const TokenId> tokens) const {
  for (TokenId t : tokens) {
    if (t >= vocab_size()) {
      throw PreconditionError("token " + std::to_string(t) + " outside vocabulary of " +
                              std::to_string(vocab_size()));
    }
  }
}

std::vector<Distribution> tree_original_distributions(const std::vector<ModelOutput>& outputs) {
  std::vector<Distribution> out;
  out.reserve(outputs.size());
  for (const auto& o : outputs) out.push_back(o.original);
  return out;
}

}  // namespace spectree
