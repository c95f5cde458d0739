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

#include "spectree/tree.hpp"

#include <algorithm>
#include <queue>
#include <string>

#include "spectree/errors.hpp"

namespace spectree {

DraftTreeTopology::DraftTreeTopology(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw StructuralError("topology needs a root node");
  children_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    if (n.id != i) throw StructuralError("node ids must equal their positions");
    if (i == 0) {
      if (!n.is_root() || n.head != 0) throw StructuralError("node 0 must be the root");
      continue;
    }
    if (n.is_root()) throw StructuralError("node " + std::to_string(i) + " is a second root");
    if (n.parent >= i) {
      throw StructuralError("parent of node " + std::to_string(i) + " must precede it");
    }
    if (n.head != nodes_[n.parent].head + 1) {
      throw StructuralError("node " + std::to_string(i) + " head must be parent depth + 1");
    }
    if (n.rank < 0) throw StructuralError("negative rank at node " + std::to_string(i));
    auto& siblings = children_[n.parent];
    for (std::size_t s : siblings) {
      if (nodes_[s].rank == n.rank) {
        throw StructuralError("duplicate rank " + std::to_string(n.rank) + " under node " +
                              std::to_string(n.parent));
      }
    }
    siblings.push_back(i);
    max_depth_ = std::max(max_depth_, n.head);
    branching_ = std::max(branching_, static_cast<std::size_t>(n.rank) + 1);
  }
  for (auto& c : children_) {
    std::sort(c.begin(), c.end(),
              [&](std::size_t a, std::size_t b) { return nodes_[a].rank < nodes_[b].rank; });
  }
}

DraftTreeTopology DraftTreeTopology::root_only() {
  return DraftTreeTopology({TreeNode{}});
}

DraftTreeTopology DraftTreeTopology::chain(int depth) {
  std::vector<TreeNode> nodes{TreeNode{}};
  for (int d = 1; d <= depth; ++d) {
    nodes.push_back({static_cast<std::size_t>(d), static_cast<std::size_t>(d - 1), d, 0});
  }
  return DraftTreeTopology(std::move(nodes));
}

std::vector<std::size_t> DraftTreeTopology::root_path(std::size_t id) const {
  std::vector<std::size_t> path;
  for (std::size_t n = id; n != TreeNode::kNoParent; n = nodes_[n].parent) path.push_back(n);
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t full_tree_size(int heads, int branching) {
  std::size_t total = 1;
  std::size_t layer = 1;
  for (int d = 1; d <= heads; ++d) {
    layer *= static_cast<std::size_t>(branching);
    total += layer;
  }
  return total;
}

DraftTreeTopology full_tree(int heads, int branching) {
  if (heads < 1 || branching < 1) throw PreconditionError("full_tree requires K >= 1 and k >= 1");
  std::vector<TreeNode> nodes{TreeNode{}};
  std::size_t layer_begin = 0;
  std::size_t layer_end = 1;
  for (int d = 1; d <= heads; ++d) {
    for (std::size_t p = layer_begin; p < layer_end; ++p) {
      for (int r = 0; r < branching; ++r) nodes.push_back({nodes.size(), p, d, r});
    }
    layer_begin = layer_end;
    layer_end = nodes.size();
  }
  return DraftTreeTopology(std::move(nodes));
}

std::size_t TreeMask::row_count(std::size_t row) const {
  return static_cast<std::size_t>(
      std::count(bits_.begin() + static_cast<std::ptrdiff_t>(row * n_),
                  bits_.begin() + static_cast<std::ptrdiff_t>((row + 1) * n_), 1));
}

TreeMask attention_mask(const DraftTreeTopology& t) {
  TreeMask mask(t.size());
  for (std::size_t a = 0; a < t.size(); ++a) {
    for (std::size_t b = a; b != TreeNode::kNoParent; b = t.node(b).parent) mask.set(a, b);
  }
  return mask;
}

CalibrationTable::CalibrationTable(std::vector<std::vector<double>> rates, std::uint64_t trials)
    : rates_(std::move(rates)), trials_(trials) {
  for (const auto& row : rates_) {
    if (row.size() != rates_.front().size() || row.empty()) {
      throw StructuralError("calibration rows must share one non-zero width");
    }
    for (double a : row) {
      if (!(a >= 0.0 && a <= 1.0)) throw PreconditionError("acceptance rate outside [0,1]");
    }
  }
}

CalibrationTable CalibrationTable::from_counts(std::vector<std::vector<std::uint64_t>> hits,
                                               std::uint64_t trials) {
  if (trials == 0) throw CalibrationUnderflow("calibration has zero trials");
  std::vector<std::vector<double>> rates;
  for (const auto& row : hits) {
    // Pool adjacent violators: blocks of (sum, count) merged while a later
    // block's mean exceeds an earlier one's.
    std::vector<std::pair<double, std::size_t>> blocks;
    for (std::uint64_t h : row) {
      if (h > trials) throw PreconditionError("hit count exceeds trials");
      blocks.emplace_back(static_cast<double>(h) / static_cast<double>(trials), 1);
      while (blocks.size() > 1) {
        auto& prev = blocks[blocks.size() - 2];
        auto& last = blocks.back();
        if (prev.first / prev.second >= last.first / last.second) break;
        prev.first += last.first;
        prev.second += last.second;
        blocks.pop_back();
      }
    }
    std::vector<double> r;
    for (auto [sum, count] : blocks) r.insert(r.end(), count, sum / static_cast<double>(count));
    rates.push_back(std::move(r));
  }
  CalibrationTable table(std::move(rates), trials);
  table.hits_ = std::move(hits);
  return table;
}

double node_path_probability(const DraftTreeTopology& t, const CalibrationTable& table,
                             std::size_t node) {
  if (node >= t.size()) throw PreconditionError("node not in topology");
  double p = 1.0;
  for (std::size_t n = node; !t.node(n).is_root(); n = t.node(n).parent) {
    const TreeNode& tn = t.node(n);
    if (tn.head > table.heads() || tn.rank >= table.ranks()) {
      throw DimensionMismatch("topology exceeds calibration table dimensions");
    }
    p *= table.rate(tn.head, tn.rank);
  }
  return p;
}

namespace {

struct Candidate {
  double prob;
  int depth;
  int rank;
  std::size_t parent_layer_index;  // parent's breadth-first position in its layer
  std::size_t parent_selected;     // parent's index in the selection list
};

// True if `a` should be taken after `b`.
struct CandidateLater {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.prob != b.prob) return a.prob < b.prob;
    if (a.depth != b.depth) return a.depth > b.depth;
    if (a.rank != b.rank) return a.rank > b.rank;
    return a.parent_layer_index > b.parent_layer_index;
  }
};

struct Selected {
  int depth;
  int rank;
  std::size_t layer_index;
  std::size_t parent_selected;
  double prob;
};

}  // namespace

SparseTree build_sparse_tree(const CalibrationTable& table, std::size_t budget, int heads,
                             int branching) {
  if (budget < 1) throw PreconditionError("tree budget must be >= 1");
  if (heads < 1 || branching < 1) throw PreconditionError("heads and branching must be >= 1");
  if (heads > table.heads() || branching > table.ranks()) {
    throw DimensionMismatch("requested K=" + std::to_string(heads) + " k=" +
                            std::to_string(branching) + " exceeds calibration table K=" +
                            std::to_string(table.heads()) + " k=" + std::to_string(table.ranks()));
  }
  SparseTree result{DraftTreeTopology::root_only(), false};
  const std::size_t full = full_tree_size(heads, branching);
  if (budget > full) {
    budget = full;
    result.clamped = true;
  }

  std::vector<Selected> selected{{0, 0, 0, TreeNode::kNoParent, 1.0}};
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateLater> frontier;
  auto push_children = [&](std::size_t sel) {
    const Selected& p = selected[sel];
    if (p.depth >= heads) return;
    for (int r = 0; r < branching; ++r) {
      frontier.push({p.prob * table.rate(p.depth + 1, r), p.depth + 1, r, p.layer_index, sel});
    }
  };
  push_children(0);
  while (selected.size() < budget) {
    Candidate c = frontier.top();
    frontier.pop();
    selected.push_back({c.depth, c.rank,
                        c.parent_layer_index * static_cast<std::size_t>(branching) +
                            static_cast<std::size_t>(c.rank),
                        c.parent_selected, c.prob});
    push_children(selected.size() - 1);
  }

  // Renumber breadth-first by (depth, layer index) so that parents precede
  // children and siblings appear in rank order; matches full_tree's layout.
  std::vector<std::size_t> order(selected.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (selected[a].depth != selected[b].depth) return selected[a].depth < selected[b].depth;
    return selected[a].layer_index < selected[b].layer_index;
  });
  std::vector<std::size_t> new_id(selected.size());
  for (std::size_t i = 0; i < order.size(); ++i) new_id[order[i]] = i;
  std::vector<TreeNode> nodes;
  nodes.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Selected& s = selected[order[i]];
    if (i == 0) {
      nodes.push_back(TreeNode{});
      continue;
    }
    nodes.push_back({i, new_id[s.parent_selected], s.depth, s.rank});
  }
  result.topology = DraftTreeTopology(std::move(nodes));
  return result;
}

double expected_accept_length(const DraftTreeTopology& t, const CalibrationTable& table, int tau) {
  if (tau < 1) throw PreconditionError("tau must be >= 1");
  if (tau > 1) {
    for (const auto& row : table.rates()) {
      double sum = 0.0;
      for (double a : row) sum += a;
      if (sum > 1.0 + 1e-9) {
        throw PreconditionError("per-head rates must sum to <= 1 for tau > 1");
      }
    }
  }
  const int max_depth = t.max_depth();
  // reach[n][m] = P(deepest accepted path below n, counting n, has length >= m + 1).
  std::vector<std::vector<double>> reach(t.size());
  std::vector<double> binom(static_cast<std::size_t>(tau) + 1);
  // Pascal rows are rebuilt on demand; tau is small.
  auto choose = [](int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
  };
  for (int j = 0; j <= tau; ++j) binom[static_cast<std::size_t>(j)] = choose(tau, j);

  for (std::size_t idx = t.size(); idx-- > 0;) {
    const int levels = max_depth - t.depth(idx) + 1;
    std::vector<double>& r = reach[idx];
    r.assign(static_cast<std::size_t>(levels), 0.0);
    r[0] = 1.0;
    auto kids = t.children(idx);
    if (kids.empty()) continue;
    for (int m = 1; m < levels; ++m) {
      // Moments E[S^j] of S = sum_c a_c * B_c, B_c ~ Bernoulli(reach_c[m-1]).
      std::vector<double> mom(static_cast<std::size_t>(tau) + 1, 0.0);
      mom[0] = 1.0;
      for (std::size_t c : kids) {
        const auto& rc = reach[c];
        const double p = static_cast<std::size_t>(m - 1) < rc.size() ? rc[m - 1] : 0.0;
        if (p == 0.0) continue;
        const double a = table.rate(t.node(c).head, t.node(c).rank);
        std::vector<double> x(static_cast<std::size_t>(tau) + 1);
        x[0] = 1.0;
        for (int j = 1; j <= tau; ++j) x[j] = x[j - 1] * a;
        for (int j = 1; j <= tau; ++j) x[j] *= p;
        std::vector<double> next(static_cast<std::size_t>(tau) + 1, 0.0);
        for (int j = 0; j <= tau; ++j) {
          for (int i = 0; i <= j; ++i) next[j] += choose(j, i) * mom[i] * x[j - i];
        }
        mom = std::move(next);
      }
      // P(no draw lands on a child whose subtree reaches depth m) = E[(1 - S)^tau].
      double miss = 0.0;
      for (int j = 0; j <= tau; ++j) miss += binom[j] * ((j % 2) ? -mom[j] : mom[j]);
      r[m] = std::clamp(1.0 - miss, 0.0, 1.0);
    }
  }
  double expected = 0.0;
  for (double p : reach[0]) expected += p;
  return expected;
}

}  // namespace spectree
