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
#include <limits>
#include <span>
#include <vector>

namespace spectree {

struct TreeNode {
  static constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

  std::size_t id = 0;
  std::size_t parent = kNoParent;
  int head = 0;  // depth; the root is 0, a depth-d node holds a head-d candidate
  int rank = 0;  // candidate rank within its head's top-k, unused for the root

  bool is_root() const { return parent == kNoParent; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Candidate tree. Node 0 is the root (the pending next token); every other
// node carries the rank-j candidate of head `depth`.
//
// Construction enforces: ids equal positions, parents precede children,
// head == parent.head + 1, and no (parent, rank) pair repeats. Iterating
// ids in order is therefore a topological order.
class DraftTreeTopology {
 public:
  explicit DraftTreeTopology(std::vector<TreeNode> nodes);

  static DraftTreeTopology root_only();
  // Root followed by a single rank-0 path of `depth` nodes.
  static DraftTreeTopology chain(int depth);

  std::size_t size() const { return nodes_.size(); }
  const TreeNode& node(std::size_t id) const { return nodes_[id]; }
  std::span<const TreeNode> nodes() const { return nodes_; }
  // Children ordered by rank.
  std::span<const std::size_t> children(std::size_t id) const { return children_[id]; }

  int depth(std::size_t id) const { return nodes_[id].head; }
  int max_depth() const { return max_depth_; }
  // One past the largest rank used; the top-k width a filler must provide.
  std::size_t branching() const { return branching_; }

  // Node ids from the root to `id`, inclusive.
  std::vector<std::size_t> root_path(std::size_t id) const;

  friend bool operator==(const DraftTreeTopology& a, const DraftTreeTopology& b) {
    return a.nodes_ == b.nodes_;
  }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<std::size_t>> children_;
  int max_depth_ = 0;
  std::size_t branching_ = 0;
};

// Complete k-ary tree of depth K, breadth-first, children in rank order.
DraftTreeTopology full_tree(int heads, int branching);

// Number of nodes in full_tree(heads, branching).
std::size_t full_tree_size(int heads, int branching);

class TreeMask {
 public:
  explicit TreeMask(std::size_t n) : n_(n), bits_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool operator()(std::size_t row, std::size_t col) const { return bits_[row * n_ + col] != 0; }
  void set(std::size_t row, std::size_t col) { bits_[row * n_ + col] = 1; }
  std::size_t row_count(std::size_t row) const;

 private:
  std::size_t n_;
  std::vector<std::uint8_t> bits_;
};

// mask(a, b) is true iff b lies on the root path of a (a itself included).
TreeMask attention_mask(const DraftTreeTopology& t);

// Per-(head, rank) acceptance rates a[i][j], heads 1..K, ranks 0..k-1.
class CalibrationTable {
 public:
  CalibrationTable() = default;
  // Rates given directly; each must lie in [0, 1].
  CalibrationTable(std::vector<std::vector<double>> rates, std::uint64_t trials);
  // Hit counts per cell with a shared per-head trial count. Rates are the
  // empirical frequencies made non-increasing in rank by pooling adjacent
  // violators.
  static CalibrationTable from_counts(std::vector<std::vector<std::uint64_t>> hits,
                                      std::uint64_t trials);

  int heads() const { return static_cast<int>(rates_.size()); }
  int ranks() const { return rates_.empty() ? 0 : static_cast<int>(rates_[0].size()); }
  std::uint64_t trials() const { return trials_; }
  // `head` is 1-based.
  double rate(int head, int rank) const { return rates_[head - 1][rank]; }
  std::uint64_t hits(int head, int rank) const { return hits_.empty() ? 0 : hits_[head - 1][rank]; }
  const std::vector<std::vector<double>>& rates() const { return rates_; }

 private:
  std::vector<std::vector<double>> rates_;
  std::vector<std::vector<std::uint64_t>> hits_;
  std::uint64_t trials_ = 0;
};

// Product of a[head][rank] along the root path to `node`; 1 for the root.
double node_path_probability(const DraftTreeTopology& t, const CalibrationTable& table,
                             std::size_t node);

struct SparseTree {
  DraftTreeTopology topology;
  bool clamped = false;  // requested budget exceeded the full tree
};

// Greedy construction: repeatedly add the frontier node with the highest
// path probability, ties to (shallower, lower rank, lower parent). Path
// probabilities never increase from parent to child, so the result maximizes
// the summed path probability over all downward-closed sets of that size.
SparseTree build_sparse_tree(const CalibrationTable& table, std::size_t budget, int heads,
                             int branching);

// Expected acceptance length (root counts as one) when each node's
// verification set holds `tau` draws in which the rank-j candidate of head
// i appears per draw with probability a[i][j]. With tau == 1 siblings are
// exclusive and this is 1 + sum of path probabilities.
double expected_accept_length(const DraftTreeTopology& t, const CalibrationTable& table, int tau);

}  // namespace spectree
