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
#include <string>
#include <vector>

#include "spectree/core.hpp"
#include "spectree/decode.hpp"
#include "spectree/markov_oracle.hpp"
#include "spectree/model.hpp"
#include "spectree/tree.hpp"

namespace spectree {

struct BenchCase {
  std::size_t budget = 1;
  DraftTreeTopology tree = DraftTreeTopology::root_only();
  int tau = 1;
  SamplingConfig sampling;
};

struct BenchRow {
  std::string model;
  std::size_t budget = 0;
  std::size_t heads = 0;
  int tau = 1;
  double temperature = 1.0;
  double top_p = 1.0;
  double tps_vanilla = 0.0;
  double tps_spec = 0.0;
  double speedup = 0.0;
  double mean_accepted = 0.0;
  std::size_t passes = 0;
  double nll = 0.0;  // NaN when no ground-truth oracle is available
  double pass_count_speedup = 0.0;
};

struct BenchmarkReport {
  static constexpr const char* kCsvHeader =
      "model,budget,heads,tau,temperature,top_p,tps_vanilla,tps_spec,speedup,mean_accepted,"
      "passes,nll";

  std::vector<BenchRow> rows;

  std::string to_csv() const;
  // Gnuplot-style blocks, two tab-separated columns each: speedup and mean
  // accepted tokens against tree budget (one block per heads/tau) and
  // against tau (one block per heads/budget).
  std::string plot_data() const;
};

struct BenchOptions {
  std::size_t tokens = 256;  // tokens decoded per prompt
  int repetitions = 3;
  std::uint64_t seed = 0;
  // Ground truth for the nll column; may be null.
  const MarkovOracle* quality_oracle = nullptr;
};

// Vanilla and speculative decoding on the same prompts for every case.
// Each case decodes from a stream seeded by (seed, case index); every
// repetition re-seeds identically, so only the timings vary. Wall-clock
// figures are medians over repetitions.
BenchmarkReport run_benchmark(const Model& model, const std::string& model_id,
                              const std::vector<std::vector<TokenId>>& prompts,
                              std::span<const BenchCase> grid, const BenchOptions& options);

// Tokens-per-forward ratio of a speculative run over a vanilla run.
double pass_count_speedup(const DecodeRun& vanilla, const DecodeRun& speculative);

// Mean -ln T(prev, next) over consecutive pairs.
double nll_quality(const MarkovOracle& oracle, std::span<const TokenId> tokens);

struct EquivalenceResult {
  double statistic = 0.0;  // max total-variation distance over contexts
  bool pass = false;
  std::size_t contexts = 0;
};

struct EquivalenceOptions {
  double threshold = 0.02;
  std::size_t min_length = 100000;
  // Contexts seen fewer times than this in either sequence are ignored,
  // unless one side has it and the other never does.
  std::size_t min_context_count = 100;
};

// Compares conditional next-token frequencies given the preceding `order`
// tokens.
EquivalenceResult equivalence_test(std::span<const TokenId> a, std::span<const TokenId> b,
                                   std::size_t order, const EquivalenceOptions& options = {});

}  // namespace spectree
