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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "spectree/bench.hpp"
#include "spectree/calibration.hpp"
#include "spectree/decode.hpp"
#include "spectree/markov_oracle.hpp"
#include "spectree/tree.hpp"
#include "spectree/windowed_model.hpp"
#include "test_util.hpp"

#ifndef SPECTREE_CLI_PATH
#error "SPECTREE_CLI_PATH must name the spectree binary"
#endif

using namespace spectree;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<TokenId> walk_chain(const Matrix& t, std::size_t n, TokenId start, RandomStream& rng) {
  std::vector<TokenId> s{start};
  std::vector<Distribution> rows;
  for (const auto& r : t) rows.push_back(Distribution::from_probs(r));
  while (s.size() < n) s.push_back(draw(rows[s.back()], rng));
  return s;
}

double row_entropy(const std::vector<double>& row) {
  double h = 0.0;
  for (double p : row) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

// 1. Greedy decoding with any tree reproduces vanilla greedy output.
Outcome greedy_losslessness() {
  const auto start = Clock::now();
  RandomStream gen(1001);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t v = 2 + gen.below(15);
    const std::size_t heads = 1 + gen.below(4);
    const MarkovOracle oracle(testutil::random_transition(v, gen, 1.0 + 2.0 * gen.uniform()),
                              heads, {0.5 * gen.uniform(), 0});
    const int k = static_cast<int>(std::min<std::size_t>(v, 1 + gen.below(5)));
    const auto table = testutil::random_table(static_cast<int>(heads), k, gen);
    const auto tree =
        build_sparse_tree(table, 1 + gen.below(80), static_cast<int>(heads), k).topology;
    const std::vector<TokenId> prompt{static_cast<TokenId>(gen.below(v))};
    RandomStream a(trial), b(trial + 500);
    const SamplingConfig greedy{1.0, 0.0};
    const auto van = vanilla_decode(oracle, prompt, 200, greedy, a);
    const auto spec = speculative_decode(oracle, prompt, 200, tree, {1}, greedy, b);
    mismatches += van.tokens != spec.tokens;
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && t < 60.0,
          std::to_string(mismatches) + " of 100 oracles differ, " + fmt("%.2fs", t)};
}

// 2. Sampled output at tau = 1 has the vanilla conditional distribution.
Outcome distributional_losslessness() {
  const Matrix t = {{0.9, 0.1}, {0.1, 0.9}};
  const MarkovOracle oracle(t, 4);
  const SamplingConfig plain{1.0, 1.0};
  RandomStream a(2001), b(2002);
  const auto van = vanilla_decode(oracle, std::vector<TokenId>{0}, 100000, plain, a);
  // A single rank-0 path, so that passes end in rejections as well.
  const auto spec = speculative_decode(oracle, std::vector<TokenId>{0}, 100000,
                                       DraftTreeTopology::chain(4), {1}, plain, b);
  const auto eq = equivalence_test(van.tokens, spec.tokens, 1);
  return {eq.pass && eq.statistic < 0.02,
          fmt("max TV %.4f", eq.statistic) + " over " + std::to_string(eq.contexts) +
              " contexts, spec mean accepted " + fmt("%.3f", spec.mean_accepted())};
}

// 3. The greedy sparse tree attains the exhaustive optimum.
Outcome greedy_tree_optimality() {
  const auto start = Clock::now();
  RandomStream gen(3001);
  int cases = 0, failures = 0;
  for (int heads = 1; heads <= 3; ++heads) {
    for (int k = 1; k <= 3; ++k) {
      for (int trial = 0; trial < 50; ++trial) {
        const auto table = testutil::random_table(heads, k, gen);
        const std::size_t max_budget = std::min<std::size_t>(10, full_tree_size(heads, k));
        const auto best = testutil::exhaustive_best_objective(table, heads, k, max_budget);
        for (std::size_t b = 1; b <= max_budget; ++b) {
          const auto tree = build_sparse_tree(table, b, heads, k).topology;
          ++cases;
          failures += testutil::summed_path_probability(tree, table) != best[b];
        }
      }
    }
  }
  const double t = seconds_since(start);
  return {failures == 0 && t < 30.0, std::to_string(failures) + " of " + std::to_string(cases) +
                                         " (K, k, budget, table) cases differ, " +
                                         fmt("%.2fs", t)};
}

// 4. Predicted acceptance length matches measured passes. The oracles are
// memoryless (every row equal), for which the per-(head, rank) acceptance
// rates are exact: every head's rank-j candidate is the j-th most likely
// token and is accepted with its probability, independently per level.
Outcome acceptance_length_prediction() {
  RandomStream gen(4001);
  int failures = 0;
  double worst_z = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t v = 3 + gen.below(10);
    const Matrix t = testutil::memoryless_transition(v, gen, 1.0 + 2.0 * gen.uniform());
    const MarkovOracle oracle(t, 4);
    const int k = static_cast<int>(std::min<std::size_t>(v, 4));
    std::vector<double> sorted = t[0];
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    sorted.resize(static_cast<std::size_t>(k));
    const CalibrationTable table(std::vector<std::vector<double>>(4, sorted), 1);
    const auto tree = build_sparse_tree(table, 2 + gen.below(63), 4, k).topology;
    const double predicted = expected_accept_length(tree, table, 1);

    const SamplingConfig plain{1.0, 1.0};
    RandomStream rng(4100 + trial);
    ModelState state = oracle.prefill(std::vector<TokenId>{0});
    PendingDraft pending = prefill_draft(oracle, state, plain, rng);
    const int passes = 10000;
    double sum = 0.0, sq = 0.0;
    for (int p = 0; p < passes; ++p) {
      const double len = static_cast<double>(
          speculative_pass(oracle, state, pending, tree, {1}, plain, rng).acceptance_length());
      sum += len;
      sq += len * len;
    }
    const double mean = sum / passes;
    const double se = std::sqrt((sq / passes - mean * mean) / passes);
    const double z = std::abs(mean - predicted) / std::max(se, 1e-12);
    worst_z = std::max(worst_z, z);
    failures += z > 3.0;
  }
  return {failures == 0, std::to_string(failures) + " of 10 oracles outside 3 SE, worst " +
                             fmt("%.2f SE", worst_z)};
}

double mean_accepted_over_passes(const Model& model, const DraftTreeTopology& tree, int tau,
                                 std::uint64_t seed, int passes) {
  const SamplingConfig plain{1.0, 1.0};
  RandomStream rng(seed);
  ModelState state = model.prefill(std::vector<TokenId>{0});
  PendingDraft pending = prefill_draft(model, state, plain, rng);
  double sum = 0.0;
  for (int p = 0; p < passes; ++p) {
    sum += static_cast<double>(
        speculative_pass(model, state, pending, tree, {tau}, plain, rng).acceptance_length());
  }
  return sum / passes;
}

// 5. Mean accepted tokens grows with tau.
Outcome tolerance_monotonicity() {
  RandomStream gen(5001);
  const Matrix mid = testutil::random_transition(8, gen, 2.0);
  double h = 0.0;
  for (const auto& row : mid) h += row_entropy(row) / 8.0;
  const MarkovOracle oracle(mid, 4);
  const std::vector<std::vector<TokenId>> corpus{walk_chain(mid, 20000, 0, gen)};
  CalibrationOptions copt;
  copt.branching = 4;
  copt.seed = 5002;
  copt.sampling = {1.0, 1.0};
  const auto table = calibrate(oracle, corpus, copt);
  const auto tree = build_sparse_tree(table, 64, 4, 4).topology;

  std::vector<double> m;
  for (int tau = 1; tau <= 4; ++tau) m.push_back(mean_accepted_over_passes(oracle, tree, tau, 5003, 10000));
  bool monotone = true;
  for (std::size_t i = 1; i < m.size(); ++i) monotone = monotone && m[i] >= m[i - 1];

  const MarkovOracle flat(MarkovOracle::uniform_transition(8), 4);
  const auto flat_tree = full_tree(3, 4);
  const double f1 = mean_accepted_over_passes(flat, flat_tree, 1, 5004, 10000);
  const double f4 = mean_accepted_over_passes(flat, flat_tree, 4, 5004, 10000);

  std::ostringstream d;
  d.precision(4);
  d << "mid-entropy (H=" << h << ") tau 1..4: " << m[0] << ' ' << m[1] << ' ' << m[2] << ' '
    << m[3] << "; uniform V=8: " << f1 << " -> " << f4;
  return {monotone && f4 - f1 >= 0.1, d.str()};
}

// 6. Wall-clock and pass-count speedup on a near-deterministic chain whose
// forward cost is dominated by streaming model weights.
Outcome speedup_realization() {
  const auto start = Clock::now();
  const std::size_t v = 16;
  const Matrix t = MarkovOracle::skew_transition(v, 0.95);
  const MarkovOracle oracle(t, 4, {0.0, std::size_t{1} << 19});
  RandomStream gen(6001);
  const std::vector<std::vector<TokenId>> corpus{walk_chain(t, 5000, 0, gen)};
  CalibrationOptions copt;
  copt.branching = 10;
  copt.seed = 6002;
  copt.sampling = {1.0, 1.0};
  const auto table = calibrate(MarkovOracle(t, 4), corpus, copt);
  const auto tree = build_sparse_tree(table, 64, 4, 10).topology;

  std::vector<std::vector<TokenId>> prompts;
  for (TokenId p = 0; p < 4; ++p) prompts.push_back({p});
  const std::vector<BenchCase> grid{{64, tree, 3, {1.0, 1.0}}};
  BenchOptions bopt;
  bopt.tokens = 500;
  bopt.repetitions = 3;
  bopt.seed = 6003;
  bopt.quality_oracle = &oracle;
  const BenchRow row = run_benchmark(oracle, "skew0.95", prompts, grid, bopt).rows[0];
  const double secs = seconds_since(start);
  std::ostringstream d;
  d.precision(4);
  d << "wall-clock " << row.speedup << "x, pass-count " << row.pass_count_speedup
    << "x, mean accepted " << row.mean_accepted << ", " << secs << "s";
  return {row.speedup >= 2.0 && row.pass_count_speedup >= 3.5 && secs < 120.0, d.str()};
}

// 7. Analytic gradients agree with central differences.
Outcome gradient_correctness() {
  RandomStream rng(7001);
  const WindowedARModel model({4, 8, 8, 32, 4}, rng);
  const Matrix t = testutil::random_transition(4, rng);
  const auto batch = make_examples(walk_chain(t, 40, 0, rng), 8, 4);
  const double err = gradient_check(model, batch, TrainConfig{}, 1e-4,
                                    WindowedARModel::parameter_count(model.dims()));
  return {err < 1e-4, fmt("max relative error %.3g over ", err) +
                          std::to_string(WindowedARModel::parameter_count(model.dims())) +
                          " parameters"};
}

// 8. Trained per-head cross-entropy approaches the chain's conditional
// entropies; wot training keeps the base bit-identical.
Outcome training_sanity() {
  RandomStream gen(8001);
  const Matrix t = testutil::random_transition(4, gen, 2.0);
  const MarkovOracle chain(t, 4);
  const auto pi = chain.stationary();
  const Matrix t5 = matrix_power(t, 5);
  double h0 = 0.0, h4 = 0.0;
  for (std::size_t s = 0; s < 4; ++s) {
    h0 += pi[s] * row_entropy(t[s]);
    h4 += pi[s] * row_entropy(t5[s]);
  }
  const auto train_seq = walk_chain(t, 100000, 0, gen);
  const auto held_seq = walk_chain(t, 20000, 0, gen);
  const auto train_ex = make_examples(train_seq, 8, 4);
  const auto held_ex = make_examples(held_seq, 8, 4);

  RandomStream init(8002);
  WindowedARModel model({4, 8, 8, 32, 4}, init);
  TrainConfig cfg;
  cfg.epochs = 3;
  RandomStream shuffle(8003);
  train(model, train_ex, cfg, shuffle);
  const auto eval = model.evaluate(held_ex, cfg);
  const double r0 = eval.head_ce[0] / h0;
  const double r4 = eval.head_ce[4] / h4;

  const std::vector<double> before(model.parameters().begin(), model.parameters().end());
  TrainConfig wot = cfg;
  wot.mode = TrainMode::kWithoutTuning;
  wot.epochs = 1;
  train(model, train_ex, wot, shuffle);
  const std::size_t base_end = model.head_range(0).second;
  const bool frozen = std::equal(before.begin(), before.begin() + static_cast<std::ptrdiff_t>(base_end),
                                 model.parameters().begin());

  std::ostringstream d;
  d.precision(4);
  d << "head0 CE " << eval.head_ce[0] << " vs H " << h0 << " (ratio " << r0 << "), head4 CE "
    << eval.head_ce[4] << " vs H5 " << h4 << " (ratio " << r4 << "), wot base "
    << (frozen ? "bit-identical" : "changed");
  return {std::abs(r0 - 1.0) <= 0.10 && std::abs(r4 - 1.0) <= 0.25 && frozen, d.str()};
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool well_formed_csv(const std::filesystem::path& path, std::size_t& rows) {
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != BenchmarkReport::kCsvHeader) return false;
  rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 12) return false;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      char* end = nullptr;
      std::strtod(fields[i].c_str(), &end);
      if (end == fields[i].c_str() || *end != '\0') return false;
    }
    ++rows;
  }
  return rows > 0;
}

// 9. The command-line pipeline with default parameters.
Outcome end_to_end_pipeline() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "spectree_acceptance_pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string bin = SPECTREE_CLI_PATH;
  auto p = [&](const char* f) { return (dir / f).string(); };
  const std::string quiet = " > " + p("log.txt") + " 2>&1";
  const std::vector<std::string> steps{
      bin + " gen-corpus --seed 9 --out " + p("corpus.txt"),
      bin + " train --seed 9 --corpus " + p("corpus.txt") + " --out " + p("model.bin"),
      bin + " calibrate --seed 9 --model " + p("model.bin") + " --corpus " + p("corpus.txt") +
          " --out " + p("table.cal"),
      bin + " build-tree --calibration " + p("table.cal") + " --out " + p("tree.txt"),
      bin + " bench --seed 9 --model " + p("model.bin") + " --calibration " + p("table.cal") +
          " --corpus " + p("corpus.txt") + " --out " + p("bench.csv"),
  };
  const auto start = Clock::now();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int code = shell(steps[i] + quiet);
    if (code != 0) {
      return {false, "step " + std::to_string(i + 1) + " exited with " + std::to_string(code)};
    }
  }
  const double secs = seconds_since(start);
  std::size_t rows = 0;
  const bool csv = well_formed_csv(dir / "bench.csv", rows);
  fs::remove_all(dir);
  return {csv && secs < 60.0, std::string(csv ? "well-formed" : "malformed") + " CSV with " +
                                  std::to_string(rows) + " rows, " + fmt("%.2fs", secs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 greedy losslessness", greedy_losslessness},
      {"2 distributional losslessness", distributional_losslessness},
      {"3 greedy-tree optimality", greedy_tree_optimality},
      {"4 acceptance-length prediction", acceptance_length_prediction},
      {"5 tolerance monotonicity", tolerance_monotonicity},
      {"6 speedup realization", speedup_realization},
      {"7 gradient correctness", gradient_correctness},
      {"8 training sanity", training_sanity},
      {"9 end-to-end pipeline", end_to_end_pipeline},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << name << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
