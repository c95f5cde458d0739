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

#include "spectree/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "spectree/errors.hpp"

namespace spectree {
namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double seconds(std::chrono::nanoseconds d) { return std::chrono::duration<double>(d).count(); }

}  // namespace

double pass_count_speedup(const DecodeRun& vanilla, const DecodeRun& speculative) {
  if (vanilla.tokens.size() != speculative.tokens.size()) {
    throw ComparisonError("runs emitted different token counts");
  }
  if (vanilla.forwards == 0 || speculative.forwards == 0) {
    throw ComparisonError("run recorded no forwards");
  }
  const double n = static_cast<double>(vanilla.tokens.size());
  return (n / static_cast<double>(speculative.forwards)) /
         (n / static_cast<double>(vanilla.forwards));
}

double nll_quality(const MarkovOracle& oracle, std::span<const TokenId> tokens) {
  if (tokens.size() < 2) throw PreconditionError("nll needs at least 2 tokens");
  double sum = 0.0;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    sum -= std::log(oracle.probability(tokens[i - 1], tokens[i]));
  }
  return sum / static_cast<double>(tokens.size() - 1);
}

EquivalenceResult equivalence_test(std::span<const TokenId> a, std::span<const TokenId> b,
                                   std::size_t order, const EquivalenceOptions& opt) {
  if (a.size() < opt.min_length || b.size() < opt.min_length) {
    throw SampleSizeError("equivalence test needs " + std::to_string(opt.min_length) +
                          " tokens per sequence, got " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()));
  }
  using Context = std::vector<TokenId>;
  using Table = std::map<Context, std::map<TokenId, std::size_t>>;
  auto tabulate = [order](std::span<const TokenId> s) {
    Table table;
    for (std::size_t i = order; i < s.size(); ++i) {
      Context ctx(s.begin() + static_cast<std::ptrdiff_t>(i - order),
                  s.begin() + static_cast<std::ptrdiff_t>(i));
      ++table[ctx][s[i]];
    }
    return table;
  };
  auto total = [](const std::map<TokenId, std::size_t>& row) {
    std::size_t n = 0;
    for (auto& [t, c] : row) n += c;
    return n;
  };
  const Table ta = tabulate(a);
  const Table tb = tabulate(b);
  EquivalenceResult result;
  std::map<Context, int> all;
  for (auto& [ctx, row] : ta) all[ctx] = 0;
  for (auto& [ctx, row] : tb) all[ctx] = 0;
  for (auto& [ctx, unused] : all) {
    auto ia = ta.find(ctx);
    auto ib = tb.find(ctx);
    const std::size_t na = ia == ta.end() ? 0 : total(ia->second);
    const std::size_t nb = ib == tb.end() ? 0 : total(ib->second);
    double tv = 0.0;
    if (na == 0 || nb == 0) {
      if (std::max(na, nb) < opt.min_context_count) continue;
      tv = 1.0;
    } else if (na < opt.min_context_count || nb < opt.min_context_count) {
      continue;
    } else {
      std::map<TokenId, std::pair<double, double>> freq;
      for (auto& [t, c] : ia->second) freq[t].first = static_cast<double>(c) / static_cast<double>(na);
      for (auto& [t, c] : ib->second) freq[t].second = static_cast<double>(c) / static_cast<double>(nb);
      for (auto& [t, f] : freq) tv += std::abs(f.first - f.second);
      tv *= 0.5;
    }
    ++result.contexts;
    result.statistic = std::max(result.statistic, tv);
  }
  result.pass = result.statistic < opt.threshold;
  return result;
}

BenchmarkReport run_benchmark(const Model& model, const std::string& model_id,
                              const std::vector<std::vector<TokenId>>& prompts,
                              std::span<const BenchCase> grid, const BenchOptions& opt) {
  if (grid.empty()) throw ConfigError("benchmark grid is empty");
  if (prompts.empty()) throw ConfigError("benchmark needs at least one prompt");
  if (opt.repetitions < 3) throw ConfigError("benchmark needs at least 3 repetitions");
  BenchmarkReport report;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const BenchCase& bc = grid[c];
    const RandomStream case_stream(mix_seed(opt.seed, c));
    const ToleranceConfig tol{bc.tau};
    std::vector<double> tps_vanilla, tps_spec;
    std::vector<DecodeRun> vanilla_runs, spec_runs;
    for (int rep = 0; rep < opt.repetitions; ++rep) {
      vanilla_runs.clear();
      spec_runs.clear();
      std::chrono::nanoseconds t_vanilla{0}, t_spec{0};
      std::size_t emitted = 0;
      for (std::size_t i = 0; i < prompts.size(); ++i) {
        RandomStream rv = case_stream.derive(2 * i);
        vanilla_runs.push_back(vanilla_decode(model, prompts[i], opt.tokens, bc.sampling, rv));
        t_vanilla += vanilla_runs.back().duration;
        RandomStream rs = case_stream.derive(2 * i + 1);
        spec_runs.push_back(
            speculative_decode(model, prompts[i], opt.tokens, bc.tree, tol, bc.sampling, rs));
        t_spec += spec_runs.back().duration;
        emitted += opt.tokens;
      }
      tps_vanilla.push_back(static_cast<double>(emitted) / seconds(t_vanilla));
      tps_spec.push_back(static_cast<double>(emitted) / seconds(t_spec));
    }

    BenchRow row;
    row.model = model_id;
    row.budget = bc.budget;
    row.heads = static_cast<std::size_t>(bc.tree.max_depth());
    row.tau = bc.tau;
    row.temperature = bc.sampling.temperature;
    row.top_p = bc.sampling.top_p;
    row.tps_vanilla = median(tps_vanilla);
    row.tps_spec = median(tps_spec);
    row.speedup = row.tps_spec / row.tps_vanilla;
    double accepted = 0.0;
    std::size_t fw_vanilla = 0, fw_spec = 0;
    double nll = 0.0;
    for (std::size_t i = 0; i < spec_runs.size(); ++i) {
      for (std::size_t len : spec_runs[i].acceptance_lengths) accepted += static_cast<double>(len);
      row.passes += spec_runs[i].passes();
      fw_vanilla += vanilla_runs[i].forwards;
      fw_spec += spec_runs[i].forwards;
      if (opt.quality_oracle) {
        std::vector<TokenId> seq{prompts[i].back()};
        seq.insert(seq.end(), spec_runs[i].tokens.begin(), spec_runs[i].tokens.end());
        nll += nll_quality(*opt.quality_oracle, seq);
      }
    }
    row.mean_accepted = accepted / static_cast<double>(row.passes);
    row.pass_count_speedup = static_cast<double>(fw_vanilla) / static_cast<double>(fw_spec);
    row.nll = opt.quality_oracle ? nll / static_cast<double>(spec_runs.size())
                                 : std::numeric_limits<double>::quiet_NaN();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string BenchmarkReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.model << ',' << r.budget << ',' << r.heads << ',' << r.tau << ',' << r.temperature
        << ',' << r.top_p << ',' << r.tps_vanilla << ',' << r.tps_spec << ',' << r.speedup << ','
        << r.mean_accepted << ',' << r.passes << ',';
    if (std::isnan(r.nll)) {
      out << "nan";
    } else {
      out << r.nll;
    }
    out << '\n';
  }
  return out.str();
}

std::string BenchmarkReport::plot_data() const {
  std::ostringstream out;
  out.precision(10);
  auto block = [&](const std::string& title, const std::vector<std::pair<double, double>>& pts) {
    out << "# " << title << '\n';
    for (auto [x, y] : pts) out << x << '\t' << y << '\n';
    out << "\n\n";
  };
  // Grouped by (model, heads, tau, temperature, top_p) for the budget sweep.
  using Key = std::tuple<std::string, std::size_t, int, double, double>;
  std::map<Key, std::vector<const BenchRow*>> by_tau;
  using Key2 = std::tuple<std::string, std::size_t, std::size_t, double, double>;
  std::map<Key2, std::vector<const BenchRow*>> by_budget;
  for (const auto& r : rows) {
    by_tau[{r.model, r.heads, r.tau, r.temperature, r.top_p}].push_back(&r);
    by_budget[{r.model, r.heads, r.budget, r.temperature, r.top_p}].push_back(&r);
  }
  for (auto& [key, group] : by_tau) {
    std::sort(group.begin(), group.end(),
              [](const BenchRow* a, const BenchRow* b) { return a->budget < b->budget; });
    const std::string tag = std::get<0>(key) + " heads=" + std::to_string(std::get<1>(key)) +
                            " tau=" + std::to_string(std::get<2>(key));
    std::vector<std::pair<double, double>> s, m;
    for (const BenchRow* r : group) {
      s.emplace_back(static_cast<double>(r->budget), r->speedup);
      m.emplace_back(static_cast<double>(r->budget), r->mean_accepted);
    }
    block("speedup vs candidates, " + tag, s);
    block("mean_accepted vs candidates, " + tag, m);
  }
  for (auto& [key, group] : by_budget) {
    std::sort(group.begin(), group.end(),
              [](const BenchRow* a, const BenchRow* b) { return a->tau < b->tau; });
    const std::string tag = std::get<0>(key) + " heads=" + std::to_string(std::get<1>(key)) +
                            " budget=" + std::to_string(std::get<2>(key));
    std::vector<std::pair<double, double>> s, m;
    for (const BenchRow* r : group) {
      s.emplace_back(static_cast<double>(r->tau), r->speedup);
      m.emplace_back(static_cast<double>(r->tau), r->mean_accepted);
    }
    block("speedup vs tau, " + tag, s);
    block("mean_accepted vs tau, " + tag, m);
  }
  return out.str();
}

}  // namespace spectree
