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

#include "spectree/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <string>
#include <thread>

#include "spectree/errors.hpp"

namespace spectree {
namespace {

struct WorkUnit {
  std::size_t sequence;
  std::size_t begin;  // first position
  std::size_t end;    // one past the last position
};

using Counts = std::vector<std::vector<std::uint64_t>>;

void run_unit(const Model& model, const std::vector<TokenId>& seq, const WorkUnit& unit,
              const CalibrationOptions& opt, RandomStream rng, Counts& hits) {
  const std::size_t heads = static_cast<std::size_t>(opt.heads);
  const std::size_t k = static_cast<std::size_t>(opt.branching);
  // Outputs at contexts ending at positions begin .. end - 1 + heads.
  ModelState state = model.prefill(std::span(seq).first(unit.begin + 1));
  std::vector<ModelOutput> outs;
  outs.reserve(unit.end - unit.begin + heads);
  const std::size_t last = unit.end - 1 + heads;
  for (std::size_t p = unit.begin;; ++p) {
    outs.push_back(model.forward(state));
    if (p == last) break;
    model.commit(state, std::span(seq).subspan(p + 1, 1));
  }
  for (std::size_t p = unit.begin; p < unit.end; ++p) {
    const ModelOutput& at = outs[p - unit.begin];
    for (std::size_t i = 1; i <= heads; ++i) {
      const TokenId verified = sample(outs[p - unit.begin + i].original, opt.sampling, rng);
      const auto candidates = top_k_tokens(at.drafts[i - 1], k);
      for (std::size_t j = 0; j < k; ++j) {
        if (candidates[j] == verified) {
          ++hits[i - 1][j];
          break;
        }
      }
    }
  }
}

}  // namespace

CalibrationTable calibrate(const Model& model, const std::vector<std::vector<TokenId>>& corpus,
                           const CalibrationOptions& opt) {
  opt.sampling.validate();
  if (opt.heads < 1 || static_cast<std::size_t>(opt.heads) > model.num_draft_heads()) {
    throw DimensionMismatch("calibration K=" + std::to_string(opt.heads) + " but model has " +
                            std::to_string(model.num_draft_heads()) + " draft heads");
  }
  if (opt.branching < 1 || static_cast<std::size_t>(opt.branching) > model.vocab_size()) {
    throw DimensionMismatch("calibration k=" + std::to_string(opt.branching) +
                            " exceeds vocabulary size " + std::to_string(model.vocab_size()));
  }
  const std::size_t heads = static_cast<std::size_t>(opt.heads);
  const std::size_t chunk = std::max<std::size_t>(opt.chunk, 1);

  std::vector<WorkUnit> units;
  std::uint64_t trials = 0;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& seq = corpus[s];
    if (seq.size() <= heads + 1) continue;
    const std::size_t positions = seq.size() - heads;  // p + K <= len - 1
    trials += positions;
    for (std::size_t b = 0; b < positions; b += chunk) {
      units.push_back({s, b, std::min(positions, b + chunk)});
    }
  }
  if (trials < opt.min_trials) {
    throw CalibrationUnderflow("calibration needs " + std::to_string(opt.min_trials) +
                               " trials per head but the corpus yields " + std::to_string(trials) +
                               " (short by " + std::to_string(opt.min_trials - trials) + ")");
  }

  const RandomStream root(opt.seed);
  const unsigned workers = std::clamp<unsigned>(opt.workers, 1, static_cast<unsigned>(units.size()));
  std::vector<Counts> partial(workers, Counts(heads, std::vector<std::uint64_t>(
                                                         static_cast<std::size_t>(opt.branching), 0)));
  std::atomic<std::size_t> next{0};
  auto worker = [&](unsigned w) {
    for (std::size_t u = next++; u < units.size(); u = next++) {
      run_unit(model, corpus[units[u].sequence], units[u], opt, root.derive(u), partial[w]);
    }
  };
  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker, w);
  }

  Counts hits = partial[0];
  for (unsigned w = 1; w < workers; ++w) {
    for (std::size_t i = 0; i < heads; ++i) {
      for (std::size_t j = 0; j < hits[i].size(); ++j) hits[i][j] += partial[w][i][j];
    }
  }
  return CalibrationTable::from_counts(std::move(hits), trials);
}

}  // namespace spectree
