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
#include <vector>

#include "spectree/core.hpp"
#include "spectree/model.hpp"
#include "spectree/tree.hpp"

namespace spectree {

struct CalibrationOptions {
  int heads = 4;
  int branching = 10;
  SamplingConfig sampling;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::uint64_t min_trials = 1000;
  // Positions per work unit. Each unit draws from its own stream derived
  // from (seed, unit index), so results do not depend on `workers`.
  std::size_t chunk = 4096;
};

// Estimates a[i][j]: at every corpus position p, the rank-j candidate of
// draft head i is compared against one sample from the original head at
// the context ending at p + i (the node that would verify it).
//
// Throws CalibrationUnderflow when fewer than `min_trials` positions are
// available per head.
CalibrationTable calibrate(const Model& model, const std::vector<std::vector<TokenId>>& corpus,
                           const CalibrationOptions& options);

}  // namespace spectree
