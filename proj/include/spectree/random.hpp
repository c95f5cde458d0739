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

#include <cstdint>
#include <random>

namespace spectree {

// Seeded uniform source with a platform-independent draw sequence.
//
// std::mt19937_64 is bit-specified by the standard; the standard
// distributions are not, so doubles are formed from the top 53 bits
// directly. `position()` counts uniform draws taken so far.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    ++position_;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Uses one draw.
  std::uint64_t below(std::uint64_t n);

  // Advance as if `n` draws were taken.
  void discard(std::uint64_t n) {
    engine_.discard(n);
    position_ += n;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  // Independent child stream keyed by (seed, index).
  RandomStream derive(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace spectree
