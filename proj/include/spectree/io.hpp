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
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "spectree/core.hpp"
#include "spectree/markov_oracle.hpp"
#include "spectree/tree.hpp"
#include "spectree/windowed_model.hpp"

namespace spectree::io {

// Token corpus: header line "V=<int> N=<int>", then one line of
// whitespace-separated decimal ids per sequence. N counts all tokens.
struct Corpus {
  std::size_t vocab = 0;
  std::vector<std::vector<TokenId>> sequences;

  std::size_t total_tokens() const;
};

void write_corpus(std::ostream& out, const Corpus& corpus);
Corpus read_corpus(std::istream& in);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& path);

// Binary model file: "VDSA", u16 version, u32 V c d h K, then f64
// parameters, all little-endian.
inline constexpr std::uint16_t kModelFormatVersion = 1;
void write_model(std::ostream& out, const WindowedARModel& model);
WindowedARModel read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const WindowedARModel& model);
WindowedARModel load_model(const std::filesystem::path& path);

// Topology text: one "id parent head rank" line per node, root "0 - - -".
void write_topology(std::ostream& out, const DraftTreeTopology& topology);
DraftTreeTopology read_topology(std::istream& in);
void save_topology(const std::filesystem::path& path, const DraftTreeTopology& topology);
DraftTreeTopology load_topology(const std::filesystem::path& path);

// Calibration text: "K k trials", then K lines of k decimals.
void write_calibration(std::ostream& out, const CalibrationTable& table);
CalibrationTable read_calibration(std::istream& in);
void save_calibration(const std::filesystem::path& path, const CalibrationTable& table);
CalibrationTable load_calibration(const std::filesystem::path& path);

// "uniform", "identity", "skew:<alpha>", or a path to a file of V rows of
// V decimals. `vocab` is required for the named forms and checked against
// the file otherwise (0 accepts the file's size).
Matrix parse_transition(const std::string& spec, std::size_t vocab);

void save_text(const std::filesystem::path& path, const std::string& text);

}  // namespace spectree::io
