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

#include "spectree/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "spectree/errors.hpp"

namespace spectree::io {
namespace {

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  if (!std::filesystem::exists(path)) throw MissingArtifact("missing file: " + path.string());
  std::ifstream in(path, mode);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path,
                       std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError("truncated model file");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

std::string format_double(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

std::size_t parse_size(const std::string& tok, const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw FormatError(std::string("bad ") + what + ": '" + tok + "'");
  }
  return v;
}

double parse_double(const std::string& tok) {
  std::istringstream s(tok);
  double v = 0.0;
  s >> v;
  if (!s || !s.eof()) throw FormatError("bad decimal: '" + tok + "'");
  return v;
}

}  // namespace

std::size_t Corpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  out << "V=" << corpus.vocab << " N=" << corpus.total_tokens() << '\n';
  for (const auto& seq : corpus.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
}

Corpus read_corpus(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("empty corpus file");
  Corpus corpus;
  std::size_t n = 0;
  {
    std::istringstream h(header);
    std::string v_field, n_field;
    h >> v_field >> n_field;
    if (v_field.rfind("V=", 0) != 0 || n_field.rfind("N=", 0) != 0) {
      throw FormatError("corpus header must be 'V=<int> N=<int>'");
    }
    corpus.vocab = parse_size(v_field.substr(2), "vocabulary size");
    n = parse_size(n_field.substr(2), "token count");
  }
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream l(line);
    std::vector<TokenId> seq;
    std::string tok;
    while (l >> tok) {
      const std::size_t t = parse_size(tok, "token");
      if (t >= corpus.vocab) throw FormatError("token " + tok + " outside vocabulary");
      seq.push_back(static_cast<TokenId>(t));
    }
    if (!seq.empty()) corpus.sequences.push_back(std::move(seq));
  }
  if (corpus.total_tokens() != n) {
    throw FormatError("corpus header claims " + std::to_string(n) + " tokens, found " +
                      std::to_string(corpus.total_tokens()));
  }
  return corpus;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  auto out = open_out(path);
  write_corpus(out, corpus);
}

Corpus load_corpus(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_corpus(in);
}

void write_model(std::ostream& out, const WindowedARModel& model) {
  out.write("VDSA", 4);
  put_le<std::uint16_t>(out, kModelFormatVersion);
  const WindowedDims& d = model.dims();
  for (std::uint32_t v : {d.vocab, d.window, d.embed, d.hidden, d.heads}) {
    put_le<std::uint32_t>(out, v);
  }
  for (double p : model.parameters()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p));
}

WindowedARModel read_model(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VDSA", 4) != 0) throw FormatError("not a model file (bad magic)");
  const auto version = get_le<std::uint16_t>(in);
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  WindowedDims d;
  d.vocab = get_le<std::uint32_t>(in);
  d.window = get_le<std::uint32_t>(in);
  d.embed = get_le<std::uint32_t>(in);
  d.hidden = get_le<std::uint32_t>(in);
  d.heads = get_le<std::uint32_t>(in);
  std::vector<double> params(WindowedARModel::parameter_count(d));
  for (double& p : params) p = std::bit_cast<double>(get_le<std::uint64_t>(in));
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in model file");
  return WindowedARModel(d, std::move(params));
}

void save_model(const std::filesystem::path& path, const WindowedARModel& model) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  write_model(out, model);
}

WindowedARModel load_model(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return read_model(in);
}

void write_topology(std::ostream& out, const DraftTreeTopology& t) {
  for (const TreeNode& n : t.nodes()) {
    if (n.is_root()) {
      out << n.id << " - - -\n";
    } else {
      out << n.id << ' ' << n.parent << ' ' << n.head << ' ' << n.rank << '\n';
    }
  }
}

DraftTreeTopology read_topology(std::istream& in) {
  std::vector<TreeNode> nodes;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream l(line);
    std::string id, parent, head, rank;
    if (!(l >> id)) continue;
    if (!(l >> parent >> head >> rank)) throw FormatError("topology line needs 4 fields: " + line);
    TreeNode n;
    n.id = parse_size(id, "node id");
    if (parent == "-") {
      if (head != "-" || rank != "-") throw FormatError("root line must be 'id - - -'");
    } else {
      n.parent = parse_size(parent, "parent id");
      n.head = static_cast<int>(parse_size(head, "head index"));
      n.rank = static_cast<int>(parse_size(rank, "rank"));
    }
    nodes.push_back(n);
  }
  if (nodes.empty()) throw FormatError("empty topology file");
  try {
    return DraftTreeTopology(std::move(nodes));
  } catch (const StructuralError& e) {
    throw FormatError(std::string("invalid topology: ") + e.what());
  }
}

void save_topology(const std::filesystem::path& path, const DraftTreeTopology& t) {
  auto out = open_out(path);
  write_topology(out, t);
}

DraftTreeTopology load_topology(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_topology(in);
}

void write_calibration(std::ostream& out, const CalibrationTable& table) {
  out << table.heads() << ' ' << table.ranks() << ' ' << table.trials() << '\n';
  for (const auto& row : table.rates()) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ' ';
      out << format_double(row[j]);
    }
    out << '\n';
  }
}

CalibrationTable read_calibration(std::istream& in) {
  std::string heads_tok, ranks_tok, trials_tok;
  if (!(in >> heads_tok >> ranks_tok >> trials_tok)) {
    throw FormatError("calibration header must be 'K k trials'");
  }
  const std::size_t heads = parse_size(heads_tok, "K");
  const std::size_t ranks = parse_size(ranks_tok, "k");
  const std::size_t trials = parse_size(trials_tok, "trials");
  if (heads == 0 || ranks == 0) throw FormatError("calibration K and k must be positive");
  std::vector<std::vector<double>> rates(heads, std::vector<double>(ranks));
  for (auto& row : rates) {
    for (double& a : row) {
      std::string tok;
      if (!(in >> tok)) throw FormatError("calibration file has too few values");
      a = parse_double(tok);
    }
  }
  std::string extra;
  if (in >> extra) throw FormatError("calibration file has trailing values");
  try {
    return CalibrationTable(std::move(rates), trials);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid calibration table: ") + e.what());
  }
}

void save_calibration(const std::filesystem::path& path, const CalibrationTable& table) {
  auto out = open_out(path);
  write_calibration(out, table);
}

CalibrationTable load_calibration(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_calibration(in);
}

Matrix parse_transition(const std::string& spec, std::size_t vocab) {
  auto need_vocab = [&] {
    if (vocab < 2) throw ConfigError("transition '" + spec + "' needs a vocabulary size >= 2");
  };
  if (spec == "uniform") {
    need_vocab();
    return MarkovOracle::uniform_transition(vocab);
  }
  if (spec == "identity") {
    need_vocab();
    return MarkovOracle::identity_transition(vocab);
  }
  if (spec.rfind("skew:", 0) == 0) {
    need_vocab();
    double alpha = 0.0;
    try {
      alpha = parse_double(spec.substr(5));
    } catch (const FormatError&) {
      throw ConfigError("malformed transition spec '" + spec + "'");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("skew alpha must lie in [0,1]");
    return MarkovOracle::skew_transition(vocab, alpha);
  }
  if (!std::filesystem::exists(spec)) {
    throw ConfigError("malformed transition spec '" + spec +
                      "' (expected uniform, identity, skew:<alpha>, or a file)");
  }
  auto in = open_in(spec);
  Matrix m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream l(line);
    std::vector<double> row;
    std::string tok;
    while (l >> tok) row.push_back(parse_double(tok));
    if (!row.empty()) m.push_back(std::move(row));
  }
  for (const auto& row : m) {
    if (row.size() != m.size()) throw FormatError("transition file must hold a square matrix");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0 && p <= 1.0)) throw FormatError("transition entry outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw FormatError("transition rows must sum to 1");
  }
  if (vocab != 0 && m.size() != vocab) {
    throw DimensionMismatch("transition file has V=" + std::to_string(m.size()) +
                            " but V=" + std::to_string(vocab) + " was requested");
  }
  return m;
}

void save_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace spectree::io
