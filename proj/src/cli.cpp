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

#include "spectree/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spectree/bench.hpp"
#include "spectree/calibration.hpp"
#include "spectree/decode.hpp"
#include "spectree/errors.hpp"
#include "spectree/io.hpp"
#include "spectree/markov_oracle.hpp"
#include "spectree/tree.hpp"
#include "spectree/windowed_model.hpp"

namespace spectree::cli {
namespace {

constexpr const char* kSeedEnv = "SPECTREE_SEED";
constexpr const char* kOraclePrefix = "oracle:";

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t vocab = 2;
  std::string model;
  std::string init_model;
  std::string corpus;
  std::string tree;
  std::string calibration;
  std::string transition = "skew:0.9";
  std::string out;
  std::string loss_log;
  std::string plot;
  std::string prompt;
  std::string mode = "wt";
  int heads = 4;
  int branching = 10;
  std::size_t budget = 64;
  std::vector<std::size_t> budgets{64};
  int tau = 3;
  std::vector<int> taus{1, 2, 3, 4};
  double top_p = 0.9;
  double temperature = 1.0;
  std::size_t tokens = 256;
  std::size_t length = 20000;
  std::optional<std::size_t> start;
  int epochs = 3;
  double learning_rate = 0.05;
  double lambda = 0.8;
  std::size_t batch = 32;
  std::uint32_t window = 8;
  std::uint32_t embed = 8;
  std::uint32_t hidden = 32;
  int repetitions = 3;
  std::size_t prompts = 4;
  std::size_t prompt_length = 16;
  unsigned workers = 1;
  double draft_noise = 0.0;
  std::size_t forward_cost = 0;
  bool vanilla = false;
  bool vocab_set = false;  // -V given explicitly; otherwise a corpus may supply V
};

struct LoadedModel {
  std::unique_ptr<Model> model;
  const MarkovOracle* oracle = nullptr;  // set when the model is an oracle
  std::string id;
};

LoadedModel load_any_model(const RunConfig& cfg, std::size_t vocab_hint) {
  if (cfg.model.empty()) throw ConfigError("--model is required");
  LoadedModel lm;
  lm.id = cfg.model;
  if (cfg.model.rfind(kOraclePrefix, 0) == 0) {
    const std::string spec = cfg.model.substr(std::string(kOraclePrefix).size());
    Matrix t = io::parse_transition(spec, vocab_hint);
    MarkovOracle::Options opt;
    opt.draft_noise = cfg.draft_noise;
    opt.forward_cost = cfg.forward_cost;
    auto oracle = std::make_unique<MarkovOracle>(std::move(t), static_cast<std::size_t>(cfg.heads), opt);
    lm.oracle = oracle.get();
    lm.model = std::move(oracle);
  } else {
    lm.model = std::make_unique<WindowedARModel>(io::load_model(cfg.model));
    lm.id = std::filesystem::path(cfg.model).stem().string();
  }
  return lm;
}

void require_seed(const CLI::Option* seed_opt) {
  if (seed_opt->empty()) {
    throw ConfigError(std::string("a seed is required (--seed or ") + kSeedEnv + ")");
  }
}

std::vector<TokenId> parse_tokens(const std::string& text, std::size_t vocab) {
  std::istringstream in(text);
  std::vector<TokenId> out;
  long long t = 0;
  while (in >> t) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw DimensionMismatch("prompt token " + std::to_string(t) + " outside vocabulary " +
                              std::to_string(vocab));
    }
    out.push_back(static_cast<TokenId>(t));
  }
  if (!in.eof()) throw ConfigError("malformed --prompt '" + text + "'");
  return out;
}

void check_vocab(const char* what, std::size_t got, std::size_t want) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + " vocabulary V=" + std::to_string(got) +
                            " does not match model V=" + std::to_string(want));
  }
}

void check_tree_fits(const DraftTreeTopology& tree, const Model& model) {
  if (static_cast<std::size_t>(tree.max_depth()) > model.num_draft_heads()) {
    throw DimensionMismatch("tree depth K=" + std::to_string(tree.max_depth()) +
                            " exceeds model draft heads K=" +
                            std::to_string(model.num_draft_heads()));
  }
  if (tree.branching() > model.vocab_size()) {
    throw DimensionMismatch("tree branching k=" + std::to_string(tree.branching()) +
                            " exceeds model V=" + std::to_string(model.vocab_size()));
  }
}

SamplingConfig sampling_of(const RunConfig& cfg) {
  SamplingConfig s{cfg.top_p, cfg.temperature};
  s.validate();
  return s;
}

int cmd_gen_corpus(const RunConfig& cfg, std::ostream& out) {
  if (cfg.out.empty()) throw ConfigError("--out is required");
  Matrix t = io::parse_transition(cfg.transition, cfg.vocab);
  const MarkovOracle oracle(t, 0);
  const std::size_t v = oracle.vocab_size();
  RandomStream rng(cfg.seed);
  std::vector<TokenId> seq;
  seq.reserve(cfg.length);
  if (cfg.length > 0) {
    if (cfg.start && *cfg.start >= v) throw ConfigError("--start outside vocabulary");
    TokenId s = cfg.start ? static_cast<TokenId>(*cfg.start) : static_cast<TokenId>(rng.below(v));
    seq.push_back(s);
    const auto rows = oracle.marginal(1);
    while (seq.size() < cfg.length) {
      s = draw(rows[s], rng);
      seq.push_back(s);
    }
  }
  io::Corpus corpus{v, {std::move(seq)}};
  io::save_corpus(cfg.out, corpus);
  out << "wrote " << corpus.total_tokens() << " tokens (V=" << v << ") to " << cfg.out << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.corpus.empty() || cfg.out.empty()) throw ConfigError("--corpus and --out are required");
  TrainConfig tc;
  tc.lambda = cfg.lambda;
  tc.learning_rate = cfg.learning_rate;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  if (cfg.mode == "wt") {
    tc.mode = TrainMode::kWithTuning;
  } else if (cfg.mode == "wot") {
    tc.mode = TrainMode::kWithoutTuning;
  } else {
    throw ConfigError("--mode must be wot or wt");
  }
  tc.validate();
  const io::Corpus corpus = io::load_corpus(cfg.corpus);
  RandomStream rng(cfg.seed);
  std::optional<WindowedARModel> model;
  if (!cfg.init_model.empty()) {
    model.emplace(io::load_model(cfg.init_model));
    check_vocab("corpus", corpus.vocab, model->vocab_size());
  } else {
    if (tc.mode == TrainMode::kWithoutTuning) {
      throw ConfigError("--mode wot trains draft heads on a fixed base; pass --init <model>");
    }
    WindowedDims dims{static_cast<std::uint32_t>(corpus.vocab), cfg.window, cfg.embed, cfg.hidden,
                      static_cast<std::uint32_t>(cfg.heads)};
    model.emplace(dims, rng);
  }
  const WindowedDims dims = model->dims();
  std::size_t longest = 0;
  for (const auto& s : corpus.sequences) longest = std::max(longest, s.size());
  if (longest < dims.window + dims.heads + 1) {
    throw ConfigError("corpus sequences must hold at least window + K + 1 = " +
                      std::to_string(dims.window + dims.heads + 1) + " tokens");
  }
  std::vector<TrainingExample> examples;
  for (const auto& s : corpus.sequences) {
    auto ex = make_examples(s, dims.window, dims.heads);
    examples.insert(examples.end(), std::make_move_iterator(ex.begin()),
                    std::make_move_iterator(ex.end()));
  }
  const auto log = train(*model, examples, tc, rng);
  io::save_model(cfg.out, *model);
  std::ostringstream csv;
  csv.precision(10);
  csv << "epoch,head,ce\n";
  for (std::size_t e = 0; e < log.size(); ++e) {
    for (std::size_t h = 0; h < log[e].size(); ++h) csv << e + 1 << ',' << h << ',' << log[e][h] << '\n';
  }
  const std::string log_path = cfg.loss_log.empty() ? cfg.out + ".loss.csv" : cfg.loss_log;
  io::save_text(log_path, csv.str());
  out << "trained " << examples.size() << " windows for " << tc.epochs << " epochs (" << cfg.mode
      << "); model -> " << cfg.out << ", loss log -> " << log_path << '\n';
  if (!log.empty()) {
    out << "final per-head CE:";
    for (double ce : log.back()) out << ' ' << ce;
    out << '\n';
  }
  (void)err;
  return kOk;
}

int cmd_calibrate(const RunConfig& cfg, bool branching_set, std::ostream& out, std::ostream& err) {
  if (cfg.corpus.empty() || cfg.out.empty()) throw ConfigError("--corpus and --out are required");
  const io::Corpus corpus = io::load_corpus(cfg.corpus);
  LoadedModel lm = load_any_model(cfg, cfg.vocab_set ? cfg.vocab : corpus.vocab);
  check_vocab("corpus", corpus.vocab, lm.model->vocab_size());
  CalibrationOptions opt;
  opt.heads = cfg.heads;
  if (static_cast<std::size_t>(opt.heads) > lm.model->num_draft_heads()) {
    throw DimensionMismatch("--heads " + std::to_string(cfg.heads) + " but model has K=" +
                            std::to_string(lm.model->num_draft_heads()));
  }
  opt.branching = cfg.branching;
  if (static_cast<std::size_t>(opt.branching) > lm.model->vocab_size()) {
    if (branching_set) {
      throw DimensionMismatch("--branching " + std::to_string(cfg.branching) +
                              " exceeds vocabulary V=" + std::to_string(lm.model->vocab_size()));
    }
    opt.branching = static_cast<int>(lm.model->vocab_size());
    err << "note: branching clamped to vocabulary size " << opt.branching << '\n';
  }
  opt.sampling = sampling_of(cfg);
  opt.seed = cfg.seed;
  opt.workers = cfg.workers;
  const CalibrationTable table = calibrate(*lm.model, corpus.sequences, opt);
  io::save_calibration(cfg.out, table);
  out << "calibrated K=" << table.heads() << " k=" << table.ranks() << " over " << table.trials()
      << " trials -> " << cfg.out << '\n';
  return kOk;
}

// Explicit --heads/--branching must fit the table; defaults adopt it.
std::pair<int, int> tree_shape(const RunConfig& cfg, const CalibrationTable& table,
                               bool heads_set, bool branching_set) {
  int heads = heads_set ? cfg.heads : table.heads();
  int branching = branching_set ? cfg.branching : table.ranks();
  if (heads > table.heads() || branching > table.ranks()) {
    throw DimensionMismatch("requested K=" + std::to_string(heads) + " k=" +
                            std::to_string(branching) + " but calibration has K=" +
                            std::to_string(table.heads()) + " k=" + std::to_string(table.ranks()));
  }
  return {heads, branching};
}

int cmd_build_tree(const RunConfig& cfg, bool heads_set, bool branching_set, std::ostream& out,
                   std::ostream& err) {
  if (cfg.calibration.empty() || cfg.out.empty()) {
    throw ConfigError("--calibration and --out are required");
  }
  const CalibrationTable table = io::load_calibration(cfg.calibration);
  auto [heads, branching] = tree_shape(cfg, table, heads_set, branching_set);
  const SparseTree tree = build_sparse_tree(table, cfg.budget, heads, branching);
  if (tree.clamped) {
    err << "warning: budget " << cfg.budget << " exceeds the full tree; clamped to "
        << tree.topology.size() << '\n';
  }
  io::save_topology(cfg.out, tree.topology);
  out << "built " << tree.topology.size() << "-node tree (depth " << tree.topology.max_depth()
      << "), expected acceptance " << expected_accept_length(tree.topology, table, 1)
      << " at tau=1 -> " << cfg.out << '\n';
  return kOk;
}

std::vector<TokenId> default_prompt(const RunConfig& cfg, std::size_t vocab) {
  if (!cfg.prompt.empty()) return parse_tokens(cfg.prompt, vocab);
  if (!cfg.corpus.empty()) {
    const io::Corpus corpus = io::load_corpus(cfg.corpus);
    check_vocab("corpus", corpus.vocab, vocab);
    if (!corpus.sequences.empty()) {
      const auto& s = corpus.sequences.front();
      const std::size_t n = std::min(s.size(), std::max<std::size_t>(cfg.prompt_length, 1));
      return {s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n)};
    }
  }
  return {0};
}

int cmd_decode(const RunConfig& cfg, std::ostream& out) {
  LoadedModel lm = load_any_model(cfg, cfg.vocab);
  const SamplingConfig sampling = sampling_of(cfg);
  std::optional<DraftTreeTopology> tree;
  if (!cfg.vanilla) {
    if (cfg.tree.empty()) throw ConfigError("--tree is required (or pass --vanilla)");
    tree = io::load_topology(cfg.tree);
    check_tree_fits(*tree, *lm.model);
  }
  const auto prompt = default_prompt(cfg, lm.model->vocab_size());
  RandomStream rng(cfg.seed);
  const DecodeRun run = cfg.vanilla
                            ? vanilla_decode(*lm.model, prompt, cfg.tokens, sampling, rng)
                            : speculative_decode(*lm.model, prompt, cfg.tokens, *tree,
                                                 ToleranceConfig{cfg.tau}, sampling, rng);
  std::ostringstream toks;
  for (std::size_t i = 0; i < run.tokens.size(); ++i) toks << (i ? " " : "") << run.tokens[i];
  out << toks.str() << '\n';
  out << "tokens=" << run.tokens.size() << " forwards=" << run.forwards
      << " passes=" << run.passes() << " mean_accepted=" << run.mean_accepted()
      << " tokens_per_forward="
      << static_cast<double>(run.tokens.size()) / static_cast<double>(run.forwards) << '\n';
  if (!cfg.out.empty()) io::save_text(cfg.out, toks.str() + "\n");
  return kOk;
}

int cmd_bench(const RunConfig& cfg, bool heads_set, bool branching_set, std::ostream& out,
              std::ostream& err) {
  if (cfg.calibration.empty() || cfg.out.empty()) {
    throw ConfigError("--calibration and --out are required");
  }
  if (cfg.taus.empty() || cfg.budgets.empty()) throw ConfigError("benchmark grid is empty");
  const CalibrationTable table = io::load_calibration(cfg.calibration);
  std::optional<io::Corpus> corpus;
  if (!cfg.corpus.empty()) corpus = io::load_corpus(cfg.corpus);
  LoadedModel lm = load_any_model(cfg, corpus && !cfg.vocab_set ? corpus->vocab : cfg.vocab);
  const std::size_t v = lm.model->vocab_size();
  if (corpus) check_vocab("corpus", corpus->vocab, v);
  auto [heads, branching] = tree_shape(cfg, table, heads_set, branching_set);
  if (static_cast<std::size_t>(heads) > lm.model->num_draft_heads()) {
    throw DimensionMismatch("calibration K=" + std::to_string(heads) + " exceeds model K=" +
                            std::to_string(lm.model->num_draft_heads()));
  }
  if (static_cast<std::size_t>(branching) > v) {
    throw DimensionMismatch("calibration k=" + std::to_string(branching) + " exceeds model V=" +
                            std::to_string(v));
  }
  std::unique_ptr<MarkovOracle> truth;
  const MarkovOracle* quality = lm.oracle;
  if (!quality && !cfg.transition.empty()) {
    truth = std::make_unique<MarkovOracle>(io::parse_transition(cfg.transition, v), 0);
    check_vocab("transition", truth->vocab_size(), v);
    quality = truth.get();
  }

  std::vector<std::vector<TokenId>> prompts;
  const std::size_t plen = std::max<std::size_t>(cfg.prompt_length, 1);
  for (std::size_t i = 0; i < std::max<std::size_t>(cfg.prompts, 1); ++i) {
    if (corpus && !corpus->sequences.empty() && corpus->sequences.front().size() >= plen) {
      const auto& s = corpus->sequences.front();
      const std::size_t span = s.size() - plen + 1;
      const std::size_t off = (i * span) / std::max<std::size_t>(cfg.prompts, 1);
      prompts.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(off),
                           s.begin() + static_cast<std::ptrdiff_t>(off + plen));
    } else {
      prompts.push_back({static_cast<TokenId>(i % v)});
    }
  }

  const SamplingConfig sampling = sampling_of(cfg);
  std::vector<BenchCase> grid;
  for (std::size_t budget : cfg.budgets) {
    const SparseTree tree = build_sparse_tree(table, budget, heads, branching);
    if (tree.clamped) err << "warning: budget " << budget << " clamped to the full tree\n";
    for (int tau : cfg.taus) grid.push_back({budget, tree.topology, tau, sampling});
  }
  BenchOptions opt;
  opt.tokens = cfg.tokens;
  opt.repetitions = cfg.repetitions;
  opt.seed = cfg.seed;
  opt.quality_oracle = quality;
  const BenchmarkReport report = run_benchmark(*lm.model, lm.id, prompts, grid, opt);
  io::save_text(cfg.out, report.to_csv());
  const std::string plot = cfg.plot.empty() ? cfg.out + ".plot.tsv" : cfg.plot;
  io::save_text(plot, report.plot_data());
  out << report.to_csv();
  out << "reference (real TTS system, 4 heads, tau=3, 64 candidates): speedup 2.94x, "
         "mean accepted 3.87\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tree-based speculative decoding with tolerance verification"};
  app.set_config("--config", "", "file of key=value lines; flags override it");
  app.require_subcommand(1);
  RunConfig cfg;

  auto* seed_opt = app.add_option("--seed", cfg.seed, "RNG seed")->envname(kSeedEnv);
  auto* vocab_opt = app.add_option("--vocab,-V", cfg.vocab, "vocabulary size for named transitions");
  app.add_option("--model", cfg.model, "model file, or oracle:<transition>");
  app.add_option("--init", cfg.init_model, "base model to continue training from");
  app.add_option("--corpus", cfg.corpus, "corpus file");
  app.add_option("--tree", cfg.tree, "topology file");
  app.add_option("--calibration", cfg.calibration, "calibration file");
  app.add_option("--transition", cfg.transition, "uniform | identity | skew:<a> | <file>");
  app.add_option("--out,-o", cfg.out, "output path");
  app.add_option("--loss-log", cfg.loss_log, "training loss CSV (default <out>.loss.csv)");
  app.add_option("--plot", cfg.plot, "plot data file (default <out>.plot.tsv)");
  app.add_option("--prompt", cfg.prompt, "prompt tokens, space separated");
  app.add_option("--mode", cfg.mode, "wt (tune base) or wot (frozen base)");
  auto* heads_opt = app.add_option("--heads,-K", cfg.heads, "draft heads")->check(CLI::PositiveNumber);
  auto* branching_opt =
      app.add_option("--branching,-k", cfg.branching, "top-k per head")->check(CLI::PositiveNumber);
  app.add_option("--budget", cfg.budget, "tree nodes including the root")->check(CLI::PositiveNumber);
  app.add_option("--budgets", cfg.budgets, "benchmark budgets")->delimiter(',');
  app.add_option("--tau", cfg.tau, "verification tolerance")->check(CLI::PositiveNumber);
  app.add_option("--taus", cfg.taus, "benchmark tolerances")->delimiter(',');
  app.add_option("--top-p", cfg.top_p, "nucleus threshold");
  app.add_option("--temperature", cfg.temperature, "sampling temperature (0 = greedy)");
  app.add_option("--tokens,-n", cfg.tokens, "tokens to decode")->check(CLI::PositiveNumber);
  app.add_option("--length", cfg.length, "corpus length");
  app.add_option("--start", cfg.start, "first corpus token");
  app.add_option("--epochs", cfg.epochs, "training epochs");
  app.add_option("--lr", cfg.learning_rate, "learning rate");
  app.add_option("--lambda", cfg.lambda, "draft-head loss decay");
  app.add_option("--batch", cfg.batch, "training batch size");
  app.add_option("--window", cfg.window, "model context window");
  app.add_option("--embed", cfg.embed, "embedding width");
  app.add_option("--hidden", cfg.hidden, "trunk width");
  app.add_option("--reps", cfg.repetitions, "benchmark repetitions");
  app.add_option("--prompts", cfg.prompts, "benchmark prompt count");
  app.add_option("--prompt-length", cfg.prompt_length, "tokens per prompt");
  app.add_option("--workers", cfg.workers, "calibration threads");
  app.add_option("--draft-noise", cfg.draft_noise, "oracle draft-head uniform mixing weight");
  app.add_option("--forward-cost", cfg.forward_cost, "oracle synthetic weights per forward");
  app.add_flag("--vanilla", cfg.vanilla, "decode without speculation");

  auto* gen = app.add_subcommand("gen-corpus", "sample a Markov-chain token corpus");
  auto* trn = app.add_subcommand("train", "train the windowed model and its draft heads");
  auto* cal = app.add_subcommand("calibrate", "estimate per-(head, rank) acceptance rates");
  auto* bld = app.add_subcommand("build-tree", "greedy sparse tree from a calibration table");
  auto* dec = app.add_subcommand("decode", "decode tokens and print statistics");
  auto* bch = app.add_subcommand("bench", "benchmark vanilla vs speculative decoding");
  for (auto* sub : {gen, trn, cal, bld, dec, bch}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  cfg.vocab_set = !vocab_opt->empty();
  try {
    if (!bld->parsed()) require_seed(seed_opt);
    if (gen->parsed()) return cmd_gen_corpus(cfg, out);
    if (trn->parsed()) return cmd_train(cfg, out, err);
    if (cal->parsed()) return cmd_calibrate(cfg, !branching_opt->empty(), out, err);
    if (bld->parsed()) {
      return cmd_build_tree(cfg, !heads_opt->empty(), !branching_opt->empty(), out, err);
    }
    if (dec->parsed()) return cmd_decode(cfg, out);
    if (bch->parsed()) return cmd_bench(cfg, !heads_opt->empty(), !branching_opt->empty(), out, err);
  } catch (const DimensionMismatch& e) {
    err << "dimension mismatch: " << e.what() << '\n';
    return kDimensionMismatch;
  } catch (const MissingArtifact& e) {
    err << "missing artifact: " << e.what() << '\n';
    return kMissingArtifact;
  } catch (const CalibrationUnderflow& e) {
    err << "calibration underflow: " << e.what() << '\n';
    return kCalibrationUnderflow;
  } catch (const ConfigError& e) {
    err << "usage: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace spectree::cli
