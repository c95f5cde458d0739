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
#include <vector>

#include "spectree/model.hpp"
#include "spectree/random.hpp"

namespace spectree {

struct WindowedDims {
  std::uint32_t vocab = 2;
  std::uint32_t window = 8;   // c: context tokens read by the trunk
  std::uint32_t embed = 8;    // d
  std::uint32_t hidden = 32;  // h
  std::uint32_t heads = 4;    // K draft heads

  friend bool operator==(const WindowedDims&, const WindowedDims&) = default;
};

enum class TrainMode { kWithoutTuning, kWithTuning };

struct TrainConfig {
  double lambda = 0.8;
  double learning_rate = 0.05;
  TrainMode mode = TrainMode::kWithTuning;
  double base_weight = 1.0;  // weight on head 0 in kWithTuning mode
  int epochs = 5;
  std::size_t batch_size = 32;

  void validate() const;
  // Loss weight of head i (0 = original head).
  double head_weight(std::size_t head) const;
};

// One training item: up to `window` context tokens (most recent last) and
// the tokens at offsets +1 .. +(K+1).
struct TrainingExample {
  std::vector<TokenId> context;
  std::vector<TokenId> targets;
};

// Every position of `sequence` with a full set of K+1 future targets.
std::vector<TrainingExample> make_examples(std::span<const TokenId> sequence,
                                           std::size_t window, std::size_t heads);

struct StepResult {
  std::vector<double> head_ce;  // mean cross-entropy per head over used items
  double total_loss = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Fixed-window MLP language model with a shared trunk and K+1 linear heads.
//
//   x      = [E[t_{-c+1}], ..., E[t_0]]         (missing slots are zero)
//   z      = W_in x + b_in
//   trunk  = z + silu(W_r z + b_r)
//   head_i = softmax(U_i trunk + u_i),  i = 0..K
//
// Parameters live in one flat vector in the order E, W_in, b_in, W_r, b_r,
// then (U_i, u_i) for i = 0..K.
class WindowedARModel final : public Model {
 public:
  WindowedARModel(WindowedDims dims, RandomStream& init_rng);
  WindowedARModel(WindowedDims dims, std::vector<double> parameters);

  std::size_t vocab_size() const override { return dims_.vocab; }
  std::size_t num_draft_heads() const override { return dims_.heads; }

  const WindowedDims& dims() const { return dims_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  static std::size_t parameter_count(const WindowedDims& dims);
  // [begin, end) of the trunk (E .. b_r) and of head i in the flat vector.
  std::pair<std::size_t, std::size_t> trunk_range() const;
  std::pair<std::size_t, std::size_t> head_range(std::size_t head) const;

  // Total weighted loss and its gradient, averaged over usable items.
  // Gradient entries of parameters frozen by `cfg.mode` are zero.
  StepResult loss_and_gradient(std::span<const TrainingExample> batch, const TrainConfig& cfg,
                               std::vector<double>* gradient) const;

  // Cross-entropy only, no gradient.
  StepResult evaluate(std::span<const TrainingExample> batch, const TrainConfig& cfg) const;

 protected:
  ModelOutput do_forward(const ModelState& state) const override;
  std::vector<ModelOutput> do_tree_forward(const ModelState& state,
                                           std::span<const TokenId> tree_tokens,
                                           const DraftTreeTopology& topology) const override;
  void refresh_cache(ModelState& state, std::size_t appended) const override;

 private:
  struct Activations {
    std::vector<double> x, z, pre, trunk;
  };

  void compute_trunk(std::span<const TokenId> window, Activations& act) const;
  ModelOutput heads_from_trunk(std::span<const double> trunk) const;
  std::vector<double> head_logits(std::size_t head, std::span<const double> trunk) const;

  WindowedDims dims_;
  std::vector<double> params_;
  // Offsets into params_.
  std::size_t off_embed_, off_win_, off_bin_, off_wr_, off_br_, off_heads_;
};

// One gradient-descent update; items lacking K+1 targets are skipped.
StepResult train_step(WindowedARModel& model, std::span<const TrainingExample> batch,
                      const TrainConfig& cfg);

// Epoch loop with per-epoch shuffling. Returns mean per-head CE per epoch.
std::vector<std::vector<double>> train(WindowedARModel& model,
                                       std::span<const TrainingExample> examples,
                                       const TrainConfig& cfg, RandomStream& rng);

// Max relative error between analytic and central-difference gradients of
// the total loss over the trainable parameters. Checks every trainable
// parameter when there are at most `max_params`, otherwise a seeded random
// subsample of that size.
double gradient_check(const WindowedARModel& model, std::span<const TrainingExample> batch,
                      const TrainConfig& cfg, double epsilon, std::size_t max_params = 2000,
                      std::uint64_t seed = 0);

}  // namespace spectree
