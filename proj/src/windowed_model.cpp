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

#include "spectree/windowed_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spectree/errors.hpp"

namespace spectree {
namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

void softmax_inplace(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(base_weight >= 0.0)) throw ConfigError("base weight must be >= 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

double TrainConfig::head_weight(std::size_t head) const {
  if (head == 0) return mode == TrainMode::kWithTuning ? base_weight : 0.0;
  return std::pow(lambda, static_cast<double>(head));
}

std::vector<TrainingExample> make_examples(std::span<const TokenId> sequence,
                                           std::size_t window, std::size_t heads) {
  std::vector<TrainingExample> out;
  const std::size_t horizon = heads + 1;
  if (sequence.size() <= horizon) return out;
  for (std::size_t p = 0; p + horizon < sequence.size(); ++p) {
    const std::size_t begin = p + 1 >= window ? p + 1 - window : 0;
    TrainingExample ex;
    ex.context.assign(sequence.begin() + static_cast<std::ptrdiff_t>(begin),
                      sequence.begin() + static_cast<std::ptrdiff_t>(p + 1));
    ex.targets.assign(sequence.begin() + static_cast<std::ptrdiff_t>(p + 1),
                      sequence.begin() + static_cast<std::ptrdiff_t>(p + 1 + horizon));
    out.push_back(std::move(ex));
  }
  return out;
}

std::size_t WindowedARModel::parameter_count(const WindowedDims& d) {
  const std::size_t v = d.vocab, c = d.window, e = d.embed, h = d.hidden;
  return v * e + h * c * e + h + h * h + h + (d.heads + 1) * (v * h + v);
}

WindowedARModel::WindowedARModel(WindowedDims dims, std::vector<double> parameters)
    : dims_(dims), params_(std::move(parameters)) {
  if (dims_.vocab < 2 || dims_.window < 1 || dims_.embed < 1 || dims_.hidden < 1) {
    throw PreconditionError("windowed model dimensions must be positive (V >= 2)");
  }
  if (params_.size() != parameter_count(dims_)) {
    throw StructuralError("expected " + std::to_string(parameter_count(dims_)) +
                          " parameters, got " + std::to_string(params_.size()));
  }
  const std::size_t v = dims_.vocab, c = dims_.window, e = dims_.embed, h = dims_.hidden;
  off_embed_ = 0;
  off_win_ = off_embed_ + v * e;
  off_bin_ = off_win_ + h * c * e;
  off_wr_ = off_bin_ + h;
  off_br_ = off_wr_ + h * h;
  off_heads_ = off_br_ + h;
}

WindowedARModel::WindowedARModel(WindowedDims dims, RandomStream& init_rng)
    : WindowedARModel(dims, std::vector<double>(parameter_count(dims), 0.0)) {
  const std::size_t v = dims_.vocab, c = dims_.window, e = dims_.embed, h = dims_.hidden;
  auto fill = [&](std::size_t begin, std::size_t count, double scale) {
    for (std::size_t i = 0; i < count; ++i) {
      params_[begin + i] = (2.0 * init_rng.uniform() - 1.0) * scale;
    }
  };
  fill(off_embed_, v * e, 1.0);
  fill(off_win_, h * c * e, std::sqrt(3.0 / static_cast<double>(c * e)));
  fill(off_wr_, h * h, 0.5 * std::sqrt(3.0 / static_cast<double>(h)));
  for (std::size_t i = 0; i <= dims_.heads; ++i) {
    fill(head_range(i).first, v * h, std::sqrt(3.0 / static_cast<double>(h)));
  }
}

std::pair<std::size_t, std::size_t> WindowedARModel::trunk_range() const {
  return {0, off_heads_};
}

std::pair<std::size_t, std::size_t> WindowedARModel::head_range(std::size_t head) const {
  const std::size_t per = static_cast<std::size_t>(dims_.vocab) * dims_.hidden + dims_.vocab;
  return {off_heads_ + head * per, off_heads_ + (head + 1) * per};
}

void WindowedARModel::compute_trunk(std::span<const TokenId> window, Activations& act) const {
  const std::size_t c = dims_.window, e = dims_.embed, h = dims_.hidden;
  act.x.assign(c * e, 0.0);
  // Right-align: the most recent token fills the last slot.
  const std::size_t n = std::min(window.size(), c);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId t = window[window.size() - n + i];
    const std::size_t slot = c - n + i;
    std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(off_embed_ + t * e), e,
                act.x.begin() + static_cast<std::ptrdiff_t>(slot * e));
  }
  act.z.assign(h, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const double* w = &params_[off_win_ + r * c * e];
    double s = params_[off_bin_ + r];
    for (std::size_t j = 0; j < c * e; ++j) s += w[j] * act.x[j];
    act.z[r] = s;
  }
  act.pre.assign(h, 0.0);
  act.trunk.assign(h, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const double* w = &params_[off_wr_ + r * h];
    double s = params_[off_br_ + r];
    for (std::size_t j = 0; j < h; ++j) s += w[j] * act.z[j];
    act.pre[r] = s;
    act.trunk[r] = act.z[r] + s * sigmoid(s);
  }
}

std::vector<double> WindowedARModel::head_logits(std::size_t head,
                                                 std::span<const double> trunk) const {
  const std::size_t v = dims_.vocab, h = dims_.hidden;
  const std::size_t base = head_range(head).first;
  std::vector<double> logits(v);
  for (std::size_t o = 0; o < v; ++o) {
    const double* w = &params_[base + o * h];
    double s = params_[base + v * h + o];
    for (std::size_t j = 0; j < h; ++j) s += w[j] * trunk[j];
    logits[o] = s;
  }
  return logits;
}

ModelOutput WindowedARModel::heads_from_trunk(std::span<const double> trunk) const {
  auto probs = [&](std::size_t head) {
    auto l = head_logits(head, trunk);
    softmax_inplace(l);
    return Distribution::normalize(std::move(l));
  };
  ModelOutput out{probs(0), {}};
  out.drafts.reserve(dims_.heads);
  for (std::size_t i = 1; i <= dims_.heads; ++i) out.drafts.push_back(probs(i));
  return out;
}

void WindowedARModel::refresh_cache(ModelState& state, std::size_t) const {
  Activations act;
  compute_trunk(state.context, act);
  state.cache = std::move(act.trunk);
}

ModelOutput WindowedARModel::do_forward(const ModelState& state) const {
  if (state.cache.size() == dims_.hidden) return heads_from_trunk(state.cache);
  Activations act;
  compute_trunk(state.context, act);
  return heads_from_trunk(act.trunk);
}

std::vector<ModelOutput> WindowedARModel::do_tree_forward(const ModelState& state,
                                                          std::span<const TokenId> tree_tokens,
                                                          const DraftTreeTopology& topology) const {
  const std::size_t c = dims_.window;
  std::vector<ModelOutput> out;
  out.reserve(topology.size());
  Activations act;
  std::vector<TokenId> window;
  for (std::size_t n = 0; n < topology.size(); ++n) {
    auto path = topology.root_path(n);
    window.clear();
    // Tail of the committed context that still fits next to the path.
    const std::size_t from_path = std::min(path.size(), c);
    const std::size_t from_context = std::min(state.context.size(), c - from_path);
    window.insert(window.end(), state.context.end() - static_cast<std::ptrdiff_t>(from_context),
                  state.context.end());
    for (std::size_t i = path.size() - from_path; i < path.size(); ++i) {
      window.push_back(tree_tokens[path[i]]);
    }
    compute_trunk(window, act);
    out.push_back(heads_from_trunk(act.trunk));
  }
  return out;
}

StepResult WindowedARModel::evaluate(std::span<const TrainingExample> batch,
                                     const TrainConfig& cfg) const {
  return loss_and_gradient(batch, cfg, nullptr);
}

StepResult WindowedARModel::loss_and_gradient(std::span<const TrainingExample> batch,
                                              const TrainConfig& cfg,
                                              std::vector<double>* gradient) const {
  const std::size_t v = dims_.vocab, c = dims_.window, e = dims_.embed, h = dims_.hidden;
  const std::size_t heads = dims_.heads + 1;
  const bool tune_trunk = cfg.mode == TrainMode::kWithTuning;
  StepResult result;
  result.head_ce.assign(heads, 0.0);
  if (gradient) gradient->assign(params_.size(), 0.0);

  Activations act;
  std::vector<double> d_trunk(h), d_pre(h), d_z(h), d_x(c * e);
  for (const auto& item : batch) {
    if (item.targets.size() < heads || item.context.empty()) {
      ++result.skipped;
      continue;
    }
    ++result.used;
    compute_trunk(item.context, act);
    std::fill(d_trunk.begin(), d_trunk.end(), 0.0);
    for (std::size_t i = 0; i < heads; ++i) {
      auto p = head_logits(i, act.trunk);
      softmax_inplace(p);
      const TokenId target = item.targets[i];
      const double ce = -std::log(std::max(p[target], 1e-300));
      result.head_ce[i] += ce;
      const double w = cfg.head_weight(i);
      result.total_loss += w * ce;
      if (!gradient || w == 0.0) continue;
      const std::size_t base = head_range(i).first;
      for (std::size_t o = 0; o < v; ++o) {
        const double dl = w * (p[o] - (o == target ? 1.0 : 0.0));
        double* gw = &(*gradient)[base + o * h];
        const double* uw = &params_[base + o * h];
        for (std::size_t j = 0; j < h; ++j) {
          gw[j] += dl * act.trunk[j];
          d_trunk[j] += dl * uw[j];
        }
        (*gradient)[base + v * h + o] += dl;
      }
    }
    if (!gradient || !tune_trunk) continue;
    // trunk = z + silu(pre), pre = W_r z + b_r, z = W_in x + b_in.
    std::copy(d_trunk.begin(), d_trunk.end(), d_z.begin());
    for (std::size_t r = 0; r < h; ++r) {
      const double s = sigmoid(act.pre[r]);
      d_pre[r] = d_trunk[r] * s * (1.0 + act.pre[r] * (1.0 - s));
    }
    for (std::size_t r = 0; r < h; ++r) {
      double* gw = &(*gradient)[off_wr_ + r * h];
      const double* w = &params_[off_wr_ + r * h];
      for (std::size_t j = 0; j < h; ++j) {
        gw[j] += d_pre[r] * act.z[j];
        d_z[j] += d_pre[r] * w[j];
      }
      (*gradient)[off_br_ + r] += d_pre[r];
    }
    std::fill(d_x.begin(), d_x.end(), 0.0);
    for (std::size_t r = 0; r < h; ++r) {
      double* gw = &(*gradient)[off_win_ + r * c * e];
      const double* w = &params_[off_win_ + r * c * e];
      for (std::size_t j = 0; j < c * e; ++j) {
        gw[j] += d_z[r] * act.x[j];
        d_x[j] += d_z[r] * w[j];
      }
      (*gradient)[off_bin_ + r] += d_z[r];
    }
    const std::size_t n = std::min(item.context.size(), c);
    for (std::size_t i = 0; i < n; ++i) {
      const TokenId t = item.context[item.context.size() - n + i];
      const std::size_t slot = c - n + i;
      for (std::size_t j = 0; j < e; ++j) (*gradient)[off_embed_ + t * e + j] += d_x[slot * e + j];
    }
  }
  if (result.used > 0) {
    const double inv = 1.0 / static_cast<double>(result.used);
    for (double& ce : result.head_ce) ce *= inv;
    result.total_loss *= inv;
    if (gradient) {
      for (double& g : *gradient) g *= inv;
    }
  }
  return result;
}

StepResult train_step(WindowedARModel& model, std::span<const TrainingExample> batch,
                      const TrainConfig& cfg) {
  cfg.validate();
  std::vector<double> grad;
  StepResult r = model.loss_and_gradient(batch, cfg, &grad);
  if (r.used == 0) return r;
  auto params = model.mutable_parameters();
  auto update = [&](std::pair<std::size_t, std::size_t> range) {
    for (std::size_t i = range.first; i < range.second; ++i) {
      params[i] -= cfg.learning_rate * grad[i];
    }
  };
  if (cfg.mode == TrainMode::kWithTuning) {
    update(model.trunk_range());
    update(model.head_range(0));
  }
  for (std::size_t i = 1; i <= model.num_draft_heads(); ++i) update(model.head_range(i));
  return r;
}

std::vector<std::vector<double>> train(WindowedARModel& model,
                                       std::span<const TrainingExample> examples,
                                       const TrainConfig& cfg, RandomStream& rng) {
  cfg.validate();
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<double>> log;
  std::vector<TrainingExample> batch;
  const std::size_t heads = model.num_draft_heads() + 1;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    std::vector<double> sum(heads, 0.0);
    std::size_t used = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i) {
        batch.push_back(examples[order[i]]);
      }
      StepResult r = train_step(model, batch, cfg);
      for (std::size_t i = 0; i < heads; ++i) sum[i] += r.head_ce[i] * static_cast<double>(r.used);
      used += r.used;
    }
    for (double& s : sum) s /= static_cast<double>(std::max<std::size_t>(used, 1));
    log.push_back(std::move(sum));
  }
  return log;
}

double gradient_check(const WindowedARModel& model, std::span<const TrainingExample> batch,
                      const TrainConfig& cfg, double epsilon, std::size_t max_params,
                      std::uint64_t seed) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw PreconditionError("gradient check epsilon must lie in [1e-6, 1e-3]");
  }
  std::vector<double> analytic;
  model.loss_and_gradient(batch, cfg, &analytic);

  std::vector<std::size_t> trainable;
  auto add = [&](std::pair<std::size_t, std::size_t> r) {
    for (std::size_t i = r.first; i < r.second; ++i) trainable.push_back(i);
  };
  if (cfg.mode == TrainMode::kWithTuning) {
    add(model.trunk_range());
    add(model.head_range(0));
  }
  for (std::size_t i = 1; i <= model.num_draft_heads(); ++i) add(model.head_range(i));
  if (trainable.size() > max_params) {
    RandomStream rng(seed);
    for (std::size_t i = 0; i < max_params; ++i) {
      std::swap(trainable[i], trainable[i + rng.below(trainable.size() - i)]);
    }
    trainable.resize(max_params);
  }

  WindowedARModel probe = model;
  auto params = probe.mutable_parameters();
  double worst = 0.0;
  for (std::size_t idx : trainable) {
    const double saved = params[idx];
    params[idx] = saved + epsilon;
    const double up = probe.evaluate(batch, cfg).total_loss;
    params[idx] = saved - epsilon;
    const double down = probe.evaluate(batch, cfg).total_loss;
    params[idx] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace spectree
