// Copyright 2026 The fasrl Authors
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

// Group Relative Policy Optimization with the verifiable rewards, plus a
// supervised fine-tuning baseline sharing the same optimizer and log schema.
//
// Objective for one prompt with completions o_1..o_N:
//
//   J = 1/N sum_i 1/|o_i| sum_t [ min(rho A_i, clip(rho, 1-eps, 1+eps) A_i)
//                                 - beta * KL_t ]
//
// where rho = pi(o_it) / pi_old(o_it), A_i is the group-normalized reward,
// and KL_t = exp(ref - new) - (ref - new) - 1 per token. A batch averages J
// over its prompts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fasrl/error.hpp"
#include "fasrl/optimizer.hpp"
#include "fasrl/policy.hpp"
#include "fasrl/reward.hpp"
#include "fasrl/rng.hpp"

namespace fasrl {

struct TrainConfig {
  std::size_t group_size = 6;  // N
  double clip_epsilon = 0.2;
  double kl_beta = 0.04;
  std::size_t batch_prompts = 6;
  std::size_t max_steps = 1000;
  double advantage_std_floor = 1e-8;
  double temperature = 1.0;
  std::size_t inner_epochs = 1;
  std::size_t max_tokens = 24;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;

  void validate() const {
    auto fail = [](const std::string& m) {
      throw Error(ErrorCategory::kConfig, m);
    };
    if (group_size < 2) fail("train.group_size must be >= 2");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
      fail("train.clip_epsilon must be in (0, 1)");
    }
    if (!(kl_beta >= 0.0)) fail("train.kl_beta must be >= 0");
    if (batch_prompts < 1) fail("train.batch_prompts must be >= 1");
    if (!(advantage_std_floor > 0.0)) {
      fail("train.advantage_std_floor must be > 0");
    }
    if (!(temperature > 0.0)) fail("train.temperature must be > 0");
    if (inner_epochs < 1) fail("train.inner_epochs must be >= 1");
    if (max_tokens < 1) fail("train.max_tokens must be >= 1");
    optimizer.validate("train");
  }
};

// A_i = (r_i - mean) / std with the population std; all zero when
// std <= std_floor.
inline std::vector<double> compute_advantages(const std::vector<double>& rewards,
                                              double std_floor) {
  const std::size_t n = rewards.size();
  if (n < 2) {
    throw Error(ErrorCategory::kArgument, "advantages need a group of >= 2");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  std::vector<double> adv(n, 0.0);
  if (!(sd > std_floor)) return adv;
  for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

struct TermValue {
  double value = 0.0;
  double grad_coeff = 0.0;  // d value / d new_lp
  bool clipped = false;
};

// Clipped surrogate for one token. The clip binds (zero gradient) only when
// A > 0 and rho > 1 + eps, or A < 0 and rho < 1 - eps; at rho = 1 +/- eps
// exactly both branches agree and the unclipped gradient rho * A is used.
inline TermValue token_objective(double new_lp, double old_lp,
                                 double advantage, double eps) {
  const double rho = std::exp(new_lp - old_lp);
  const double lo = 1.0 - eps, hi = 1.0 + eps;
  TermValue out;
  out.clipped = (advantage > 0.0 && rho > hi) || (advantage < 0.0 && rho < lo);
  const double unclipped = rho * advantage;
  const double clipped = std::clamp(rho, lo, hi) * advantage;
  out.value = std::min(unclipped, clipped);
  out.grad_coeff = out.clipped ? 0.0 : unclipped;
  return out;
}

// k3 estimator of KL(pi || ref) at a sampled token. Small |delta| uses the
// Taylor series so cancellation cannot push the value below zero.
inline TermValue kl_token_estimate(double new_lp, double ref_lp) {
  const double delta = ref_lp - new_lp;
  TermValue out;
  if (std::abs(delta) < 1e-3) {
    out.value = delta * delta *
                (0.5 + delta * (1.0 / 6.0 + delta * (1.0 / 24.0 + delta / 120.0)));
  } else {
    out.value = std::expm1(delta) - delta;
  }
  out.grad_coeff = -std::expm1(delta);
  return out;
}

struct TrainingPrompt {
  std::string id;
  std::vector<TokenId> ids;
  ClassLabel gold = ClassLabel::kReal;
};

struct RolloutGroup {
  const TrainingPrompt* prompt = nullptr;
  std::vector<Completion> completions;
  std::vector<RewardBreakdown> rewards;
  std::vector<double> advantages;
  bool zero_std = false;
};

struct StepStats {
  std::size_t step = 0;
  double loss = 0.0;  // negated objective (GRPO) or token NLL (SFT)
  double mean_total_reward = 0.0;
  double mean_format = 0.0;
  double mean_cls = 0.0;
  double mean_res = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  double zero_std_group_fraction = 0.0;
  double mean_length = 0.0;  // tokens per completion

  bool operator==(const StepStats&) const = default;
};

inline RolloutGroup sample_group(const PolicyParams& params,
                                 const PolicyParams& ref,
                                 const Vocabulary& vocab,
                                 const TrainingPrompt& prompt,
                                 const TrainConfig& cfg,
                                 const RewardConfig& reward_cfg,
                                 std::uint64_t group_seed) {
  RolloutGroup g;
  g.prompt = &prompt;
  std::vector<double> totals;
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    g.completions.push_back(sample_completion(params, vocab, prompt.ids,
                                              cfg.temperature, cfg.max_tokens,
                                              derive_seed(group_seed, i), &ref));
    const auto parsed = parse_response(g.completions.back().text, reward_cfg);
    g.rewards.push_back(total_reward(parsed, prompt.gold, reward_cfg));
    totals.push_back(g.rewards.back().total);
  }
  g.advantages = compute_advantages(totals, cfg.advantage_std_floor);
  g.zero_std = std::all_of(g.advantages.begin(), g.advantages.end(),
                           [](double a) { return a == 0.0; });
  return g;
}

struct ObjectiveStats {
  double value = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
};

// Batch objective at `params` for fixed rollouts. When `grad` is non-null
// the gradient of the objective is accumulated into it. `rescore` = false
// reuses the stored sampling-time log-probabilities (valid when params are
// the sampling parameters).
inline ObjectiveStats grpo_objective(const PolicyParams& params,
                                     const std::vector<RolloutGroup>& groups,
                                     const TrainConfig& cfg, PolicyGrad* grad,
                                     bool rescore = true) {
  ObjectiveStats st;
  if (groups.empty()) return st;
  std::size_t tokens = 0, clipped = 0;
  const double per_prompt = 1.0 / static_cast<double>(groups.size());
  std::vector<double> weights;
  for (const auto& g : groups) {
    const double per_completion =
        per_prompt / static_cast<double>(g.completions.size());
    for (std::size_t i = 0; i < g.completions.size(); ++i) {
      const auto& c = g.completions[i];
      const auto new_lp = rescore ? score_sequence(params, g.prompt->ids,
                                                   c.tokens, cfg.temperature)
                                  : c.new_logprobs;
      const double scale = per_completion / static_cast<double>(c.size());
      weights.assign(c.size(), 0.0);
      for (std::size_t t = 0; t < c.size(); ++t) {
        const auto s = token_objective(new_lp[t], c.old_logprobs[t],
                                       g.advantages[i], cfg.clip_epsilon);
        const auto kl = kl_token_estimate(new_lp[t], c.ref_logprobs[t]);
        st.value += scale * (s.value - cfg.kl_beta * kl.value);
        st.mean_kl += scale * kl.value;
        weights[t] = scale * (s.grad_coeff - cfg.kl_beta * kl.grad_coeff);
        clipped += s.clipped ? 1 : 0;
        ++tokens;
      }
      if (grad) {
        accumulate_weighted_grad(params, g.prompt->ids, c.tokens, weights,
                                 *grad, cfg.temperature);
      }
    }
  }
  st.clip_fraction =
      tokens ? static_cast<double>(clipped) / static_cast<double>(tokens) : 0.0;
  return st;
}

inline void fill_reward_stats(const std::vector<RolloutGroup>& groups,
                              StepStats& s) {
  std::size_t n = 0, zero = 0, len = 0;
  for (const auto& g : groups) {
    zero += g.zero_std ? 1 : 0;
    for (std::size_t i = 0; i < g.rewards.size(); ++i) {
      const auto& r = g.rewards[i];
      s.mean_total_reward += r.total;
      s.mean_format += r.format;
      s.mean_cls += r.cls;
      s.mean_res += r.res;
      len += g.completions[i].size();
      ++n;
    }
  }
  if (n) {
    const double inv = 1.0 / static_cast<double>(n);
    s.mean_total_reward *= inv;
    s.mean_format *= inv;
    s.mean_cls *= inv;
    s.mean_res *= inv;
    s.mean_length = static_cast<double>(len) * inv;
  }
  s.zero_std_group_fraction =
      groups.empty() ? 0.0
                     : static_cast<double>(zero) / static_cast<double>(groups.size());
}

// Prompt indices for one step, drawn without replacement where possible.
inline std::vector<std::size_t> draw_batch(std::size_t dataset_size,
                                           std::size_t batch,
                                           std::uint64_t seed) {
  if (dataset_size == 0) {
    throw Error(ErrorCategory::kDataset, "training set is empty");
  }
  Rng rng(seed);
  std::vector<std::size_t> out;
  if (batch <= dataset_size) {
    std::vector<std::size_t> all(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) all[i] = i;
    for (std::size_t i = 0; i < batch; ++i) {
      std::swap(all[i], all[i + rng.index(dataset_size - i)]);
      out.push_back(all[i]);
    }
  } else {
    for (std::size_t i = 0; i < batch; ++i) out.push_back(rng.index(dataset_size));
  }
  return out;
}

// One optimization step = sample groups for a batch, normalize rewards,
// then `inner_epochs` ascent updates on the clipped objective. The old
// policy is the policy at sampling time; the reference policy stays fixed.
class GrpoTrainer {
 public:
  GrpoTrainer(PolicyParams params, PolicyParams ref, Vocabulary vocab,
              std::vector<TrainingPrompt> prompts, TrainConfig cfg,
              RewardConfig reward_cfg)
      : params_(std::move(params)),
        ref_(std::move(ref)),
        vocab_(std::move(vocab)),
        prompts_(std::move(prompts)),
        cfg_(cfg),
        reward_cfg_(std::move(reward_cfg)),
        optimizer_(cfg.optimizer) {
    cfg_.validate();
    reward_cfg_.validate();
    params_.check_same_shape(ref_);
    if (prompts_.empty()) {
      throw Error(ErrorCategory::kDataset, "training set is empty");
    }
  }

  std::vector<RolloutGroup> rollouts(std::size_t step) const {
    const auto step_seed = derive_seed(derive_seed(cfg_.seed, "grpo"), step);
    const auto batch =
        draw_batch(prompts_.size(), cfg_.batch_prompts, derive_seed(step_seed, "batch"));
    std::vector<RolloutGroup> groups;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      groups.push_back(sample_group(params_, ref_, vocab_, prompts_[batch[b]],
                                    cfg_, reward_cfg_,
                                    derive_seed(derive_seed(step_seed, "group"), b)));
    }
    return groups;
  }

  StepStats step(std::size_t step) {
    const auto groups = rollouts(step);
    StepStats s;
    s.step = step;
    fill_reward_stats(groups, s);
    double clip_sum = 0.0;
    for (std::size_t e = 0; e < cfg_.inner_epochs; ++e) {
      auto grad = params_.zeros_like();
      const auto obj = grpo_objective(params_, groups, cfg_, &grad, e > 0);
      if (!grad.all_finite()) {
        throw Error(ErrorCategory::kNumeric,
                    "non-finite GRPO gradient at step " + std::to_string(step));
      }
      if (e == 0) {
        s.loss = -obj.value;
        s.mean_kl = obj.mean_kl;
      }
      clip_sum += obj.clip_fraction;
      const double norm = optimizer_.ascend(params_, std::move(grad));
      if (e == 0) s.grad_norm = norm;
    }
    s.clip_fraction = clip_sum / static_cast<double>(cfg_.inner_epochs);
    return s;
  }

  const PolicyParams& params() const { return params_; }
  const PolicyParams& reference() const { return ref_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  PolicyParams params_;
  PolicyParams ref_;
  Vocabulary vocab_;
  std::vector<TrainingPrompt> prompts_;
  TrainConfig cfg_;
  RewardConfig reward_cfg_;
  Optimizer optimizer_;
};

struct SftExample {
  TrainingPrompt prompt;
  std::vector<TokenId> target;  // gold response tokens, ending in <eos>
};

// Tokenizes a gold response; anything that does not parse as a well-formed
// response is a dataset error.
inline SftExample make_sft_example(TrainingPrompt prompt,
                                   const std::string& gold_text,
                                   const Vocabulary& vocab,
                                   const RewardConfig& reward_cfg) {
  const auto parsed = parse_response(gold_text, reward_cfg);
  if (!parsed.format_ok) {
    throw Error(ErrorCategory::kDataset,
                "malformed gold response for sample '" + prompt.id + "'");
  }
  SftExample ex;
  ex.target = vocab.tokenize(gold_text);
  ex.target.push_back(Vocabulary::kEos);
  ex.prompt = std::move(prompt);
  return ex;
}

// Maximizes the token-level log-likelihood of gold responses. Each step
// also samples one completion per batch prompt (before the update) so the
// reward and KL columns of the log are comparable with GRPO.
class SftTrainer {
 public:
  SftTrainer(PolicyParams params, PolicyParams ref, Vocabulary vocab,
             std::vector<SftExample> data, TrainConfig cfg,
             RewardConfig reward_cfg, bool monitor_rewards = true)
      : params_(std::move(params)),
        ref_(std::move(ref)),
        vocab_(std::move(vocab)),
        data_(std::move(data)),
        cfg_(cfg),
        reward_cfg_(std::move(reward_cfg)),
        optimizer_(cfg.optimizer),
        monitor_(monitor_rewards) {
    if (data_.empty()) {
      throw Error(ErrorCategory::kDataset, "SFT dataset is empty");
    }
    if (cfg_.batch_prompts < 1) {
      throw Error(ErrorCategory::kConfig, "train.batch_prompts must be >= 1");
    }
    cfg_.optimizer.validate("train");
    params_.check_same_shape(ref_);
  }

  // Mean negative log-likelihood per token over the whole dataset.
  double dataset_loss() const {
    double ll = 0.0;
    std::size_t n = 0;
    for (const auto& ex : data_) {
      for (double lp : score_sequence(params_, ex.prompt.ids, ex.target)) ll += lp;
      n += ex.target.size();
    }
    return -ll / static_cast<double>(n);
  }

  StepStats step(std::size_t step) {
    const auto step_seed = derive_seed(derive_seed(cfg_.seed, "sft"), step);
    const auto batch =
        draw_batch(data_.size(), cfg_.batch_prompts, derive_seed(step_seed, "batch"));
    StepStats s;
    s.step = step;

    if (monitor_) {
      std::vector<RolloutGroup> groups;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& ex = data_[batch[b]];
        RolloutGroup g;
        g.prompt = &ex.prompt;
        g.completions.push_back(sample_completion(
            params_, vocab_, ex.prompt.ids, cfg_.temperature, cfg_.max_tokens,
            derive_seed(derive_seed(step_seed, "monitor"), b), &ref_));
        g.rewards.push_back(total_reward(
            parse_response(g.completions.back().text, reward_cfg_), ex.prompt.gold,
            reward_cfg_));
        g.advantages.push_back(0.0);
        const auto& c = g.completions.back();
        double kl = 0.0;
        for (std::size_t t = 0; t < c.size(); ++t) {
          kl += kl_token_estimate(c.new_logprobs[t], c.ref_logprobs[t]).value;
        }
        s.mean_kl += kl / static_cast<double>(c.size()) /
                     static_cast<double>(batch.size());
        groups.push_back(std::move(g));
      }
      fill_reward_stats(groups, s);
      s.zero_std_group_fraction = 0.0;
    }

    std::size_t tokens = 0;
    for (auto b : batch) tokens += data_[b].target.size();
    const double w = 1.0 / static_cast<double>(tokens);
    auto grad = params_.zeros_like();
    double ll = 0.0;
    std::vector<double> ones;
    for (auto b : batch) {
      const auto& ex = data_[b];
      for (double lp : score_sequence(params_, ex.prompt.ids, ex.target)) ll += lp;
      ones.assign(ex.target.size(), w);
      accumulate_weighted_grad(params_, ex.prompt.ids, ex.target, ones, grad);
    }
    if (!grad.all_finite()) {
      throw Error(ErrorCategory::kNumeric,
                  "non-finite SFT gradient at step " + std::to_string(step));
    }
    s.loss = -ll * w;
    s.grad_norm = optimizer_.ascend(params_, std::move(grad));
    return s;
  }

  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
  PolicyParams ref_;
  Vocabulary vocab_;
  std::vector<SftExample> data_;
  TrainConfig cfg_;
  RewardConfig reward_cfg_;
  Optimizer optimizer_;
  bool monitor_;
};

// Runs `steps` SFT updates and returns the final parameters.
inline PolicyParams train_sft(PolicyParams params, const Vocabulary& vocab,
                              std::vector<SftExample> data,
                              const TrainConfig& cfg,
                              const RewardConfig& reward_cfg = {}) {
  auto ref = params;
  SftTrainer trainer(std::move(params), std::move(ref), vocab, std::move(data),
                     cfg, reward_cfg, false);
  for (std::size_t s = 0; s < cfg.max_steps; ++s) trainer.step(s);
  return trainer.params();
}

}  // namespace fasrl
