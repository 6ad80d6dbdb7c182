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

// Glue between SpoofWorld samples and the token policy: vocabulary
// construction, prompt encoding, the format warm-up that stands in for an
// instruction-following base model, and policy-backed evaluation.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fasrl/eval.hpp"
#include "fasrl/grpo.hpp"
#include "fasrl/policy.hpp"
#include "fasrl/spoofworld.hpp"
#include "fasrl/vocabulary.hpp"

namespace fasrl {

struct World {
  AttackCatalog catalog;
  std::map<std::string, DomainRecipe> recipes;
  std::vector<std::string> question_tokens;
  // Extra filler words the policy may use while reasoning.
  std::vector<std::string> reasoning_words;
};

// Every token the world can produce, in a deterministic order.
inline Vocabulary build_vocabulary(const World& world) {
  std::vector<std::string> words = world.question_tokens;
  for (const auto& w : gold_lead_words()) words.push_back(w);
  for (const auto& w : world.reasoning_words) words.push_back(w);
  for (const auto& [_, r] : world.recipes) {
    for (const auto& t : r.real_face_tokens) words.push_back(t);
  }
  for (const auto& [_, a] : world.catalog) {
    for (const auto& t : a.signature_tokens) words.push_back(t);
  }
  for (const auto& [_, r] : world.recipes) {
    for (const auto& t : r.style_tokens) words.push_back(t);
  }
  return Vocabulary::with_words(words);
}

// Words a reasoning span is built from: lead words, filler, and every
// evidence token.
inline std::vector<std::string> reasoning_pool(const World& world) {
  std::vector<std::string> pool = gold_lead_words();
  for (const auto& w : world.reasoning_words) pool.push_back(w);
  std::set<std::string> ev;
  for (const auto& [_, r] : world.recipes) ev.insert(r.real_face_tokens.begin(), r.real_face_tokens.end());
  for (const auto& [_, a] : world.catalog) ev.insert(a.signature_tokens.begin(), a.signature_tokens.end());
  pool.insert(pool.end(), ev.begin(), ev.end());
  return pool;
}

inline std::vector<TokenId> encode_prompt(const InstructionTriplet& s,
                                          const Vocabulary& vocab) {
  auto ids = vocab.ids(s.image_tokens);
  const auto q = vocab.ids(s.question_tokens);
  ids.insert(ids.end(), q.begin(), q.end());
  return ids;
}

inline TrainingPrompt to_training_prompt(const InstructionTriplet& s,
                                         const Vocabulary& vocab) {
  return {s.id, encode_prompt(s, vocab), s.label};
}

inline std::vector<TrainingPrompt> to_training_prompts(
    const std::vector<InstructionTriplet>& samples, const Vocabulary& vocab) {
  std::vector<TrainingPrompt> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(to_training_prompt(s, vocab));
  return out;
}

struct WarmupConfig {
  std::size_t steps = 300;
  std::size_t max_reasoning_words = 6;
  OptimizerConfig optimizer{OptimizerKind::kAdam, 1e-2};
  std::size_t batch_prompts = 8;
};

// Label-agnostic format data: the answer is a coin flip independent of the
// prompt and the reasoning is a random bag of reasoning words, so the
// warmed-up policy follows the output format but has no class knowledge.
inline std::vector<SftExample> make_warmup_dataset(
    const std::vector<InstructionTriplet>& samples, const World& world,
    const Vocabulary& vocab, std::size_t max_words, std::uint64_t seed) {
  const auto pool = reasoning_pool(world);
  std::vector<SftExample> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    const std::size_t n = 1 + rng.index(max_words);
    std::string thinking;
    for (std::size_t w = 0; w < n; ++w) {
      if (w) thinking += ' ';
      thinking += pool[rng.index(pool.size())];
    }
    const auto label = rng.bernoulli(0.5) ? ClassLabel::kReal : ClassLabel::kFake;
    const std::string text = std::string(kThinkOpen) + thinking +
                             std::string(kThinkClose) + std::string(kAnswerOpen) +
                             std::string(to_string(label)) +
                             std::string(kAnswerClose);
    auto prompt = to_training_prompt(samples[i], vocab);
    prompt.gold = label;
    out.push_back(make_sft_example(std::move(prompt), text, vocab, {}));
  }
  return out;
}

inline PolicyParams warm_up(PolicyParams params, const Vocabulary& vocab,
                            const std::vector<InstructionTriplet>& samples,
                            const World& world, const WarmupConfig& wc,
                            std::uint64_t seed) {
  if (wc.steps == 0) return params;
  TrainConfig tc;
  tc.max_steps = wc.steps;
  tc.batch_prompts = wc.batch_prompts;
  tc.optimizer = wc.optimizer;
  tc.seed = derive_seed(seed, "warmup/steps");
  auto data = make_warmup_dataset(samples, world, vocab, wc.max_reasoning_words,
                                  derive_seed(seed, "warmup/data"));
  return train_sft(std::move(params), vocab, std::move(data), tc);
}

struct DecodeSpec {
  bool greedy = true;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::size_t max_tokens = 24;
};

// Responder for evaluate(): runs the policy on one sample.
class PolicyResponder {
 public:
  PolicyResponder(const PolicyParams& params, const Vocabulary& vocab,
                  DecodeSpec decode)
      : params_(params), vocab_(vocab), decode_(decode) {}

  std::string operator()(const InstructionTriplet& s) const {
    const auto ids = encode_prompt(s, vocab_);
    if (decode_.greedy) {
      return greedy_completion(params_, vocab_, ids, decode_.max_tokens).text;
    }
    return sample_completion(params_, vocab_, ids, decode_.temperature,
                             decode_.max_tokens, derive_seed(decode_.seed, s.id))
        .text;
  }

 private:
  const PolicyParams& params_;
  const Vocabulary& vocab_;
  DecodeSpec decode_;
};

inline Evaluation evaluate_policy(const PolicyParams& params,
                                  const Vocabulary& vocab,
                                  const std::vector<InstructionTriplet>& split,
                                  const DecodeSpec& decode,
                                  const RewardConfig& reward_cfg = {}) {
  return evaluate(PolicyResponder(params, vocab, decode), split, reward_cfg);
}

// Reads evidence tokens with full knowledge of the catalog.
class OracleResponder {
 public:
  explicit OracleResponder(const AttackCatalog& catalog) : catalog_(catalog) {}
  std::string operator()(const InstructionTriplet& s) const {
    return std::string(kThinkOpen) + "evidence" + std::string(kThinkClose) +
           std::string(kAnswerOpen) +
           std::string(to_string(rule_based_label(s, catalog_))) +
           std::string(kAnswerClose);
  }

 private:
  const AttackCatalog& catalog_;
};

}  // namespace fasrl
