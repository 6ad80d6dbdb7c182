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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fasrl/policy.hpp"
#include "fasrl/vocabulary.hpp"

using namespace fasrl;

namespace {

Vocabulary small_vocab() {
  return Vocabulary::with_words({"moire", "glare", "flat", "skin", "edge"});
}

PolicyParams small_policy(std::uint64_t seed, PolicyDims dims = {4, 5, 2, 0}) {
  return init_params(dims, small_vocab(), seed);
}

// Logits computed directly from the architecture description with no shared
// helpers: x = [E[c_1]; ...; E[c_k]; mean E[prompt]], z = tanh(Wx + b),
// logits = z^T U + c.
std::vector<double> oracle_logits(const PolicyParams& p,
                                  const std::vector<TokenId>& prompt,
                                  const std::vector<TokenId>& context) {
  const auto& dm = p.dims;
  std::vector<double> x;
  for (TokenId c : context) {
    for (std::size_t j = 0; j < dm.d; ++j) x.push_back(p.embeddings[c * dm.d + j]);
  }
  for (std::size_t j = 0; j < dm.d; ++j) {
    double s = 0;
    for (TokenId t : prompt) s += p.embeddings[t * dm.d + j];
    x.push_back(prompt.empty() ? 0.0 : s / prompt.size());
  }
  std::vector<double> out(dm.vocab);
  for (std::size_t v = 0; v < dm.vocab; ++v) {
    double l = p.output_bias[v];
    for (std::size_t j = 0; j < dm.h; ++j) {
      double a = p.hidden_bias[j];
      for (std::size_t m = 0; m < x.size(); ++m) a += p.context_weights[j * x.size() + m] * x[m];
      l += std::tanh(a) * p.output_weights[j * dm.vocab + v];
    }
    out[v] = l;
  }
  return out;
}

}  // namespace

TEST(InitParams, DeterministicPerSeed) {
  EXPECT_TRUE(small_policy(5) == small_policy(5));
  EXPECT_FALSE(small_policy(5) == small_policy(6));
}

TEST(InitParams, ShapesAndBiases) {
  const auto p = small_policy(1);
  EXPECT_EQ(p.dims.vocab, small_vocab().size());
  EXPECT_EQ(p.embeddings.size(), p.dims.vocab * 4);
  EXPECT_EQ(p.context_weights.size(), 5u * 12u);
  EXPECT_EQ(p.output_weights.size(), 5u * p.dims.vocab);
  EXPECT_EQ(p.parameter_count(),
            p.dims.vocab * 4 + 60 + 5 + 5 * p.dims.vocab + p.dims.vocab);
  for (double b : p.hidden_bias) EXPECT_EQ(b, 0.0);
  for (double b : p.output_bias) EXPECT_EQ(b, 0.0);
  EXPECT_TRUE(p.all_finite());
}

TEST(InitParams, ZeroDimensionRejected) {
  EXPECT_THROW(init_params({0, 5, 2, 0}, small_vocab(), 1), Error);
  EXPECT_THROW(init_params({4, 0, 2, 0}, small_vocab(), 1), Error);
  EXPECT_THROW(init_params({4, 5, 0, 0}, small_vocab(), 1), Error);
}

TEST(InitParams, ContextWeightVarianceIsInverseFanIn) {
  const auto vocab = Vocabulary::with_words(std::vector<std::string>(0));
  const auto p = init_params({64, 64, 3, 0}, vocab, 3);
  double ss = 0;
  for (double x : p.context_weights) ss += x * x;
  const double var = ss / p.context_weights.size();
  EXPECT_NEAR(var, 1.0 / (4 * 64), 0.2 / (4 * 64));
}

TEST(Forward, ZeroParamsGiveUniformDistribution) {
  auto p = PolicyParams::zeros({4, 5, 2, small_vocab().size()});
  const std::vector<TokenId> prompt = {8, 9};
  const auto lp = score_sequence(p, prompt, std::vector<TokenId>{8, 10, 1});
  for (double x : lp) EXPECT_DOUBLE_EQ(x, -std::log(static_cast<double>(p.dims.vocab)));
}

TEST(Forward, MatchesStraightLineOracle) {
  const auto p = small_policy(11);
  const std::vector<TokenId> prompt = {8, 9, 12};
  const std::vector<std::vector<TokenId>> contexts = {{0, 0}, {0, 2}, {10, 11}, {4, 6}};
  for (const auto& ctx : contexts) {
    const auto got = next_token_logits(p, prompt_summary(p, prompt), ctx);
    const auto want = oracle_logits(p, prompt, ctx);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t v = 0; v < got.size(); ++v) EXPECT_NEAR(got[v], want[v], 1e-12);
  }
}

TEST(Forward, PromptOrderDoesNotMatter) {
  const auto p = small_policy(2);
  const auto a = prompt_summary(p, std::vector<TokenId>{8, 9, 12});
  const auto b = prompt_summary(p, std::vector<TokenId>{12, 8, 9});
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-15);
}

TEST(Forward, ContextOutOfRangeRejected) {
  const auto p = small_policy(2);
  const auto s = prompt_summary(p, std::vector<TokenId>{8});
  EXPECT_THROW(next_token_logits(p, s, std::vector<TokenId>{0, 99}), Error);
  EXPECT_THROW(next_token_logits(p, s, std::vector<TokenId>{0}), Error);
}

TEST(Softmax, NormalizedAndStable) {
  const std::vector<double> logits = {1000.0, 1001.0, 999.0};
  const auto pr = softmax(logits);
  EXPECT_NEAR(pr[0] + pr[1] + pr[2], 1.0, 1e-15);
  EXPECT_GT(pr[1], pr[0]);
  const auto hot = softmax(logits, 1e-3);
  EXPECT_NEAR(hot[1], 1.0, 1e-12);
}

TEST(Sampling, DeterministicForSeed) {
  const auto p = small_policy(4);
  const auto v = small_vocab();
  const std::vector<TokenId> prompt = {8, 9};
  const auto a = sample_completion(p, v, prompt, 1.0, 20, 77);
  const auto b = sample_completion(p, v, prompt, 1.0, 20, 77);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.new_logprobs, b.new_logprobs);
  EXPECT_EQ(a.text, b.text);
  bool any_diff = false;
  for (std::uint64_t s = 78; s < 90 && !any_diff; ++s) {
    any_diff = sample_completion(p, v, prompt, 1.0, 20, s).tokens != a.tokens;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Sampling, StopsAtEosOrBudget) {
  const auto p = small_policy(4);
  const auto v = small_vocab();
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto c = sample_completion(p, v, std::vector<TokenId>{8}, 1.0, 7, s);
    ASSERT_GE(c.size(), 1u);
    ASSERT_LE(c.size(), 7u);
    for (std::size_t i = 0; i + 1 < c.size(); ++i) ASSERT_NE(c.tokens[i], Vocabulary::kEos);
    ASSERT_TRUE(c.size() == 7 || c.tokens.back() == Vocabulary::kEos);
  }
  EXPECT_THROW(sample_completion(p, v, std::vector<TokenId>{8}, 1.0, 0, 1), Error);
  EXPECT_THROW(sample_completion(p, v, std::vector<TokenId>{8}, 0.0, 5, 1), Error);
}

TEST(Sampling, LowTemperatureMatchesGreedy) {
  const auto p = small_policy(8);
  const auto v = small_vocab();
  for (TokenId w = 8; w < 13; ++w) {
    const std::vector<TokenId> prompt = {w};
    const auto g = greedy_completion(p, v, prompt, 12);
    const auto s = sample_completion(p, v, prompt, 1e-6, 12, 5);
    EXPECT_EQ(g.tokens, s.tokens);
  }
}

TEST(Sampling, SingleStepFrequenciesMatchSoftmax) {
  const auto p = small_policy(9);
  const auto v = small_vocab();
  const std::vector<TokenId> prompt = {9, 10};
  const auto probs = softmax(next_token_logits(p, prompt_summary(p, prompt),
                                               std::vector<TokenId>{0, 0}));
  const int n = 100000;
  std::vector<int> counts(probs.size(), 0);
  for (int i = 0; i < n; ++i) {
    ++counts[sample_completion(p, v, prompt, 1.0, 1, 1000 + i).tokens[0]];
  }
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double se = std::sqrt(probs[k] * (1 - probs[k]) / n);
    EXPECT_NEAR(counts[k] / double(n), probs[k], 3 * se + 1e-4) << "token " << k;
  }
}

TEST(Scoring, RescoreIsBitExact) {
  const auto p = small_policy(4);
  const auto v = small_vocab();
  const std::vector<TokenId> prompt = {8, 12};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto c = sample_completion(p, v, prompt, 0.7, 15, s);
    EXPECT_EQ(score_sequence(p, prompt, c.tokens, 0.7), c.new_logprobs);
  }
}

TEST(Scoring, ReferencePolicyFillsRefLogprobs) {
  const auto p = small_policy(4);
  const auto ref = small_policy(40);
  const auto v = small_vocab();
  const std::vector<TokenId> prompt = {8};
  const auto c = sample_completion(p, v, prompt, 1.0, 10, 3, &ref);
  EXPECT_EQ(c.ref_logprobs, score_sequence(ref, prompt, c.tokens));
}

TEST(Scoring, ChainRuleMatchesOracleProduct) {
  const auto p = small_policy(21);
  const std::vector<TokenId> prompt = {8, 9};
  const std::vector<TokenId> tokens = {2, 10, 11, 3, 4, 7, 5, 1};
  const auto lp = score_sequence(p, prompt, tokens);
  std::vector<TokenId> ctx = {0, 0};
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto logits = oracle_logits(p, prompt, ctx);
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double z = 0;
    for (double l : logits) z += std::exp(l - mx);
    EXPECT_NEAR(lp[t], logits[tokens[t]] - mx - std::log(z), 1e-12);
    ctx = {ctx[1], tokens[t]};
  }
}

TEST(Scoring, Errors) {
  const auto p = small_policy(1);
  EXPECT_THROW(score_sequence(p, std::vector<TokenId>{8}, std::vector<TokenId>{}), Error);
  EXPECT_THROW(score_sequence(p, std::vector<TokenId>{8}, std::vector<TokenId>{400}), Error);
}

TEST(Gradient, MatchesFiniteDifferencesForEveryParameter) {
  for (double temperature : {1.0, 0.6}) {
    auto p = small_policy(31);
    for (auto* a : p.arrays()) {
      for (std::size_t i = 0; i < a->size(); ++i) (*a)[i] += 0.01 * std::sin(1.0 + i);
    }
    const std::vector<TokenId> prompt = {8, 9, 9, 12};
    const std::vector<TokenId> tokens = {2, 10, 3, 4, 6, 5, 1};
    const std::vector<double> weights = {0.5, -1.0, 2.0, 0.25, 1.5, -0.75, 1.0};
    const auto g = weighted_grad(p, prompt, tokens, weights, temperature);
    const auto objective = [&](const PolicyParams& q) {
      const auto lp = score_sequence(q, prompt, tokens, temperature);
      double s = 0;
      for (std::size_t t = 0; t < lp.size(); ++t) s += weights[t] * lp[t];
      return s;
    };
    const double h = 1e-5;
    double worst = 0;
    for (std::size_t i = 0; i < p.parameter_count(); ++i) {
      auto plus = p, minus = p;
      plus.at(i) += h;
      minus.at(i) -= h;
      const double fd = (objective(plus) - objective(minus)) / (2 * h);
      const double an = g.at(i);
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      worst = std::max(worst, rel);
    }
    EXPECT_LT(worst, 1e-4) << "temperature " << temperature;
  }
}

TEST(Gradient, LinearInWeights) {
  const auto p = small_policy(3);
  const std::vector<TokenId> prompt = {8};
  const std::vector<TokenId> tokens = {2, 9, 1};
  auto g1 = weighted_grad(p, prompt, tokens, std::vector<double>{1, 0, 0});
  const auto g2 = weighted_grad(p, prompt, tokens, std::vector<double>{0, 2, 3});
  const auto both = weighted_grad(p, prompt, tokens, std::vector<double>{1, 2, 3});
  g1 += g2;
  for (std::size_t i = 0; i < both.parameter_count(); ++i) {
    EXPECT_NEAR(g1.at(i), both.at(i), 1e-12);
  }
  const auto zero = weighted_grad(p, prompt, tokens, std::vector<double>{0, 0, 0});
  EXPECT_EQ(zero.squared_norm(), 0.0);
  EXPECT_THROW(weighted_grad(p, prompt, tokens, std::vector<double>{1}), Error);
}

TEST(Params, Arithmetic) {
  auto a = small_policy(1);
  const auto b = small_policy(2);
  auto c = a;
  c += b;
  c *= 0.5;
  for (std::size_t i = 0; i < a.parameter_count(); ++i) {
    EXPECT_DOUBLE_EQ(c.at(i), 0.5 * (a.at(i) + b.at(i)));
  }
  auto other = small_policy(1, {4, 6, 2, 0});
  EXPECT_THROW(a += other, Error);
}

TEST(Vocabulary, RoundTrip) {
  const auto v = small_vocab();
  const std::vector<TokenId> ids = {2, 8, 9, 3, 4, 7, 5, 1};
  const auto text = v.detokenize(ids);
  EXPECT_EQ(text, "<thinking>moire glare</thinking><answer>fake</answer>");
  auto back = v.tokenize(text);
  back.push_back(Vocabulary::kEos);
  EXPECT_EQ(back, ids);
}

TEST(Vocabulary, Validation) {
  EXPECT_THROW(Vocabulary({"a"}), Error);
  auto toks = Vocabulary::structural_tokens();
  toks.push_back("bad word");
  EXPECT_THROW(Vocabulary{toks}, Error);
  toks.back() = "<x";
  EXPECT_THROW(Vocabulary{toks}, Error);
  toks.back() = "moire";
  toks.push_back("moire");
  EXPECT_THROW(Vocabulary{toks}, Error);
  EXPECT_THROW(small_vocab().id("nope"), Error);
  EXPECT_EQ(Vocabulary::with_words({"real", "a", "a"}).size(), 9u);
}
