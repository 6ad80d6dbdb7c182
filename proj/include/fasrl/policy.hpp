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

// Fixed-window autoregressive token policy.
//
// Given the last k tokens c_1..c_k (left-padded with <bos>) and a prompt
// summary s (mean of the prompt token embeddings), the next-token logits are
//
//   x      = [E[c_1]; ...; E[c_k]; s]            ((k+1)·d)
//   z      = tanh(W_c x + b_h)                    (h)
//   logits = W_o^T z + b_o                        (V)
//
// and the distribution is softmax(logits / temperature). Gradients are
// written out by hand; there is no tape.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fasrl/error.hpp"
#include "fasrl/rng.hpp"
#include "fasrl/vocabulary.hpp"

namespace fasrl {

inline constexpr double kProbFloor = 1e-300;

struct PolicyDims {
  std::size_t d = 16;  // embedding width
  std::size_t h = 32;  // hidden width
  std::size_t k = 3;   // context window
  std::size_t vocab = 0;

  std::size_t input_width() const { return (k + 1) * d; }
  bool operator==(const PolicyDims&) const = default;
};

// Parameters, and also the layout used for gradients and optimizer state.
struct PolicyParams {
  PolicyDims dims;
  std::vector<double> embeddings;       // [vocab x d]
  std::vector<double> context_weights;  // [h x (k+1)d]
  std::vector<double> hidden_bias;      // [h]
  std::vector<double> output_weights;   // [h x vocab]
  std::vector<double> output_bias;      // [vocab]

  static PolicyParams zeros(const PolicyDims& dims) {
    PolicyParams p;
    p.dims = dims;
    p.embeddings.assign(dims.vocab * dims.d, 0.0);
    p.context_weights.assign(dims.h * dims.input_width(), 0.0);
    p.hidden_bias.assign(dims.h, 0.0);
    p.output_weights.assign(dims.h * dims.vocab, 0.0);
    p.output_bias.assign(dims.vocab, 0.0);
    return p;
  }

  PolicyParams zeros_like() const { return zeros(dims); }

  std::size_t parameter_count() const {
    return embeddings.size() + context_weights.size() + hidden_bias.size() +
           output_weights.size() + output_bias.size();
  }

  // Visits the arrays in serialization order.
  template <typename Fn>
  void for_each_array(Fn&& fn) {
    fn(embeddings);
    fn(context_weights);
    fn(hidden_bias);
    fn(output_weights);
    fn(output_bias);
  }
  template <typename Fn>
  void for_each_array(Fn&& fn) const {
    fn(embeddings);
    fn(context_weights);
    fn(hidden_bias);
    fn(output_weights);
    fn(output_bias);
  }

  // Flat view helpers, used by the optimizer and by finite-difference checks.
  double& at(std::size_t flat) {
    for (auto* a : arrays()) {
      if (flat < a->size()) return (*a)[flat];
      flat -= a->size();
    }
    throw Error(ErrorCategory::kDimension, "flat parameter index out of range");
  }
  double at(std::size_t flat) const {
    return const_cast<PolicyParams*>(this)->at(flat);
  }

  PolicyParams& operator+=(const PolicyParams& o) {
    check_same_shape(o);
    auto src = o.arrays_const();
    auto dst = arrays();
    for (std::size_t a = 0; a < dst.size(); ++a) {
      for (std::size_t i = 0; i < dst[a]->size(); ++i) {
        (*dst[a])[i] += (*src[a])[i];
      }
    }
    return *this;
  }

  PolicyParams& operator*=(double s) {
    for_each_array([s](std::vector<double>& v) {
      for (double& x : v) x *= s;
    });
    return *this;
  }

  double squared_norm() const {
    double acc = 0.0;
    for_each_array([&acc](const std::vector<double>& v) {
      for (double x : v) acc += x * x;
    });
    return acc;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_array([&ok](const std::vector<double>& v) {
      for (double x : v) ok = ok && std::isfinite(x);
    });
    return ok;
  }

  bool operator==(const PolicyParams&) const = default;

  void check_same_shape(const PolicyParams& o) const {
    if (!(dims == o.dims)) {
      throw Error(ErrorCategory::kDimension, "parameter shapes differ");
    }
  }

  void validate() const {
    const auto z = zeros(dims);
    if (embeddings.size() != z.embeddings.size() ||
        context_weights.size() != z.context_weights.size() ||
        hidden_bias.size() != z.hidden_bias.size() ||
        output_weights.size() != z.output_weights.size() ||
        output_bias.size() != z.output_bias.size()) {
      throw Error(ErrorCategory::kDimension,
                  "parameter arrays inconsistent with dims");
    }
    if (!all_finite()) {
      throw Error(ErrorCategory::kNumeric, "non-finite parameter");
    }
  }

  std::array<std::vector<double>*, 5> arrays() {
    return {&embeddings, &context_weights, &hidden_bias, &output_weights,
            &output_bias};
  }
  std::array<const std::vector<double>*, 5> arrays_const() const {
    return {&embeddings, &context_weights, &hidden_bias, &output_weights,
            &output_bias};
  }
};

using PolicyGrad = PolicyParams;

// Weights ~ N(0, 1/fan_in); biases start at zero. Embedding rows use fan_in
// = d so that pooled prompt summaries stay O(1).
inline PolicyParams init_params(PolicyDims dims, const Vocabulary& vocab,
                                std::uint64_t seed) {
  if (dims.d == 0 || dims.h == 0 || dims.k == 0) {
    throw Error(ErrorCategory::kDimension, "policy dims d, h, k must be >= 1");
  }
  dims.vocab = vocab.size();
  auto p = PolicyParams::zeros(dims);
  Rng rng(derive_seed(seed, "init_params"));
  auto fill = [&rng](std::vector<double>& v, std::size_t fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : v) x = rng.normal(0.0, scale);
  };
  fill(p.embeddings, dims.d);
  fill(p.context_weights, dims.input_width());
  fill(p.output_weights, dims.h);
  return p;
}

inline std::vector<double> prompt_summary(const PolicyParams& params,
                                          std::span<const TokenId> prompt) {
  const std::size_t d = params.dims.d;
  std::vector<double> s(d, 0.0);
  if (prompt.empty()) return s;
  for (TokenId t : prompt) {
    const double* row = &params.embeddings[static_cast<std::size_t>(t) * d];
    for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(prompt.size());
  for (double& x : s) x *= inv;
  return s;
}

// Activations of one forward step, kept for backprop.
struct StepForward {
  std::vector<double> input;   // (k+1)d
  std::vector<double> hidden;  // z
  std::vector<double> logits;
};

inline StepForward forward_step(const PolicyParams& params,
                                std::span<const double> summary,
                                std::span<const TokenId> context) {
  const auto& dm = params.dims;
  if (context.size() != dm.k || summary.size() != dm.d) {
    throw Error(ErrorCategory::kDimension, "context/summary width mismatch");
  }
  StepForward f;
  f.input.resize(dm.input_width());
  for (std::size_t i = 0; i < dm.k; ++i) {
    const auto t = static_cast<std::size_t>(context[i]);
    if (t >= dm.vocab) {
      throw Error(ErrorCategory::kArgument, "token id out of range");
    }
    std::copy_n(&params.embeddings[t * dm.d], dm.d, &f.input[i * dm.d]);
  }
  std::copy(summary.begin(), summary.end(), f.input.begin() + dm.k * dm.d);

  const std::size_t in = dm.input_width();
  f.hidden.resize(dm.h);
  for (std::size_t j = 0; j < dm.h; ++j) {
    const double* w = &params.context_weights[j * in];
    double a = params.hidden_bias[j];
    for (std::size_t m = 0; m < in; ++m) a += w[m] * f.input[m];
    f.hidden[j] = std::tanh(a);
  }
  f.logits = params.output_bias;
  for (std::size_t j = 0; j < dm.h; ++j) {
    const double zj = f.hidden[j];
    const double* w = &params.output_weights[j * dm.vocab];
    for (std::size_t v = 0; v < dm.vocab; ++v) f.logits[v] += zj * w[v];
  }
  return f;
}

inline std::vector<double> next_token_logits(const PolicyParams& params,
                                             std::span<const double> summary,
                                             std::span<const TokenId> context) {
  return forward_step(params, summary, context).logits;
}

inline std::vector<double> softmax(std::span<const double> logits,
                                   double temperature = 1.0) {
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

inline double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

// Sliding k-token window, left-padded with <bos>.
class ContextWindow {
 public:
  explicit ContextWindow(std::size_t k) : ids_(k, Vocabulary::kBos) {}
  std::span<const TokenId> view() const { return ids_; }
  void push(TokenId t) {
    std::rotate(ids_.begin(), ids_.begin() + 1, ids_.end());
    ids_.back() = t;
  }

 private:
  std::vector<TokenId> ids_;
};

struct Completion {
  std::vector<TokenId> tokens;
  std::vector<double> new_logprobs;
  std::vector<double> old_logprobs;
  std::vector<double> ref_logprobs;
  std::string text;

  std::size_t size() const { return tokens.size(); }
};

inline void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCategory::kArgument, "temperature must be positive");
  }
}

// log pi(tokens[t] | prefix) for every position t.
inline std::vector<double> score_sequence(const PolicyParams& params,
                                          std::span<const TokenId> prompt,
                                          std::span<const TokenId> tokens,
                                          double temperature = 1.0) {
  check_temperature(temperature);
  if (tokens.empty()) {
    throw Error(ErrorCategory::kArgument, "cannot score an empty sequence");
  }
  const auto summary = prompt_summary(params, prompt);
  ContextWindow ctx(params.dims.k);
  std::vector<double> out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= params.dims.vocab) {
      throw Error(ErrorCategory::kArgument,
                  "unknown token id " + std::to_string(t));
    }
    const auto probs = softmax(next_token_logits(params, summary, ctx.view()),
                               temperature);
    out.push_back(floored_log(probs[static_cast<std::size_t>(t)]));
    ctx.push(t);
  }
  return out;
}

// Categorical sampling until <eos> or max_tokens. When `ref` is given its
// log-probabilities fill ref_logprobs; otherwise they mirror the sampler's.
inline Completion sample_completion(const PolicyParams& params,
                                    const Vocabulary& vocab,
                                    std::span<const TokenId> prompt,
                                    double temperature, std::size_t max_tokens,
                                    std::uint64_t rng_seed,
                                    const PolicyParams* ref = nullptr) {
  check_temperature(temperature);
  if (max_tokens < 1) {
    throw Error(ErrorCategory::kArgument, "max_tokens must be >= 1");
  }
  Rng rng(rng_seed);
  const auto summary = prompt_summary(params, prompt);
  ContextWindow ctx(params.dims.k);
  Completion c;
  while (c.tokens.size() < max_tokens) {
    const auto probs = softmax(next_token_logits(params, summary, ctx.view()),
                               temperature);
    const auto t = static_cast<TokenId>(rng.categorical(probs));
    c.tokens.push_back(t);
    c.new_logprobs.push_back(floored_log(probs[static_cast<std::size_t>(t)]));
    ctx.push(t);
    if (t == Vocabulary::kEos) break;
  }
  c.old_logprobs = c.new_logprobs;
  c.ref_logprobs = ref ? score_sequence(*ref, prompt, c.tokens, temperature)
                       : c.new_logprobs;
  c.text = vocab.detokenize(c.tokens);
  return c;
}

// Argmax decoding; ties go to the lowest id.
inline Completion greedy_completion(const PolicyParams& params,
                                    const Vocabulary& vocab,
                                    std::span<const TokenId> prompt,
                                    std::size_t max_tokens) {
  const auto summary = prompt_summary(params, prompt);
  ContextWindow ctx(params.dims.k);
  Completion c;
  while (c.tokens.size() < max_tokens) {
    const auto logits = next_token_logits(params, summary, ctx.view());
    const auto probs = softmax(logits);
    const auto t = static_cast<TokenId>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    c.tokens.push_back(t);
    c.new_logprobs.push_back(floored_log(probs[static_cast<std::size_t>(t)]));
    ctx.push(t);
    if (t == Vocabulary::kEos) break;
  }
  c.old_logprobs = c.new_logprobs;
  c.ref_logprobs = c.new_logprobs;
  c.text = vocab.detokenize(c.tokens);
  return c;
}

// grad += d/dparams sum_t weights[t] * log pi(tokens[t] | prefix).
inline void accumulate_weighted_grad(const PolicyParams& params,
                                     std::span<const TokenId> prompt,
                                     std::span<const TokenId> tokens,
                                     std::span<const double> weights,
                                     PolicyGrad& grad,
                                     double temperature = 1.0) {
  check_temperature(temperature);
  if (weights.size() != tokens.size()) {
    throw Error(ErrorCategory::kArgument,
                "weights length must equal tokens length");
  }
  params.check_same_shape(grad);
  const auto& dm = params.dims;
  const std::size_t in = dm.input_width();
  const auto summary = prompt_summary(params, prompt);
  std::vector<double> d_summary(dm.d, 0.0);
  std::vector<double> d_logits(dm.vocab), d_hidden(dm.h), d_input(in);
  ContextWindow ctx(dm.k);

  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto y = static_cast<std::size_t>(tokens[t]);
    if (y >= dm.vocab) {
      throw Error(ErrorCategory::kArgument, "unknown token id");
    }
    const auto context = ctx.view();
    const double w = weights[t];
    if (w != 0.0) {
      const auto f = forward_step(params, summary, context);
      const auto probs = softmax(f.logits, temperature);
      for (std::size_t v = 0; v < dm.vocab; ++v) {
        d_logits[v] = w * ((v == y ? 1.0 : 0.0) - probs[v]) / temperature;
        grad.output_bias[v] += d_logits[v];
      }
      for (std::size_t j = 0; j < dm.h; ++j) {
        const double zj = f.hidden[j];
        const double* wo = &params.output_weights[j * dm.vocab];
        double* go = &grad.output_weights[j * dm.vocab];
        double dz = 0.0;
        for (std::size_t v = 0; v < dm.vocab; ++v) {
          go[v] += zj * d_logits[v];
          dz += wo[v] * d_logits[v];
        }
        d_hidden[j] = dz * (1.0 - zj * zj);
        grad.hidden_bias[j] += d_hidden[j];
      }
      std::fill(d_input.begin(), d_input.end(), 0.0);
      for (std::size_t j = 0; j < dm.h; ++j) {
        const double da = d_hidden[j];
        const double* wc = &params.context_weights[j * in];
        double* gc = &grad.context_weights[j * in];
        for (std::size_t m = 0; m < in; ++m) {
          gc[m] += da * f.input[m];
          d_input[m] += wc[m] * da;
        }
      }
      for (std::size_t i = 0; i < dm.k; ++i) {
        double* ge = &grad.embeddings[static_cast<std::size_t>(context[i]) * dm.d];
        for (std::size_t j = 0; j < dm.d; ++j) ge[j] += d_input[i * dm.d + j];
      }
      for (std::size_t j = 0; j < dm.d; ++j) {
        d_summary[j] += d_input[dm.k * dm.d + j];
      }
    }
    ctx.push(tokens[t]);
  }

  if (!prompt.empty()) {
    const double inv = 1.0 / static_cast<double>(prompt.size());
    for (TokenId p : prompt) {
      double* ge = &grad.embeddings[static_cast<std::size_t>(p) * dm.d];
      for (std::size_t j = 0; j < dm.d; ++j) ge[j] += d_summary[j] * inv;
    }
  }
}

inline PolicyGrad weighted_grad(const PolicyParams& params,
                                std::span<const TokenId> prompt,
                                std::span<const TokenId> tokens,
                                std::span<const double> weights,
                                double temperature = 1.0) {
  auto g = params.zeros_like();
  accumulate_weighted_grad(params, prompt, tokens, weights, g, temperature);
  return g;
}

}  // namespace fasrl
