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

// Verifiable rewards for structured anti-spoofing responses.
//
// A response is expected to look like
//
//   <thinking>free-form reasoning</thinking><answer>real|fake</answer>
//
// and is scored by three rule-based components: a format reward, a class
// consistent reward, and a length-scaled reasoning consistent reward. All
// functions here are pure.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "fasrl/error.hpp"

namespace fasrl {

enum class ClassLabel { kReal, kFake };

inline std::string_view to_string(ClassLabel c) {
  return c == ClassLabel::kReal ? "real" : "fake";
}

inline std::optional<ClassLabel> parse_class_label(std::string_view s) {
  if (s == "real") return ClassLabel::kReal;
  if (s == "fake") return ClassLabel::kFake;
  return std::nullopt;
}

enum class LengthUnit { kCharacters, kTokens };

inline constexpr std::string_view kThinkOpen = "<thinking>";
inline constexpr std::string_view kThinkClose = "</thinking>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

struct RewardConfig {
  // L: reasoning length at which the reasoning reward saturates.
  std::size_t expected_max_length = 1200;
  LengthUnit length_unit = LengthUnit::kCharacters;
  // Surface string (after trim + lowercase) -> class.
  std::map<std::string, ClassLabel> answer_vocabulary = {
      {"real", ClassLabel::kReal}, {"fake", ClassLabel::kFake}};

  void validate() const {
    if (expected_max_length < 1) {
      throw Error(ErrorCategory::kConfig,
                  "reward.expected_max_length must be >= 1");
    }
    auto has = [&](const char* key, ClassLabel c) {
      auto it = answer_vocabulary.find(key);
      return it != answer_vocabulary.end() && it->second == c;
    };
    if (!has("real", ClassLabel::kReal) || !has("fake", ClassLabel::kFake)) {
      throw Error(ErrorCategory::kConfig,
                  "reward.answer_vocabulary must map \"real\" and \"fake\" to "
                  "themselves");
    }
  }
};

struct ParsedResponse {
  std::string raw_text;
  std::optional<std::string> thinking;
  std::optional<ClassLabel> answer;
  bool format_ok = false;
  std::size_t reasoning_length = 0;

  // Structural equality; raw_text is excluded because reserialization
  // canonicalizes whitespace and answer casing.
  bool same_parse(const ParsedResponse& o) const {
    return thinking == o.thinking && answer == o.answer &&
           format_ok == o.format_ok && reasoning_length == o.reasoning_length;
  }
};

struct RewardBreakdown {
  double format = 0.0;
  double cls = 0.0;
  double res = 0.0;
  double total = 0.0;
};

namespace detail {

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline bool all_space(std::string_view s) {
  return std::all_of(s.begin(), s.end(), is_space);
}

inline std::size_t count_occurrences(std::string_view hay,
                                     std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

inline std::string normalize_answer(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

inline std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

// Content span [begin, end) of the first open-tag and the first close-tag
// after it.
struct Span {
  std::size_t open = std::string_view::npos;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t close_end = 0;
  bool found = false;
};

inline Span find_block(std::string_view raw, std::string_view open,
                       std::string_view close) {
  Span s;
  auto o = raw.find(open);
  if (o == std::string_view::npos) return s;
  auto c = raw.find(close, o + open.size());
  if (c == std::string_view::npos) return s;
  s.open = o;
  s.begin = o + open.size();
  s.end = c;
  s.close_end = c + close.size();
  s.found = true;
  return s;
}

}  // namespace detail

inline std::size_t measure_reasoning(std::string_view thinking,
                                     LengthUnit unit) {
  return unit == LengthUnit::kCharacters ? thinking.size()
                                         : detail::count_words(thinking);
}

// Never fails: malformed input yields format_ok == false.
inline ParsedResponse parse_response(std::string_view raw,
                                     const RewardConfig& cfg = {}) {
  using detail::all_space;
  ParsedResponse p;
  p.raw_text = std::string(raw);

  const auto think = detail::find_block(raw, kThinkOpen, kThinkClose);
  const auto ans = detail::find_block(raw, kAnswerOpen, kAnswerClose);

  if (think.found) {
    p.thinking = std::string(raw.substr(think.begin, think.end - think.begin));
    p.reasoning_length = measure_reasoning(*p.thinking, cfg.length_unit);
  }
  if (ans.found) {
    auto key = detail::normalize_answer(
        raw.substr(ans.begin, ans.end - ans.begin));
    auto it = cfg.answer_vocabulary.find(key);
    if (it != cfg.answer_vocabulary.end()) p.answer = it->second;
  }

  const bool single_tags =
      detail::count_occurrences(raw, kThinkOpen) == 1 &&
      detail::count_occurrences(raw, kThinkClose) == 1 &&
      detail::count_occurrences(raw, kAnswerOpen) == 1 &&
      detail::count_occurrences(raw, kAnswerClose) == 1;
  p.format_ok =
      single_tags && p.thinking && p.answer && think.close_end <= ans.open &&
      all_space(raw.substr(0, think.open)) &&
      all_space(raw.substr(think.close_end, ans.open - think.close_end)) &&
      all_space(raw.substr(ans.close_end));
  return p;
}

// Canonical text for a parse; parse_response(serialize(p)) reproduces p for
// every well-formed p.
inline std::string serialize(const ParsedResponse& p) {
  std::string out;
  if (p.thinking) {
    out += kThinkOpen;
    out += *p.thinking;
    out += kThinkClose;
  }
  if (p.answer) {
    out += kAnswerOpen;
    out += to_string(*p.answer);
    out += kAnswerClose;
  }
  return out;
}

inline double format_reward(const ParsedResponse& p) {
  return p.format_ok ? 1.0 : 0.0;
}

inline double class_reward(const ParsedResponse& p, ClassLabel gold) {
  return p.answer && *p.answer == gold ? 1.0 : 0.0;
}

// +min(1, len/L) for a correct class, -min(1, len/L) otherwise. A missing
// prediction counts as incorrect.
inline double reasoning_reward(const ParsedResponse& p, ClassLabel gold,
                               const RewardConfig& cfg) {
  const double len = static_cast<double>(p.reasoning_length);
  const double mag =
      std::min(1.0, len / static_cast<double>(cfg.expected_max_length));
  if (mag == 0.0) return 0.0;
  return class_reward(p, gold) == 1.0 ? mag : -mag;
}

inline RewardBreakdown total_reward(const ParsedResponse& p, ClassLabel gold,
                                    const RewardConfig& cfg) {
  RewardBreakdown r;
  r.format = format_reward(p);
  r.cls = class_reward(p, gold);
  r.res = reasoning_reward(p, gold, cfg);
  r.total = r.format + r.cls + r.res;
  return r;
}

}  // namespace fasrl
