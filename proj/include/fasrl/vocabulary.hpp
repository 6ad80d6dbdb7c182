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

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fasrl/error.hpp"
#include "fasrl/reward.hpp"

namespace fasrl {

using TokenId = std::int32_t;

inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";

// Ordered token list. Structural tokens occupy ids 0..7 in a fixed order;
// word tokens follow. Tags render verbatim, <eos> renders as nothing, and
// consecutive word tokens are separated by one space.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kThinkOpenId = 2;
  static constexpr TokenId kThinkCloseId = 3;
  static constexpr TokenId kAnswerOpenId = 4;
  static constexpr TokenId kAnswerCloseId = 5;
  static constexpr TokenId kRealId = 6;
  static constexpr TokenId kFakeId = 7;
  static constexpr std::size_t kStructuralCount = 8;

  Vocabulary() = default;

  // Structural tokens followed by `words` (duplicates of earlier entries are
  // skipped, order otherwise preserved).
  static Vocabulary with_words(const std::vector<std::string>& words) {
    std::vector<std::string> toks = structural_tokens();
    for (const auto& w : words) {
      bool seen = false;
      for (const auto& t : toks) seen = seen || t == w;
      if (!seen) toks.push_back(w);
    }
    return Vocabulary(std::move(toks));
  }

  // Validates layout; used when reading a checkpoint.
  explicit Vocabulary(std::vector<std::string> tokens)
      : tokens_(std::move(tokens)) {
    const auto required = structural_tokens();
    if (tokens_.size() < kStructuralCount) {
      throw Error(ErrorCategory::kDimension,
                  "vocabulary needs at least 8 tokens");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const auto& t = tokens_[i];
      if (i < kStructuralCount && t != required[i]) {
        throw Error(ErrorCategory::kDimension,
                    "vocabulary slot " + std::to_string(i) + " must be " +
                        required[i]);
      }
      if (t.empty()) {
        throw Error(ErrorCategory::kDimension, "empty vocabulary token");
      }
      if (i >= kStructuralCount) {
        for (char c : t) {
          if (c == '<' || c == '>' || detail::is_space(c)) {
            throw Error(ErrorCategory::kDimension,
                        "word token '" + t + "' contains a reserved character");
          }
        }
      }
      if (!index_.emplace(t, static_cast<TokenId>(i)).second) {
        throw Error(ErrorCategory::kDimension, "duplicate token '" + t + "'");
      }
    }
  }

  static std::vector<std::string> structural_tokens() {
    return {std::string(kBosToken),    std::string(kEosToken),
            std::string(kThinkOpen),   std::string(kThinkClose),
            std::string(kAnswerOpen),  std::string(kAnswerClose),
            "real",                    "fake"};
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const {
    return tokens_.at(static_cast<std::size_t>(id));
  }

  bool contains(std::string_view t) const {
    return index_.count(std::string(t)) != 0;
  }

  TokenId id(std::string_view t) const {
    auto it = index_.find(std::string(t));
    if (it == index_.end()) {
      throw Error(ErrorCategory::kDataset,
                  "unknown token '" + std::string(t) + "'");
    }
    return it->second;
  }

  std::vector<TokenId> ids(const std::vector<std::string>& words) const {
    std::vector<TokenId> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(id(w));
    return out;
  }

  static bool is_tag(TokenId id) {
    return id >= 0 && id < kBos + 6;  // <bos> .. </answer>
  }

  std::string detokenize(const std::vector<TokenId>& ids) const {
    std::string out;
    bool prev_word = false;
    for (TokenId t : ids) {
      if (t == kEos) {
        prev_word = false;
        continue;
      }
      if (is_tag(t)) {
        out += token(t);
        prev_word = false;
      } else {
        if (prev_word) out += ' ';
        out += token(t);
        prev_word = true;
      }
    }
    return out;
  }

  // Inverse of detokenize for text made of tags and space-separated words.
  // Does not append <eos>.
  std::vector<TokenId> tokenize(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
      if (detail::is_space(text[pos])) {
        ++pos;
        continue;
      }
      if (text[pos] == '<') {
        bool matched = false;
        for (TokenId t = 0; t < 6; ++t) {
          const auto& tag = token(t);
          if (text.substr(pos, tag.size()) == tag) {
            out.push_back(t);
            pos += tag.size();
            matched = true;
            break;
          }
        }
        if (!matched) {
          throw Error(ErrorCategory::kDataset,
                      "unknown tag at offset " + std::to_string(pos));
        }
        continue;
      }
      std::size_t end = pos;
      while (end < text.size() && text[end] != '<' &&
             !detail::is_space(text[end])) {
        ++end;
      }
      out.push_back(id(text.substr(pos, end - pos)));
      pos = end;
    }
    return out;
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace fasrl
