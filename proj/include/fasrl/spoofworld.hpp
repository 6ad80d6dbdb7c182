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

// SpoofWorld: a procedural stand-in for cross-domain face anti-spoofing data.
//
// An "image" is a bag of tokens: spoof-irrelevant style tokens (lighting,
// background, device) plus evidence tokens. Genuine faces surface genuine
// cues; presentation attacks surface the signature tokens of their attack
// type and, for partial attacks, may also leak genuine cues. Protocols pair
// a training domain with a test domain and can introduce covariate shift
// (disjoint style pools) and semantic shift (unseen attack types).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fasrl/error.hpp"
#include "fasrl/reward.hpp"
#include "fasrl/rng.hpp"

namespace fasrl {

struct AttackType {
  std::string name;
  std::vector<std::string> signature_tokens;
  double visibility = 1.0;    // P(each signature token surfaces)
  double genuine_leak = 0.0;  // P(each genuine cue also surfaces)

  bool operator==(const AttackType&) const = default;
};

using AttackCatalog = std::map<std::string, AttackType>;

struct DomainRecipe {
  std::string name;
  std::vector<std::string> style_tokens;
  std::size_t style_count = 3;  // style tokens per image
  double style_jitter = 0.5;    // spread of per-domain style weights
  std::vector<std::string> attack_types;
  std::vector<std::string> real_face_tokens;
  double real_visibility = 0.5;
};

struct Domain {
  std::string name;
  std::vector<std::string> style_tokens;
  std::vector<double> style_weights;
  std::size_t style_count = 3;
  std::vector<AttackType> attack_types;
  std::vector<std::string> real_face_tokens;
  double real_visibility = 0.5;

  bool operator==(const Domain&) const = default;

  std::set<std::string> attack_names() const {
    std::set<std::string> s;
    for (const auto& a : attack_types) s.insert(a.name);
    return s;
  }
};

struct InstructionTriplet {
  std::string id;
  std::string domain;
  std::vector<std::string> image_tokens;
  std::vector<std::string> question_tokens;
  ClassLabel label = ClassLabel::kReal;
  std::optional<std::string> attack_type;

  bool operator==(const InstructionTriplet&) const = default;
};

struct ShiftSpec {
  bool covariate = true;
  bool semantic = true;
};

struct SplitCounts {
  std::size_t train = 2000;
  std::size_t holdout = 500;
  std::size_t test = 1000;
};

struct Protocol {
  std::string name;
  Domain train_domain;
  Domain test_domain;
  ShiftSpec shift;
  SplitCounts counts;
  std::uint64_t seed = 0;
  std::vector<InstructionTriplet> train;
  std::vector<InstructionTriplet> holdout;  // train-domain, disjoint draws
  std::vector<InstructionTriplet> test;     // test-domain

  std::set<std::string> unseen_attack_types() const;
};

inline std::set<std::string> attack_set_difference(
    const std::set<std::string>& test, const std::set<std::string>& train) {
  std::set<std::string> out;
  std::set_difference(test.begin(), test.end(), train.begin(), train.end(),
                      std::inserter(out, out.end()));
  return out;
}

inline std::set<std::string> Protocol::unseen_attack_types() const {
  return attack_set_difference(test_domain.attack_names(),
                               train_domain.attack_names());
}

inline void validate_catalog(const AttackCatalog& catalog) {
  std::map<std::set<std::string>, std::string> seen;
  for (const auto& [name, a] : catalog) {
    if (a.name != name) {
      throw Error(ErrorCategory::kConfig,
                  "attack entry '" + name + "' has mismatched name");
    }
    if (a.signature_tokens.empty()) {
      throw Error(ErrorCategory::kConfig,
                  "attack '" + name + "' needs signature tokens");
    }
    if (!(a.visibility > 0.0 && a.visibility <= 1.0)) {
      throw Error(ErrorCategory::kConfig,
                  "attack '" + name + "' visibility must be in (0, 1]");
    }
    if (!(a.genuine_leak >= 0.0 && a.genuine_leak <= 1.0)) {
      throw Error(ErrorCategory::kConfig,
                  "attack '" + name + "' genuine_leak must be in [0, 1]");
    }
    std::set<std::string> sig(a.signature_tokens.begin(),
                              a.signature_tokens.end());
    auto [it, fresh] = seen.emplace(sig, name);
    if (!fresh) {
      throw Error(ErrorCategory::kConfig, "attacks '" + it->second + "' and '" +
                                              name +
                                              "' have identical signatures");
    }
  }
}

inline std::set<std::string> signature_pool(const AttackCatalog& catalog) {
  std::set<std::string> s;
  for (const auto& [_, a] : catalog) {
    s.insert(a.signature_tokens.begin(), a.signature_tokens.end());
  }
  return s;
}

// Style weights are 1 + jitter * u, u ~ U[0,1), drawn from `seed`.
inline Domain gen_domain(const DomainRecipe& recipe,
                         const AttackCatalog& catalog, std::uint64_t seed) {
  validate_catalog(catalog);
  const auto signatures = signature_pool(catalog);
  const std::set<std::string> genuine(recipe.real_face_tokens.begin(),
                                      recipe.real_face_tokens.end());
  if (recipe.style_tokens.empty() || recipe.real_face_tokens.empty() ||
      recipe.attack_types.empty()) {
    throw Error(ErrorCategory::kConfig,
                "domain '" + recipe.name +
                    "' needs style tokens, genuine cues, and attack types");
  }
  if (recipe.style_count < 1 ||
      recipe.style_count > recipe.style_tokens.size()) {
    throw Error(ErrorCategory::kConfig,
                "domain '" + recipe.name + "' style_count out of range");
  }
  if (!(recipe.real_visibility > 0.0 && recipe.real_visibility <= 1.0)) {
    throw Error(ErrorCategory::kConfig,
                "domain '" + recipe.name + "' real_visibility must be in (0, 1]");
  }
  for (const auto& s : recipe.style_tokens) {
    if (signatures.count(s) || genuine.count(s)) {
      throw Error(ErrorCategory::kConfig, "domain '" + recipe.name +
                                              "': style token '" + s +
                                              "' overlaps an evidence pool");
    }
  }
  for (const auto& g : recipe.real_face_tokens) {
    if (signatures.count(g)) {
      throw Error(ErrorCategory::kConfig, "domain '" + recipe.name +
                                              "': genuine cue '" + g +
                                              "' is also a signature token");
    }
  }

  Domain d;
  d.name = recipe.name;
  d.style_tokens = recipe.style_tokens;
  d.style_count = recipe.style_count;
  d.real_face_tokens = recipe.real_face_tokens;
  d.real_visibility = recipe.real_visibility;
  Rng rng(derive_seed(seed, "style_weights/" + recipe.name));
  for (std::size_t i = 0; i < d.style_tokens.size(); ++i) {
    d.style_weights.push_back(1.0 + recipe.style_jitter * rng.uniform());
  }
  for (const auto& name : recipe.attack_types) {
    auto it = catalog.find(name);
    if (it == catalog.end()) {
      throw Error(ErrorCategory::kConfig, "domain '" + recipe.name +
                                              "' lists unknown attack '" +
                                              name + "'");
    }
    d.attack_types.push_back(it->second);
  }
  return d;
}

namespace detail {

// Each token surfaces with probability p; at least one is forced.
inline void surface_tokens(const std::vector<std::string>& pool, double p,
                           Rng& rng, std::vector<std::string>& out,
                           bool force_one) {
  const auto before = out.size();
  for (const auto& t : pool) {
    if (rng.bernoulli(p)) out.push_back(t);
  }
  if (force_one && out.size() == before) out.push_back(pool[rng.index(pool.size())]);
}

}  // namespace detail

inline InstructionTriplet gen_sample(const Domain& domain, double class_balance,
                                     const std::vector<std::string>& question,
                                     Rng& rng) {
  InstructionTriplet s;
  s.domain = domain.name;
  s.question_tokens = question;
  s.label = rng.uniform() < class_balance ? ClassLabel::kReal : ClassLabel::kFake;

  std::vector<std::string> toks;
  if (s.label == ClassLabel::kReal) {
    detail::surface_tokens(domain.real_face_tokens, domain.real_visibility, rng,
                           toks, true);
  } else {
    const auto& attack = domain.attack_types[rng.index(domain.attack_types.size())];
    s.attack_type = attack.name;
    detail::surface_tokens(attack.signature_tokens, attack.visibility, rng, toks,
                           true);
    if (attack.genuine_leak > 0.0) {
      detail::surface_tokens(domain.real_face_tokens, attack.genuine_leak, rng,
                             toks, false);
    }
  }

  auto weights = domain.style_weights;
  for (std::size_t i = 0; i < domain.style_count; ++i) {
    const auto j = rng.categorical(weights);
    toks.push_back(domain.style_tokens[j]);
    weights[j] = 0.0;
  }
  rng.shuffle(toks);
  s.image_tokens = std::move(toks);
  return s;
}

// Labels a sample from its evidence alone: fake iff any signature token of
// the catalog is present.
inline ClassLabel rule_based_label(const InstructionTriplet& s,
                                   const AttackCatalog& catalog) {
  const auto signatures = signature_pool(catalog);
  for (const auto& t : s.image_tokens) {
    if (signatures.count(t)) return ClassLabel::kFake;
  }
  return ClassLabel::kReal;
}

struct ProtocolRequest {
  std::string name;
  DomainRecipe train_recipe;
  DomainRecipe test_recipe;
  ShiftSpec shift;
  SplitCounts counts;
  double train_class_balance = 0.5;
  double test_class_balance = 0.5;
  std::vector<std::string> question_tokens;
};

inline std::vector<InstructionTriplet> gen_split(
    const Domain& domain, const std::string& split, std::size_t count,
    double class_balance, const std::vector<std::string>& question,
    std::uint64_t split_seed) {
  std::vector<InstructionTriplet> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(split_seed, i));
    auto s = gen_sample(domain, class_balance, question, rng);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    s.id = domain.name + "-" + split + "-" + buf;
    out.push_back(std::move(s));
  }
  return out;
}

inline Protocol make_protocol(const ProtocolRequest& req,
                              const AttackCatalog& catalog, std::uint64_t seed) {
  auto check_balance = [](double b, const char* field) {
    if (!(b >= 0.0 && b <= 1.0)) {
      throw Error(ErrorCategory::kConfig,
                  std::string(field) + " must be in [0, 1]");
    }
  };
  check_balance(req.train_class_balance, "protocol.train_class_balance");
  check_balance(req.test_class_balance, "protocol.test_class_balance");

  const std::set<std::string> train_roster(req.train_recipe.attack_types.begin(),
                                           req.train_recipe.attack_types.end());
  const std::set<std::string> test_roster(req.test_recipe.attack_types.begin(),
                                          req.test_recipe.attack_types.end());
  const auto unseen = attack_set_difference(test_roster, train_roster);
  if (req.shift.semantic && unseen.size() < 2) {
    throw Error(ErrorCategory::kConfig,
                "protocol '" + req.name +
                    "': semantic shift needs >= 2 test attack types unseen in "
                    "training");
  }
  if (!req.shift.semantic && !unseen.empty()) {
    throw Error(ErrorCategory::kConfig,
                "protocol '" + req.name +
                    "': test roster has unseen attacks but semantic shift is off");
  }
  const std::set<std::string> train_style(req.train_recipe.style_tokens.begin(),
                                          req.train_recipe.style_tokens.end());
  const std::set<std::string> test_style(req.test_recipe.style_tokens.begin(),
                                         req.test_recipe.style_tokens.end());
  if (req.shift.covariate) {
    for (const auto& s : test_style) {
      if (train_style.count(s)) {
        throw Error(ErrorCategory::kConfig,
                    "protocol '" + req.name +
                        "': covariate shift needs disjoint style pools, '" + s +
                        "' is shared");
      }
    }
  } else if (train_style != test_style) {
    throw Error(ErrorCategory::kConfig,
                "protocol '" + req.name +
                    "': style pools differ but covariate shift is off");
  }

  Protocol p;
  p.name = req.name;
  p.shift = req.shift;
  p.counts = req.counts;
  p.seed = seed;
  p.train_domain =
      gen_domain(req.train_recipe, catalog, derive_seed(seed, "domain/train"));
  p.test_domain =
      req.test_recipe.name == req.train_recipe.name
          ? p.train_domain
          : gen_domain(req.test_recipe, catalog, derive_seed(seed, "domain/test"));
  p.train = gen_split(p.train_domain, "train", req.counts.train,
                      req.train_class_balance, req.question_tokens,
                      derive_seed(seed, "split/train"));
  p.holdout = gen_split(p.train_domain, "holdout", req.counts.holdout,
                        req.train_class_balance, req.question_tokens,
                        derive_seed(seed, "split/holdout"));
  p.test = gen_split(p.test_domain, "test", req.counts.test,
                     req.test_class_balance, req.question_tokens,
                     derive_seed(seed, "split/test"));
  return p;
}

// Evidence tokens are the image tokens that are not style tokens of the
// sample's domain, kept in image order.
inline std::vector<std::string> evidence_tokens(const InstructionTriplet& s,
                                                const Domain& domain) {
  const std::set<std::string> style(domain.style_tokens.begin(),
                                    domain.style_tokens.end());
  std::vector<std::string> out;
  for (const auto& t : s.image_tokens) {
    if (!style.count(t)) out.push_back(t);
  }
  return out;
}

inline const std::vector<std::string>& gold_lead_words() {
  static const std::vector<std::string> words = {"observed", "noted", "found"};
  return words;
}

// <thinking>LEAD e1 e2 ...</thinking><answer>label</answer>, with the lead
// word and the evidence order chosen by template_seed.
inline std::string gold_response(const InstructionTriplet& s,
                                 const Domain& domain,
                                 std::uint64_t template_seed) {
  Rng rng(derive_seed(template_seed, s.id));
  auto ev = evidence_tokens(s, domain);
  rng.shuffle(ev);
  std::string thinking = gold_lead_words()[rng.index(gold_lead_words().size())];
  for (const auto& e : ev) thinking += " " + e;
  std::string out;
  out += kThinkOpen;
  out += thinking;
  out += kThinkClose;
  out += kAnswerOpen;
  out += to_string(s.label);
  out += kAnswerClose;
  return out;
}

}  // namespace fasrl
