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

// Run configuration: a JSON key tree. Resolution order is built-in defaults,
// then the config file, then --override key.path=value entries. Keys outside
// the known schema are rejected, except under "world", whose domain and
// attack tables are free-form.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fasrl/checkpoint.hpp"
#include "fasrl/error.hpp"
#include "fasrl/grpo.hpp"
#include "fasrl/pipeline.hpp"
#include "fasrl/reward.hpp"
#include "fasrl/spoofworld.hpp"

namespace fasrl {

using json = nlohmann::json;

inline const char* kDefaultConfig = R"json({
  "seed": 1,
  "log_interval": 1,
  "checkpoint_interval": 500,
  "policy": {"d": 16, "h": 32, "k": 3},
  "warmup": {
    "steps": 300, "max_reasoning_words": 6, "batch_prompts": 8,
    "optimizer": "adam", "learning_rate": 0.01
  },
  "train": {
    "group_size": 6, "clip_epsilon": 0.2, "kl_beta": 0.04,
    "batch_prompts": 6, "max_steps": 1000, "advantage_std_floor": 1e-8,
    "temperature": 1.0, "inner_epochs": 1, "max_tokens": 24,
    "optimizer": "sgd", "learning_rate": 0.001, "grad_clip": 1.0,
    "momentum": 0.9, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8
  },
  "reward": {
    "expected_max_length": 1200, "length_unit": "characters",
    "answer_vocabulary": {"real": "real", "fake": "fake"}
  },
  "protocol": {
    "name": "A_to_C", "train_domain": "synthA", "test_domain": "synthC",
    "covariate_shift": true, "semantic_shift": true,
    "train_samples": 2000, "holdout_samples": 500, "test_samples": 1000,
    "train_class_balance": 0.5, "test_class_balance": 0.5
  },
  "eval": {"decode": "greedy", "seed": 0, "temperature": 1.0, "max_tokens": 24},
  "world": {
    "question_tokens": ["inspect", "face", "authenticity"],
    "reasoning_words": ["consistent", "suspicious", "likely"],
    "attacks": {
      "print": {"signature_tokens": ["paper_texture", "halftone_dots", "flat_surface"], "visibility": 0.6},
      "replay": {"signature_tokens": ["moire_pattern", "screen_glare", "flat_surface"], "visibility": 0.6},
      "cut_photo": {"signature_tokens": ["cut_edges", "paper_texture", "flat_surface"], "visibility": 0.6},
      "mask_3d": {"signature_tokens": ["rigid_surface", "mask_seam", "uniform_skin"], "visibility": 0.6},
      "silicone_mask": {"signature_tokens": ["silicone_sheen", "mask_seam", "uniform_skin"], "visibility": 0.6},
      "makeup": {"signature_tokens": ["cosmetic_layer", "color_shift"], "visibility": 0.6, "genuine_leak": 0.3},
      "wig": {"signature_tokens": ["hair_boundary", "occlusion_edge"], "visibility": 0.6, "genuine_leak": 0.3},
      "paper_glasses": {"signature_tokens": ["frame_edge", "occlusion_edge", "paper_texture"], "visibility": 0.6, "genuine_leak": 0.3}
    },
    "domains": {
      "synthA": {
        "style_tokens": ["lab_light", "white_wall", "webcam", "frontal_pose", "indoor"],
        "attack_types": ["print", "replay", "mask_3d", "makeup"]
      },
      "synthB": {
        "style_tokens": ["sunlight", "street_bg", "phone_cam", "tilted_pose", "outdoor"],
        "attack_types": ["print", "replay", "wig", "makeup"]
      },
      "synthC": {
        "style_tokens": ["dim_light", "office_bg", "dslr_cam", "side_pose", "fluorescent"],
        "attack_types": ["replay", "cut_photo", "silicone_mask", "paper_glasses"]
      }
    },
    "real_face_tokens": ["skin_pores", "natural_blink", "depth_cue", "micro_motion", "blood_flow"],
    "real_visibility": 0.5,
    "style_count": 3,
    "style_jitter": 0.5
  }
})json";

inline json default_config() { return json::parse(kDefaultConfig); }

namespace detail {

inline void merge_config(json& dst, const json& src, const std::string& path,
                         bool strict) {
  if (!src.is_object()) {
    throw Error(ErrorCategory::kConfig,
                (path.empty() ? std::string("config") : path) +
                    " must be an object");
  }
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    const bool free_form = key == "world" || !strict;
    if (!dst.contains(it.key())) {
      if (strict && key.rfind("world", 0) != 0) {
        throw Error(ErrorCategory::kConfig, "unknown config field " + key);
      }
      dst[it.key()] = it.value();
      continue;
    }
    auto& d = dst[it.key()];
    if (d.is_object() && it.value().is_object()) {
      merge_config(d, it.value(), key, strict && !free_form);
    } else {
      d = it.value();
    }
  }
}

inline json parse_override_value(const std::string& v) {
  try {
    return json::parse(v);
  } catch (const json::parse_error&) {
    return json(v);
  }
}

}  // namespace detail

inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCategory::kConfig,
                "override '" + assignment + "' must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  json* node = &cfg;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const bool last = i + 1 == parts.size();
    if (!node->is_object() ||
        (!node->contains(parts[i]) && path.rfind("world.", 0) != 0)) {
      throw Error(ErrorCategory::kConfig, "unknown config field " + path);
    }
    node = &(*node)[parts[i]];
    if (last) *node = detail::parse_override_value(assignment.substr(eq + 1));
  }
}

inline json resolve_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::string>& overrides,
                           std::optional<std::uint64_t> seed = std::nullopt) {
  json cfg = default_config();
  if (file) {
    if (!std::filesystem::exists(*file)) {
      throw Error(ErrorCategory::kConfig,
                  "config file not found: " + file->string());
    }
    json user;
    try {
      user = json::parse(read_file(*file));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCategory::kConfig,
                  "config file is not valid JSON: " + std::string(e.what()));
    }
    detail::merge_config(cfg, user, "", true);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  if (seed) cfg["seed"] = *seed;
  return cfg;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

// Canonical dump (object keys sorted) hashed with FNV-1a.
inline std::string config_fingerprint(const json& cfg) {
  return hex64(fnv1a64(cfg.dump()));
}

struct ProtocolConfig {
  std::string name;
  std::string train_domain;
  std::string test_domain;
  ShiftSpec shift;
  SplitCounts counts;
  double train_class_balance = 0.5;
  double test_class_balance = 0.5;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t log_interval = 1;
  std::size_t checkpoint_interval = 500;
  PolicyDims dims;
  WarmupConfig warmup;
  TrainConfig train;
  RewardConfig reward;
  ProtocolConfig protocol;
  DecodeSpec decode;
  World world;
  json resolved;
};

namespace detail {

// Typed field access with diagnostics that name the dotted path.
class Fields {
 public:
  Fields(const json& root, std::string prefix) : root_(root), prefix_(std::move(prefix)) {}

  const json& node(const std::string& key) const {
    if (!root_.is_object() || !root_.contains(key)) {
      throw Error(ErrorCategory::kConfig, "missing config field " + name(key));
    }
    return root_.at(key);
  }
  bool has(const std::string& key) const {
    return root_.is_object() && root_.contains(key);
  }
  std::string name(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }
  Fields sub(const std::string& key) const { return {node(key), name(key)}; }

  double number(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_number()) {
      throw Error(ErrorCategory::kConfig, name(key) + " must be a number");
    }
    return n.get<double>();
  }
  std::size_t count(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_number_integer() || n.get<long long>() < 0) {
      throw Error(ErrorCategory::kConfig,
                  name(key) + " must be a non-negative integer");
    }
    return n.get<std::size_t>();
  }
  std::uint64_t u64(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_number_unsigned() && !(n.is_number_integer() && n.get<long long>() >= 0)) {
      throw Error(ErrorCategory::kConfig,
                  name(key) + " must be a non-negative integer");
    }
    return n.get<std::uint64_t>();
  }
  bool flag(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_boolean()) {
      throw Error(ErrorCategory::kConfig, name(key) + " must be true or false");
    }
    return n.get<bool>();
  }
  std::string text(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_string()) {
      throw Error(ErrorCategory::kConfig, name(key) + " must be a string");
    }
    return n.get<std::string>();
  }
  std::vector<std::string> words(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_array()) {
      throw Error(ErrorCategory::kConfig, name(key) + " must be a list of strings");
    }
    std::vector<std::string> out;
    for (const auto& e : n) {
      if (!e.is_string()) {
        throw Error(ErrorCategory::kConfig, name(key) + " must be a list of strings");
      }
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  const json& raw() const { return root_; }

 private:
  const json& root_;
  std::string prefix_;
};

inline OptimizerConfig read_optimizer(const Fields& f) {
  OptimizerConfig o;
  o.kind = parse_optimizer_kind(f.text("optimizer"));
  o.learning_rate = f.number("learning_rate");
  if (f.has("grad_clip")) o.grad_clip = f.number("grad_clip");
  if (f.has("momentum")) o.momentum = f.number("momentum");
  if (f.has("beta1")) o.beta1 = f.number("beta1");
  if (f.has("beta2")) o.beta2 = f.number("beta2");
  if (f.has("eps")) o.eps = f.number("eps");
  o.validate(f.name("optimizer").substr(0, f.name("optimizer").rfind('.')));
  return o;
}

inline World read_world(const Fields& w) {
  World world;
  world.question_tokens = w.words("question_tokens");
  world.reasoning_words = w.words("reasoning_words");
  const auto attacks = w.sub("attacks");
  if (!attacks.raw().is_object() || attacks.raw().empty()) {
    throw Error(ErrorCategory::kConfig, "world.attacks must be a non-empty table");
  }
  for (auto it = attacks.raw().begin(); it != attacks.raw().end(); ++it) {
    const auto a = attacks.sub(it.key());
    AttackType t;
    t.name = it.key();
    t.signature_tokens = a.words("signature_tokens");
    t.visibility = a.has("visibility") ? a.number("visibility") : 1.0;
    t.genuine_leak = a.has("genuine_leak") ? a.number("genuine_leak") : 0.0;
    world.catalog.emplace(t.name, t);
  }
  const auto real = w.words("real_face_tokens");
  const double real_vis = w.number("real_visibility");
  const std::size_t style_count = w.count("style_count");
  const double jitter = w.number("style_jitter");
  const auto domains = w.sub("domains");
  if (!domains.raw().is_object() || domains.raw().empty()) {
    throw Error(ErrorCategory::kConfig, "world.domains must be a non-empty table");
  }
  for (auto it = domains.raw().begin(); it != domains.raw().end(); ++it) {
    const auto d = domains.sub(it.key());
    DomainRecipe r;
    r.name = it.key();
    r.style_tokens = d.words("style_tokens");
    r.attack_types = d.words("attack_types");
    r.real_face_tokens = d.has("real_face_tokens") ? d.words("real_face_tokens") : real;
    r.real_visibility = d.has("real_visibility") ? d.number("real_visibility") : real_vis;
    r.style_count = d.has("style_count") ? d.count("style_count") : style_count;
    r.style_jitter = d.has("style_jitter") ? d.number("style_jitter") : jitter;
    world.recipes.emplace(r.name, r);
  }
  validate_catalog(world.catalog);
  return world;
}

}  // namespace detail

// Converts and validates every section; throws kConfig naming the field.
inline RunConfig parse_run_config(const json& cfg) {
  using detail::Fields;
  const Fields root(cfg, "");
  RunConfig rc;
  rc.resolved = cfg;
  rc.seed = root.u64("seed");
  rc.log_interval = root.count("log_interval");
  rc.checkpoint_interval = root.count("checkpoint_interval");
  if (rc.log_interval < 1) {
    throw Error(ErrorCategory::kConfig, "log_interval must be >= 1");
  }

  const auto pol = root.sub("policy");
  rc.dims.d = pol.count("d");
  rc.dims.h = pol.count("h");
  rc.dims.k = pol.count("k");
  if (rc.dims.d < 1 || rc.dims.h < 1 || rc.dims.k < 1) {
    throw Error(ErrorCategory::kConfig, "policy.d, policy.h, policy.k must be >= 1");
  }

  const auto wu = root.sub("warmup");
  rc.warmup.steps = wu.count("steps");
  rc.warmup.max_reasoning_words = wu.count("max_reasoning_words");
  rc.warmup.batch_prompts = wu.count("batch_prompts");
  rc.warmup.optimizer = detail::read_optimizer(wu);
  if (rc.warmup.max_reasoning_words < 1) {
    throw Error(ErrorCategory::kConfig, "warmup.max_reasoning_words must be >= 1");
  }
  if (rc.warmup.batch_prompts < 1) {
    throw Error(ErrorCategory::kConfig, "warmup.batch_prompts must be >= 1");
  }

  const auto tr = root.sub("train");
  rc.train.group_size = tr.count("group_size");
  rc.train.clip_epsilon = tr.number("clip_epsilon");
  rc.train.kl_beta = tr.number("kl_beta");
  rc.train.batch_prompts = tr.count("batch_prompts");
  rc.train.max_steps = tr.count("max_steps");
  rc.train.advantage_std_floor = tr.number("advantage_std_floor");
  rc.train.temperature = tr.number("temperature");
  rc.train.inner_epochs = tr.count("inner_epochs");
  rc.train.max_tokens = tr.count("max_tokens");
  rc.train.optimizer = detail::read_optimizer(tr);
  rc.train.seed = derive_seed(rc.seed, "train");
  rc.train.validate();

  const auto rw = root.sub("reward");
  const auto lmax = rw.count("expected_max_length");
  rc.reward.expected_max_length = lmax;
  const auto unit = rw.text("length_unit");
  if (unit == "characters") {
    rc.reward.length_unit = LengthUnit::kCharacters;
  } else if (unit == "tokens") {
    rc.reward.length_unit = LengthUnit::kTokens;
  } else {
    throw Error(ErrorCategory::kConfig,
                "reward.length_unit must be \"characters\" or \"tokens\"");
  }
  rc.reward.answer_vocabulary.clear();
  const auto av = rw.sub("answer_vocabulary");
  if (!av.raw().is_object()) {
    throw Error(ErrorCategory::kConfig, "reward.answer_vocabulary must be a table");
  }
  for (auto it = av.raw().begin(); it != av.raw().end(); ++it) {
    const auto cls = parse_class_label(av.text(it.key()));
    if (!cls) {
      throw Error(ErrorCategory::kConfig,
                  av.name(it.key()) + " must map to \"real\" or \"fake\"");
    }
    rc.reward.answer_vocabulary[detail::normalize_answer(it.key())] = *cls;
  }
  rc.reward.validate();

  const auto pr = root.sub("protocol");
  rc.protocol.name = pr.text("name");
  rc.protocol.train_domain = pr.text("train_domain");
  rc.protocol.test_domain = pr.text("test_domain");
  rc.protocol.shift.covariate = pr.flag("covariate_shift");
  rc.protocol.shift.semantic = pr.flag("semantic_shift");
  rc.protocol.counts.train = pr.count("train_samples");
  rc.protocol.counts.holdout = pr.count("holdout_samples");
  rc.protocol.counts.test = pr.count("test_samples");
  rc.protocol.train_class_balance = pr.number("train_class_balance");
  rc.protocol.test_class_balance = pr.number("test_class_balance");
  if (rc.protocol.counts.train < 1) {
    throw Error(ErrorCategory::kConfig, "protocol.train_samples must be >= 1");
  }
  if (rc.protocol.counts.test < 1) {
    throw Error(ErrorCategory::kConfig, "protocol.test_samples must be >= 1");
  }

  const auto ev = root.sub("eval");
  const auto mode = ev.text("decode");
  if (mode != "greedy" && mode != "sampled") {
    throw Error(ErrorCategory::kConfig, "eval.decode must be \"greedy\" or \"sampled\"");
  }
  rc.decode.greedy = mode == "greedy";
  rc.decode.seed = ev.u64("seed");
  rc.decode.temperature = ev.number("temperature");
  rc.decode.max_tokens = ev.count("max_tokens");
  if (!(rc.decode.temperature > 0.0)) {
    throw Error(ErrorCategory::kConfig, "eval.temperature must be > 0");
  }
  if (rc.decode.max_tokens < 1) {
    throw Error(ErrorCategory::kConfig, "eval.max_tokens must be >= 1");
  }

  rc.world = detail::read_world(root.sub("world"));
  for (const auto* d : {&rc.protocol.train_domain, &rc.protocol.test_domain}) {
    if (!rc.world.recipes.count(*d)) {
      throw Error(ErrorCategory::kConfig,
                  "protocol domain '" + *d + "' is not defined under world.domains");
    }
  }
  return rc;
}

inline Protocol build_protocol(const RunConfig& rc) {
  ProtocolRequest req;
  req.name = rc.protocol.name;
  req.train_recipe = rc.world.recipes.at(rc.protocol.train_domain);
  req.test_recipe = rc.world.recipes.at(rc.protocol.test_domain);
  req.shift = rc.protocol.shift;
  req.counts = rc.protocol.counts;
  req.train_class_balance = rc.protocol.train_class_balance;
  req.test_class_balance = rc.protocol.test_class_balance;
  req.question_tokens = rc.world.question_tokens;
  return make_protocol(req, rc.world.catalog, derive_seed(rc.seed, "protocol"));
}

}  // namespace fasrl
