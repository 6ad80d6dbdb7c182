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

// JSON / JSONL encodings for step logs, evaluation reports and dataset
// exports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fasrl/checkpoint.hpp"
#include "fasrl/error.hpp"
#include "fasrl/eval.hpp"
#include "fasrl/grpo.hpp"
#include "fasrl/spoofworld.hpp"

namespace fasrl {

using json = nlohmann::json;

inline json to_json(const StepStats& s) {
  return json{{"step", s.step},
              {"loss", s.loss},
              {"mean_total_reward", s.mean_total_reward},
              {"mean_format", s.mean_format},
              {"mean_cls", s.mean_cls},
              {"mean_res", s.mean_res},
              {"mean_kl", s.mean_kl},
              {"clip_fraction", s.clip_fraction},
              {"grad_norm", s.grad_norm},
              {"zero_std_group_fraction", s.zero_std_group_fraction},
              {"mean_length", s.mean_length}};
}

inline json to_json(const MetricsReport& r) {
  json per = json::object();
  for (const auto& [name, g] : r.per_attack_type) {
    per[name] = {{"count", g.count}, {"errors", g.errors}, {"rate", g.rate}};
  }
  return json{{"n_real", r.n_real},
              {"n_fake", r.n_fake},
              {"false_rejections", r.false_rejections},
              {"false_acceptances", r.false_acceptances},
              {"invalid", r.invalid},
              {"frr", r.frr},
              {"far", r.far},
              {"hter", r.hter},
              {"frr_undefined", r.frr_undefined},
              {"far_undefined", r.far_undefined},
              {"per_attack_type", per}};
}

inline MetricsReport metrics_from_json(const json& j) {
  try {
    MetricsReport r;
    r.n_real = j.at("n_real").get<std::size_t>();
    r.n_fake = j.at("n_fake").get<std::size_t>();
    r.false_rejections = j.at("false_rejections").get<std::size_t>();
    r.false_acceptances = j.at("false_acceptances").get<std::size_t>();
    r.invalid = j.at("invalid").get<std::size_t>();
    r.frr = j.at("frr").get<double>();
    r.far = j.at("far").get<double>();
    r.hter = j.at("hter").get<double>();
    r.frr_undefined = j.at("frr_undefined").get<bool>();
    r.far_undefined = j.at("far_undefined").get<bool>();
    for (auto it = j.at("per_attack_type").begin();
         it != j.at("per_attack_type").end(); ++it) {
      GroupErrors g;
      g.count = it.value().at("count").get<std::size_t>();
      g.errors = it.value().at("errors").get<std::size_t>();
      g.rate = it.value().at("rate").get<double>();
      r.per_attack_type[it.key()] = g;
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kDataset,
                std::string("malformed metrics report: ") + e.what());
  }
}

inline json to_json(const InstructionTriplet& s) {
  return json{{"id", s.id},
              {"domain", s.domain},
              {"image_tokens", s.image_tokens},
              {"question_tokens", s.question_tokens},
              {"label", std::string(to_string(s.label))},
              {"attack_type", s.attack_type ? json(*s.attack_type) : json(nullptr)}};
}

inline InstructionTriplet triplet_from_json(const json& j) {
  try {
    InstructionTriplet s;
    s.id = j.at("id").get<std::string>();
    s.domain = j.at("domain").get<std::string>();
    s.image_tokens = j.at("image_tokens").get<std::vector<std::string>>();
    s.question_tokens = j.at("question_tokens").get<std::vector<std::string>>();
    const auto label = parse_class_label(j.at("label").get<std::string>());
    if (!label) throw Error(ErrorCategory::kDataset, "label must be real or fake");
    s.label = *label;
    if (!j.at("attack_type").is_null()) {
      s.attack_type = j.at("attack_type").get<std::string>();
    }
    if ((s.label == ClassLabel::kFake) != s.attack_type.has_value()) {
      throw Error(ErrorCategory::kDataset,
                  "sample '" + s.id + "': attack_type must be set iff label is fake");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kDataset, std::string("malformed record: ") + e.what());
  }
}

inline std::string to_jsonl(const std::vector<InstructionTriplet>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<InstructionTriplet> triplets_from_jsonl(const std::string& text) {
  std::vector<InstructionTriplet> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw Error(ErrorCategory::kDataset,
                  "line " + std::to_string(n) + " is not valid JSON");
    }
    out.push_back(triplet_from_json(j));
  }
  return out;
}

inline json to_json(const PredictionOutcome& o) {
  return json{{"id", o.sample_id},
              {"gold", std::string(to_string(o.gold))},
              {"predicted", to_string(o.predicted)},
              {"attack_type", o.attack_type ? json(*o.attack_type) : json(nullptr)},
              {"response", o.response_text}};
}

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Human-readable table; percentages at two decimals.
inline void print_report(std::ostream& os, const std::string& title,
                         const MetricsReport& r) {
  os << title << "\n";
  os << "  FRR " << fmt2(r.frr) << "%  FAR " << fmt2(r.far) << "%  HTER "
     << fmt2(r.hter) << "%  (real " << r.n_real << ", fake " << r.n_fake
     << ", invalid " << r.invalid << ")\n";
  for (const auto& [name, g] : r.per_attack_type) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "    %-16s %6zu  %7s%%\n", name.c_str(),
                  g.count, fmt2(g.rate).c_str());
    os << buf;
  }
}

// Appends one JSON object per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCategory::kIo, "cannot write " + path.string());
  }
  void write(const json& j) {
    out_ << j.dump() << '\n';
  }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  write_file(path, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::kDataset,
                path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace fasrl
