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

// Threshold-free evaluation: the predicted class is read out of the
// <answer> block and compared with the ground truth. Responses without a
// valid answer count as errors for their gold class.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fasrl/error.hpp"
#include "fasrl/reward.hpp"
#include "fasrl/spoofworld.hpp"

namespace fasrl {

enum class Prediction { kReal, kFake, kInvalid };

inline const char* to_string(Prediction p) {
  switch (p) {
    case Prediction::kReal: return "real";
    case Prediction::kFake: return "fake";
    case Prediction::kInvalid: return "invalid";
  }
  return "invalid";
}

inline Prediction extract_prediction(std::string_view response,
                                     const RewardConfig& cfg = {}) {
  const auto p = parse_response(response, cfg);
  if (!p.answer) return Prediction::kInvalid;
  return *p.answer == ClassLabel::kReal ? Prediction::kReal : Prediction::kFake;
}

struct PredictionOutcome {
  std::string sample_id;
  ClassLabel gold = ClassLabel::kReal;
  Prediction predicted = Prediction::kInvalid;
  std::optional<std::string> attack_type;
  std::string response_text;

  bool correct() const {
    return (gold == ClassLabel::kReal && predicted == Prediction::kReal) ||
           (gold == ClassLabel::kFake && predicted == Prediction::kFake);
  }
};

struct GroupErrors {
  std::size_t count = 0;
  std::size_t errors = 0;
  double rate = 0.0;  // percent

  bool operator==(const GroupErrors&) const = default;
};

inline constexpr const char* kRealRow = "real";

struct MetricsReport {
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::size_t false_rejections = 0;
  std::size_t false_acceptances = 0;
  std::size_t invalid = 0;
  double frr = 0.0;
  double far = 0.0;
  double hter = 0.0;
  // Set when the corresponding class is absent and its rate is defined as 0.
  bool frr_undefined = false;
  bool far_undefined = false;
  // Attack name -> error rate over that attack's samples; the genuine class
  // appears as the row "real".
  std::map<std::string, GroupErrors> per_attack_type;

  bool operator==(const MetricsReport&) const = default;
};

inline double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0
                  : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

// Counts stay integers until the final division, so any permutation of
// `outcomes` gives the same report.
inline MetricsReport compute_metrics(const std::vector<PredictionOutcome>& outcomes) {
  MetricsReport r;
  for (const auto& o : outcomes) {
    const bool err = !o.correct();
    if (o.predicted == Prediction::kInvalid) ++r.invalid;
    if (o.gold == ClassLabel::kReal) {
      ++r.n_real;
      if (err) ++r.false_rejections;
      auto& row = r.per_attack_type[kRealRow];
      ++row.count;
      row.errors += err ? 1 : 0;
    } else {
      ++r.n_fake;
      if (err) ++r.false_acceptances;
      auto& row = r.per_attack_type[o.attack_type.value_or("unknown")];
      ++row.count;
      row.errors += err ? 1 : 0;
    }
  }
  for (auto& [_, row] : r.per_attack_type) row.rate = percent(row.errors, row.count);
  r.frr = percent(r.false_rejections, r.n_real);
  r.far = percent(r.false_acceptances, r.n_fake);
  r.frr_undefined = r.n_real == 0;
  r.far_undefined = r.n_fake == 0;
  r.hter = (r.frr + r.far) / 2.0;
  return r;
}

struct Evaluation {
  MetricsReport report;
  std::vector<PredictionOutcome> outcomes;
};

// `responder` maps an InstructionTriplet to a response string.
template <typename Responder>
Evaluation evaluate(Responder&& responder,
                    const std::vector<InstructionTriplet>& samples,
                    const RewardConfig& cfg = {}) {
  if (samples.empty()) {
    throw Error(ErrorCategory::kArgument, "evaluation split is empty");
  }
  Evaluation ev;
  ev.outcomes.reserve(samples.size());
  for (const auto& s : samples) {
    PredictionOutcome o;
    o.sample_id = s.id;
    o.gold = s.label;
    o.attack_type = s.attack_type;
    o.response_text = responder(s);
    o.predicted = extract_prediction(o.response_text, cfg);
    ev.outcomes.push_back(std::move(o));
  }
  ev.report = compute_metrics(ev.outcomes);
  return ev;
}

}  // namespace fasrl
