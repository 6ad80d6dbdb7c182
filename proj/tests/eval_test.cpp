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

#include <algorithm>
#include <random>

#include "fasrl/config.hpp"
#include "fasrl/eval.hpp"
#include "fasrl/pipeline.hpp"

using namespace fasrl;

namespace {

PredictionOutcome outcome(ClassLabel gold, Prediction pred, const char* attack = nullptr) {
  PredictionOutcome o;
  o.gold = gold;
  o.predicted = pred;
  if (attack) o.attack_type = attack;
  return o;
}

}  // namespace

TEST(ExtractPrediction, Cases) {
  EXPECT_EQ(extract_prediction("<thinking>x</thinking><answer>real</answer>"), Prediction::kReal);
  EXPECT_EQ(extract_prediction("<answer> FAKE </answer>"), Prediction::kFake);
  EXPECT_EQ(extract_prediction("<thinking>x</thinking>"), Prediction::kInvalid);
  EXPECT_EQ(extract_prediction("<answer>maybe</answer>"), Prediction::kInvalid);
}

TEST(Metrics, HandComputedCase) {
  const std::vector<PredictionOutcome> v = {
      outcome(ClassLabel::kReal, Prediction::kReal),
      outcome(ClassLabel::kReal, Prediction::kReal),
      outcome(ClassLabel::kReal, Prediction::kFake),
      outcome(ClassLabel::kFake, Prediction::kFake, "print"),
      outcome(ClassLabel::kFake, Prediction::kFake, "print"),
      outcome(ClassLabel::kFake, Prediction::kReal, "replay"),
      outcome(ClassLabel::kFake, Prediction::kInvalid, "replay"),
  };
  const auto r = compute_metrics(v);
  EXPECT_EQ(r.n_real, 3u);
  EXPECT_EQ(r.n_fake, 4u);
  EXPECT_EQ(r.false_rejections, 1u);
  EXPECT_EQ(r.false_acceptances, 2u);
  EXPECT_EQ(r.invalid, 1u);
  EXPECT_NEAR(r.frr, 100.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.far, 50.0, 1e-9);
  EXPECT_NEAR(r.hter, (100.0 / 3.0 + 50.0) / 2.0, 1e-9);
  EXPECT_EQ(r.per_attack_type.at("print").rate, 0.0);
  EXPECT_EQ(r.per_attack_type.at("replay").rate, 100.0);
  EXPECT_EQ(r.per_attack_type.at("real").errors, 1u);
}

TEST(Metrics, InvalidIsAnErrorForBothClasses) {
  const auto r = compute_metrics({outcome(ClassLabel::kReal, Prediction::kInvalid),
                                  outcome(ClassLabel::kFake, Prediction::kInvalid, "wig")});
  EXPECT_EQ(r.frr, 100.0);
  EXPECT_EQ(r.far, 100.0);
  EXPECT_EQ(r.hter, 100.0);
  EXPECT_EQ(r.invalid, 2u);
}

TEST(Metrics, MissingClassIsFlagged) {
  const auto r = compute_metrics({outcome(ClassLabel::kReal, Prediction::kFake)});
  EXPECT_TRUE(r.far_undefined);
  EXPECT_FALSE(r.frr_undefined);
  EXPECT_EQ(r.far, 0.0);
  EXPECT_EQ(r.hter, 50.0);
}

TEST(Metrics, PermutationInvariantAndMatchesDirectCount) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PredictionOutcome> v;
    const int n = 1 + static_cast<int>(gen() % 60);
    int fr = 0, fa = 0, nr = 0, nf = 0;
    for (int i = 0; i < n; ++i) {
      const bool real = gen() % 2;
      const auto pred = static_cast<Prediction>(gen() % 3);
      v.push_back(outcome(real ? ClassLabel::kReal : ClassLabel::kFake, pred, real ? nullptr : "a"));
      if (real) {
        ++nr;
        fr += pred != Prediction::kReal;
      } else {
        ++nf;
        fa += pred != Prediction::kFake;
      }
    }
    const auto r = compute_metrics(v);
    const double frr = nr ? 100.0 * fr / nr : 0.0, far = nf ? 100.0 * fa / nf : 0.0;
    EXPECT_NEAR(r.hter, (frr + far) / 2, 1e-9);
    std::shuffle(v.begin(), v.end(), gen);
    EXPECT_EQ(compute_metrics(v), r);
  }
}

TEST(Evaluate, OracleAndConstantResponders) {
  const auto rc = parse_run_config(default_config());
  const auto p = build_protocol(rc);
  const auto oracle = evaluate(OracleResponder(rc.world.catalog), p.test);
  EXPECT_EQ(oracle.report.hter, 0.0);
  EXPECT_EQ(oracle.outcomes.size(), p.test.size());
  const auto constant = evaluate(
      [](const InstructionTriplet&) { return std::string("<thinking></thinking><answer>real</answer>"); },
      p.test);
  EXPECT_EQ(constant.report.frr, 0.0);
  EXPECT_EQ(constant.report.far, 100.0);
  EXPECT_EQ(constant.report.hter, 50.0);
  EXPECT_THROW(evaluate(OracleResponder(rc.world.catalog), std::vector<InstructionTriplet>{}), Error);
}

TEST(Evaluate, GreedyPolicyEvaluationIsDeterministic) {
  auto rc = parse_run_config(default_config());
  const auto p = build_protocol(rc);
  const auto vocab = build_vocabulary(rc.world);
  const auto params = init_params(rc.dims, vocab, 3);
  const std::vector<InstructionTriplet> some(p.test.begin(), p.test.begin() + 100);
  const auto a = evaluate_policy(params, vocab, some, rc.decode);
  const auto b = evaluate_policy(params, vocab, some, rc.decode);
  EXPECT_EQ(a.report, b.report);
  DecodeSpec sampled{false, 4, 1.0, 24};
  EXPECT_EQ(evaluate_policy(params, vocab, some, sampled).report,
            evaluate_policy(params, vocab, some, sampled).report);
}
