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

#include <cmath>
#include <string>
#include <vector>

#include "fasrl/error.hpp"
#include "fasrl/policy.hpp"

namespace fasrl {

enum class OptimizerKind { kSgd, kMomentum, kAdam };

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "momentum") return OptimizerKind::kMomentum;
  if (s == "adam") return OptimizerKind::kAdam;
  throw Error(ErrorCategory::kConfig,
              "train.optimizer must be one of sgd, momentum, adam");
}

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "sgd";
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 1e-3;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate(const std::string& prefix) const {
    if (!(learning_rate > 0.0)) {
      throw Error(ErrorCategory::kConfig, prefix + ".learning_rate must be > 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw Error(ErrorCategory::kConfig, prefix + ".momentum must be in [0, 1)");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw Error(ErrorCategory::kConfig, prefix + ".beta1/beta2 must be in [0, 1)");
    }
  }
};

// Gradient ascent with global-norm clipping. The caller passes the gradient
// of the quantity to maximize.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  // Returns the pre-clip gradient norm.
  double ascend(PolicyParams& params, PolicyGrad grad) {
    const double norm = std::sqrt(grad.squared_norm());
    if (!std::isfinite(norm)) {
      throw Error(ErrorCategory::kNumeric, "non-finite gradient norm");
    }
    if (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) {
      grad *= cfg_.grad_clip / norm;
    }
    ++t_;
    switch (cfg_.kind) {
      case OptimizerKind::kSgd:
        grad *= cfg_.learning_rate;
        params += grad;
        break;
      case OptimizerKind::kMomentum:
        if (velocity_.dims.vocab == 0) velocity_ = params.zeros_like();
        velocity_ *= cfg_.momentum;
        velocity_ += grad;
        {
          auto step = velocity_;
          step *= cfg_.learning_rate;
          params += step;
        }
        break;
      case OptimizerKind::kAdam:
        adam(params, grad);
        break;
    }
    return norm;
  }

  const OptimizerConfig& config() const { return cfg_; }

 private:
  void adam(PolicyParams& params, const PolicyGrad& grad) {
    if (m_.dims.vocab == 0) {
      m_ = params.zeros_like();
      v_ = params.zeros_like();
    }
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    auto p = params.arrays();
    auto g = grad.arrays_const();
    auto m = m_.arrays();
    auto v = v_.arrays();
    for (std::size_t a = 0; a < p.size(); ++a) {
      for (std::size_t i = 0; i < p[a]->size(); ++i) {
        const double gi = (*g[a])[i];
        double& mi = (*m[a])[i];
        double& vi = (*v[a])[i];
        mi = b1 * mi + (1.0 - b1) * gi;
        vi = b2 * vi + (1.0 - b2) * gi * gi;
        (*p[a])[i] +=
            cfg_.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps);
      }
    }
  }

  OptimizerConfig cfg_;
  long t_ = 0;
  PolicyParams velocity_;
  PolicyParams m_;
  PolicyParams v_;
};

}  // namespace fasrl
