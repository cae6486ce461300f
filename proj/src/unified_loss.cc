// Copyright 2026 The IPMC Authors.
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

#include "ipmc/unified_loss.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "ipmc/errors.h"

namespace ipmc {

namespace {

constexpr double kRangeSlack = 1e-9;

void CheckRange(std::span<const double> values, const char *which) {
  for (double s : values) {
    if (!(s >= -kRangeSlack && s <= 1.0 + kRangeSlack)) {
      throw DomainError(std::string(which) + " similarity " + std::to_string(s) +
                        " outside [0, 1]");
    }
  }
}

}  // namespace

LossMode ParseLossMode(const std::string &name) {
  if (name == "hinge") return LossMode::kHinge;
  if (name == "softened") return LossMode::kSoftened;
  if (name == "leveraged") return LossMode::kLeveraged;
  if (name == "unified") return LossMode::kUnified;
  if (name == "unified-attenuated") return LossMode::kUnifiedAttenuated;
  throw ConfigError("unknown loss mode '" + name + "'");
}

std::string LossModeName(LossMode mode) {
  switch (mode) {
    case LossMode::kHinge: return "hinge";
    case LossMode::kSoftened: return "softened";
    case LossMode::kLeveraged: return "leveraged";
    case LossMode::kUnified: return "unified";
    case LossMode::kUnifiedAttenuated: return "unified-attenuated";
  }
  return "unknown";
}

void LossConfig::Validate() const {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("delta must lie in (0, 0.5)");
  if (!(phi_dec > 0.0)) throw ConfigError("phi_dec must be positive");
  if (!(tau_dec > 0.0)) throw ConfigError("tau_dec must be positive");
}

double HingeLoss(std::span<const double> s_pos, std::span<const double> s_neg, double lambda) {
  if (s_pos.empty() || s_neg.empty()) {
    std::cerr << "warning: hinge loss over an empty similarity set is 0\n";
    return 0.0;
  }
  double worst = -std::numeric_limits<double>::infinity();
  const double min_pos = *std::min_element(s_pos.begin(), s_pos.end());
  const double max_neg = *std::max_element(s_neg.begin(), s_neg.end());
  worst = max_neg - min_pos + lambda;
  return std::max(0.0, worst);
}

double SoftenedLoss(std::span<const double> s_pos, std::span<const double> s_neg,
                    double lambda, double gamma) {
  LossConfig config;
  config.mode = LossMode::kSoftened;
  config.lambda = lambda;
  config.gamma = gamma;
  return UnifiedLoss(s_pos, s_neg, config);
}

Var UnifiedLossInGraph(Graph &g, Var s_pos, Var s_neg, const LossConfig &config) {
  config.Validate();
  const Matrix &pos = g.value(s_pos);
  const Matrix &neg = g.value(s_neg);
  if (pos.empty() || neg.empty()) return g.Constant(Matrix::Scalar(0.0));
  CheckRange(pos.data(), "positive");
  CheckRange(neg.data(), "negative");
  const double gamma = config.gamma;

  Var logit_pos, logit_neg;
  double offset = 0.0;
  switch (config.mode) {
    case LossMode::kHinge:
      throw ConfigError("hinge mode has no differentiable form");
    case LossMode::kSoftened:
      logit_neg = g.Scale(s_neg, gamma);
      logit_pos = g.Scale(s_pos, -gamma);
      offset = gamma * config.lambda;
      break;
    case LossMode::kUnified:
      // gamma((s_pos - 1)^2 + s_neg^2 - 2 delta^2), split per factor.
      logit_pos = g.Scale(g.Square(g.Shift(s_pos, -1.0)), gamma);
      logit_neg = g.Scale(g.Square(s_neg), gamma);
      offset = -2.0 * gamma * config.delta * config.delta;
      break;
    case LossMode::kLeveraged:
    case LossMode::kUnifiedAttenuated: {
      Var alpha_pos = g.Relu(g.Shift(g.Scale(s_pos, -1.0), config.optimum_pos()));
      Var alpha_neg = g.Relu(g.Shift(s_neg, -config.optimum_neg()));
      if (config.mode == LossMode::kUnifiedAttenuated) {
        auto attenuate = [&](Var alpha) {
          return g.Relu(g.Shift(g.Scale(g.Pow(alpha, config.tau_dec), 1.0 / config.phi_dec), 1.0));
        };
        alpha_pos = attenuate(alpha_pos);
        alpha_neg = attenuate(alpha_neg);
      }
      logit_pos =
          g.Scale(g.Mul(alpha_pos, g.Shift(s_pos, -config.interval_pos())), -gamma);
      logit_neg = g.Scale(g.Mul(alpha_neg, g.Shift(s_neg, -config.interval_neg())), gamma);
      break;
    }
  }
  Var joint = g.Add(g.LogSumExp(logit_neg), g.LogSumExp(logit_pos));
  if (offset != 0.0) joint = g.Shift(joint, offset);
  return g.Scale(g.Softplus(joint), config.scale / gamma);
}

double UnifiedLoss(std::span<const double> s_pos, std::span<const double> s_neg,
                   const LossConfig &config) {
  if (config.mode == LossMode::kHinge) return config.scale * HingeLoss(s_pos, s_neg, config.lambda);
  Graph g;
  Var p = g.Constant(Matrix::RowVector(s_pos));
  Var n = g.Constant(Matrix::RowVector(s_neg));
  return g.value(UnifiedLossInGraph(g, p, n, config))[0];
}

double AlgebraicEquivalenceCheck(std::span<const double> s_pos, std::span<const double> s_neg,
                                 double delta, double gamma) {
  LossConfig config;
  config.delta = delta;
  config.gamma = gamma;
  config.mode = LossMode::kLeveraged;
  const double leveraged = UnifiedLoss(s_pos, s_neg, config);
  config.mode = LossMode::kUnified;
  const double unified = UnifiedLoss(s_pos, s_neg, config);
  return std::abs(leveraged - unified);
}

}  // namespace ipmc
