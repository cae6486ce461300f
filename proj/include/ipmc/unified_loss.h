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

#ifndef IPMC_UNIFIED_LOSS_H_
#define IPMC_UNIFIED_LOSS_H_

#include <span>
#include <string>

#include "ipmc/diffmath.h"

namespace ipmc {

enum class LossMode { kHinge, kSoftened, kLeveraged, kUnified, kUnifiedAttenuated };

LossMode ParseLossMode(const std::string &name);
std::string LossModeName(LossMode mode);

// Hyper-parameters of the pair-similarity loss family. The optimum and
// interval constants are derived from `delta` on demand.
struct LossConfig {
  double gamma = 32.0;
  double delta = 0.35;
  double lambda = 0.4;
  double phi_dec = 6.0;
  double tau_dec = 1.0;
  LossMode mode = LossMode::kUnifiedAttenuated;
  // Constant multiplier on the final value.
  double scale = 1.0;

  double optimum_pos() const { return 1.0 + delta; }
  double optimum_neg() const { return -delta; }
  double interval_pos() const { return 1.0 - delta; }
  double interval_neg() const { return delta; }

  // Throws ConfigError unless gamma > 0, delta in (0, 0.5), phi_dec > 0 and
  // tau_dec > 0.
  void Validate() const;
  bool operator==(const LossConfig &) const = default;
};

// [max_{i,j} (s_neg_j - s_pos_i + lambda)]_+. Empty sets yield 0.
double HingeLoss(std::span<const double> s_pos, std::span<const double> s_neg, double lambda);

// (1/gamma) log(1 + sum_i sum_j exp(gamma (s_neg_j - s_pos_i + lambda))).
double SoftenedLoss(std::span<const double> s_pos, std::span<const double> s_neg,
                    double lambda, double gamma);

// Loss of the configured mode over the full double sum of pos x neg
// pairs. Similarities must lie in [0, 1] (DomainError otherwise).
double UnifiedLoss(std::span<const double> s_pos, std::span<const double> s_neg,
                   const LossConfig &config);

// Differentiable form for every mode except hinge. `s_pos` and `s_neg`
// may have any shape; all their entries take part in the double sum, which
// is evaluated factored as softplus(LSE(neg logits) + LSE(pos logits)).
Var UnifiedLossInGraph(Graph &g, Var s_pos, Var s_neg, const LossConfig &config);

// max |leveraged - unified| for the given sets; zero up to rounding since
// the leveraged form with the derived constants expands to the closed form.
double AlgebraicEquivalenceCheck(std::span<const double> s_pos, std::span<const double> s_neg,
                                 double delta, double gamma);

}  // namespace ipmc

#endif  // IPMC_UNIFIED_LOSS_H_
