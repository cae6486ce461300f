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

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "ipmc/errors.h"
#include "test_util.h"

namespace ipmc {
namespace {

using Set = std::vector<double>;

// Independent oracle: the double sum written out term by term.
double DirectLoss(const Set &pos, const Set &neg, const LossConfig &c) {
  if (pos.empty() || neg.empty()) return 0.0;
  double sum = 0.0;
  for (double sp : pos) {
    for (double sn : neg) {
      double e = 0.0;
      switch (c.mode) {
        case LossMode::kSoftened:
          e = sn - sp + c.lambda;
          break;
        case LossMode::kUnified:
          e = (sp - 1) * (sp - 1) + sn * sn - 2 * c.delta * c.delta;
          break;
        case LossMode::kLeveraged:
        case LossMode::kUnifiedAttenuated: {
          double ap = std::max(0.0, 1 + c.delta - sp);
          double an = std::max(0.0, sn + c.delta);
          if (c.mode == LossMode::kUnifiedAttenuated) {
            ap = std::max(0.0, std::pow(ap, c.tau_dec) / c.phi_dec + 1);
            an = std::max(0.0, std::pow(an, c.tau_dec) / c.phi_dec + 1);
          }
          e = an * (sn - c.delta) - ap * (sp - (1 - c.delta));
          break;
        }
        case LossMode::kHinge:
          break;
      }
      sum += std::exp(c.gamma * e);
    }
  }
  return c.scale * std::log1p(sum) / c.gamma;
}

TEST(HingeTest, Examples) {
  EXPECT_EQ(HingeLoss(Set{0.9}, Set{0.3}, 0.4), 0.0);
  EXPECT_NEAR(HingeLoss(Set{0.6}, Set{0.5}, 0.4), 0.3, 1e-15);
  EXPECT_EQ(HingeLoss(Set{0.5}, Set{0.5}, 0.0), 0.0);
  EXPECT_EQ(HingeLoss(Set{}, Set{0.5}, 0.4), 0.0);
}

TEST(SoftenedTest, Examples) {
  EXPECT_EQ(SoftenedLoss(Set{0.5}, Set{}, 0.4, 32), 0.0);
  EXPECT_NEAR(SoftenedLoss(Set{0.6}, Set{0.5}, 0.4, 1024), 0.3, 1e-3);
  EXPECT_NEAR(SoftenedLoss(Set{0.9}, Set{0.3}, 0.4, 32),
              std::log1p(std::exp(32 * -0.2)) / 32, 1e-15);
  EXPECT_NEAR(SoftenedLoss(Set{0.9}, Set{0.3}, 0.4, 32), 5.2e-5, 1e-6);
}

TEST(UnifiedTest, Examples) {
  LossConfig c;
  c.mode = LossMode::kUnified;
  EXPECT_NEAR(UnifiedLoss(Set{1.0}, Set{0.0}, c), std::log1p(std::exp(-7.84)) / 32, 1e-15);
  EXPECT_NEAR(UnifiedLoss(Set{1.0}, Set{0.0}, c), 1.23e-5, 1e-7);
  EXPECT_NEAR(UnifiedLoss(Set{0.5}, Set{0.5}, c), std::log1p(std::exp(8.16)) / 32, 1e-12);
  EXPECT_NEAR(UnifiedLoss(Set{0.5}, Set{0.5}, c), 0.2551, 1e-4);
  EXPECT_EQ(UnifiedLoss(Set{}, Set{0.5}, c), 0.0);
  EXPECT_EQ(UnifiedLoss(Set{0.5}, Set{}, c), 0.0);
}

TEST(UnifiedTest, MatchesDirectDoubleSumForEveryMode) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (LossMode mode : {LossMode::kSoftened, LossMode::kLeveraged, LossMode::kUnified,
                        LossMode::kUnifiedAttenuated}) {
    LossConfig c;
    c.mode = mode;
    c.gamma = 8;
    c.tau_dec = 1.5;
    c.scale = 2.0;
    for (int trial = 0; trial < 50; ++trial) {
      Set pos(3), neg(7);
      for (double &v : pos) v = unit(rng);
      for (double &v : neg) v = unit(rng);
      const double want = DirectLoss(pos, neg, c);
      EXPECT_NEAR(UnifiedLoss(pos, neg, c), want, 1e-12 * std::max(1.0, want))
          << LossModeName(mode);
    }
  }
}

TEST(UnifiedTest, OutOfRangeSimilarityIsDomainError) {
  LossConfig c;
  EXPECT_THROW(UnifiedLoss(Set{1.2}, Set{0.1}, c), DomainError);
  EXPECT_THROW(UnifiedLoss(Set{0.5}, Set{-0.1}, c), DomainError);
}

TEST(UnifiedTest, ConfigValidation) {
  LossConfig c;
  c.delta = 0.5;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = {};
  c.gamma = 0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = {};
  c.phi_dec = 0;
  EXPECT_THROW(c.Validate(), ConfigError);
  EXPECT_THROW(ParseLossMode("circle"), ConfigError);
  for (LossMode m : {LossMode::kHinge, LossMode::kSoftened, LossMode::kLeveraged,
                     LossMode::kUnified, LossMode::kUnifiedAttenuated}) {
    EXPECT_EQ(ParseLossMode(LossModeName(m)), m);
  }
}

TEST(AlgebraicEquivalenceTest, RandomSetsAndBoundary) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Set pos(4), neg(6);
    for (double &v : pos) v = unit(rng);
    for (double &v : neg) v = unit(rng);
    EXPECT_LT(AlgebraicEquivalenceCheck(pos, neg, 0.35, 32), 1e-9);
  }
  EXPECT_LT(AlgebraicEquivalenceCheck(Set{1.0}, Set{0.0, 1.0}, 0.35, 32), 1e-9);
}

TEST(GammaLimitTest, SoftenedApproachesHinge) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    Set pos(3), neg(5);
    for (double &v : pos) v = unit(rng);
    for (double &v : neg) v = unit(rng);
    if (HingeLoss(pos, neg, 0.4) <= 0.0) continue;
    EXPECT_LT(std::abs(SoftenedLoss(pos, neg, 0.4, 1024) - HingeLoss(pos, neg, 0.4)), 1e-2);
    ++checked;
  }
}

TEST(UnifiedTest, NonNegativeAndMonotone) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  LossConfig c;
  for (LossMode mode : {LossMode::kUnified, LossMode::kUnifiedAttenuated, LossMode::kLeveraged}) {
    c.mode = mode;
    for (int trial = 0; trial < 100; ++trial) {
      Set pos(3), neg(4);
      for (double &v : pos) v = unit(rng);
      for (double &v : neg) v = unit(rng);
      const double base = UnifiedLoss(pos, neg, c);
      EXPECT_GE(base, 0.0);
      Set up_neg = neg;
      up_neg[trial % 4] += 1e-3;
      EXPECT_GE(UnifiedLoss(pos, up_neg, c), base);
      Set up_pos = pos;
      up_pos[trial % 3] += 1e-3;
      EXPECT_LE(UnifiedLoss(up_pos, neg, c), base);
    }
  }
}

TEST(UnifiedTest, DecisionBoundary) {
  // On the circle (s_pos - 1)^2 + s_neg^2 = 2 delta^2 the single-pair
  // exponent is zero, so the loss is ln(2) / gamma.
  LossConfig c;
  c.mode = LossMode::kUnified;
  const double r = std::sqrt(2.0) * c.delta;
  for (double theta : {0.1, 0.4, 0.8, 1.2, 1.5}) {
    const double sp = 1.0 - r * std::sin(theta);
    const double sn = r * std::cos(theta);
    EXPECT_NEAR(UnifiedLoss(Set{sp}, Set{sn}, c), std::log(2.0) / c.gamma, 1e-12);
  }
}

TEST(UnifiedTest, GraphGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (LossMode mode : {LossMode::kSoftened, LossMode::kLeveraged, LossMode::kUnified,
                        LossMode::kUnifiedAttenuated}) {
    LossConfig c;
    c.mode = mode;
    for (int trial = 0; trial < 10; ++trial) {
      Bindings point{{"p", testing::RandomMatrix(1, 4, 0.05, 0.95, rng)},
                     {"n", testing::RandomMatrix(3, 5, 0.05, 0.95, rng)}};
      Expression expr = [&](Graph &g, const std::map<std::string, Var> &in) {
        return UnifiedLossInGraph(g, in.at("p"), in.at("n"), c);
      };
      EXPECT_LT(FiniteDifferenceCheck(expr, point, {"p", "n"}, 1e-5), 1e-4);
    }
  }
}

TEST(UnifiedTest, HingeHasNoGraphForm) {
  LossConfig c;
  c.mode = LossMode::kHinge;
  Graph g;
  EXPECT_THROW(UnifiedLossInGraph(g, g.Constant(Matrix(1, 1, 0.5)), g.Constant(Matrix(1, 1, 0.5)), c),
               ConfigError);
}

}  // namespace
}  // namespace ipmc
