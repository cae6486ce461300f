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

#include "ipmc/info.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "gtest/gtest.h"
#include "ipmc/errors.h"

namespace ipmc {
namespace {

// Reference entropy: decode every table entry, project onto `vars` and
// accumulate in a map.
double OracleEntropy(const DiscreteJoint &j, const VarSet &vars) {
  std::vector<int> idx;
  for (const auto &v : vars) idx.push_back(j.Index(v));
  std::map<std::vector<int>, double> marginal;
  const auto &cards = j.cards();
  for (size_t e = 0; e < j.probs().size(); ++e) {
    std::vector<int> state(cards.size());
    size_t rest = e;
    for (int k = static_cast<int>(cards.size()) - 1; k >= 0; --k) {
      state[k] = static_cast<int>(rest % cards[k]);
      rest /= cards[k];
    }
    std::vector<int> key;
    for (int i : idx) key.push_back(state[i]);
    marginal[key] += j.probs()[e];
  }
  double h = 0.0;
  for (const auto &[_, p] : marginal) {
    if (p > 0) h -= p * std::log2(p);
  }
  return h;
}

DiscreteJoint RandomJoint(std::mt19937_64 &rng, std::vector<std::string> names,
                          std::vector<int> cards, double concentration = 1.0) {
  size_t size = 1;
  for (int c : cards) size *= c;
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> p(size);
  double total = 0.0;
  for (double &v : p) total += (v = gamma(rng));
  for (double &v : p) v /= total;
  return DiscreteJoint(std::move(names), std::move(cards), std::move(p));
}

DiscreteJoint FairBits(const std::vector<std::string> &names) {
  std::vector<int> cards(names.size(), 2);
  const double p = std::pow(0.5, static_cast<double>(names.size()));
  return DiscreteJoint(names, cards, std::vector<double>(size_t{1} << names.size(), p));
}

TEST(InfoMeasureTest, IndependentFairBits) {
  DiscreteJoint j = FairBits({"X", "Y"});
  EXPECT_NEAR(MutualInformation(j, {"X"}, {"Y"}), 0.0, 1e-12);
  EXPECT_NEAR(Entropy(j, {"X", "Y"}), 2.0, 1e-12);
}

TEST(InfoMeasureTest, CopiedBitCarriesOneBit) {
  DiscreteJoint j({"X", "Y"}, {2, 2}, {0.5, 0.0, 0.0, 0.5});
  EXPECT_NEAR(MutualInformation(j, {"X"}, {"Y"}), 1.0, 1e-12);
  EXPECT_NEAR(InfoMeasure(j, InfoKind::kI, {"X", "Y"}), 1.0, 1e-12);
  EXPECT_NEAR(InfoMeasure(j, InfoKind::kH, {"X"}), 1.0, 1e-12);
}

TEST(InfoMeasureTest, XorTriple) {
  DiscreteJoint j = FairBits({"X", "Z"}).WithDerived(
      "Y", 2, [](std::span<const int> s) { return s[0] ^ s[1]; });
  EXPECT_NEAR(MutualInformation(j, {"X"}, {"Y"}), 0.0, 1e-12);
  EXPECT_NEAR(ConditionalMutualInformation(j, {"X"}, {"Y"}, {"Z"}), 1.0, 1e-12);
  EXPECT_NEAR(InteractionInformation(j, {"X"}, {"Y"}, {"Z"}), -1.0, 1e-12);
  EXPECT_NEAR(InfoMeasure(j, InfoKind::kINT, {"X", "Y", "Z"}), -1.0, 1e-12);
  EXPECT_NEAR(InfoMeasure(j, InfoKind::kCMI, {"X", "Y", "Z"}), 1.0, 1e-12);
}

TEST(InfoMeasureTest, AgreesWithMapOracleOnRandomJoints) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    DiscreteJoint j = RandomJoint(rng, {"A", "B", "C", "D"}, {2, 3, 2, 3}, 0.5);
    for (const VarSet &s : {VarSet{"A"}, VarSet{"B", "D"}, VarSet{"D", "A", "C"},
                            VarSet{"A", "B", "C", "D"}, VarSet{}}) {
      EXPECT_NEAR(Entropy(j, s), OracleEntropy(j, s), 1e-12);
    }
    const double cmi2 = OracleEntropy(j, {"A", "C", "D"}) + OracleEntropy(j, {"B", "C", "D"}) -
                        OracleEntropy(j, {"A", "B", "C", "D"}) - OracleEntropy(j, {"C", "D"});
    EXPECT_NEAR(InfoMeasure(j, InfoKind::kCMI2, {"A", "B", "C", "D"}), cmi2, 1e-12);
  }
}

TEST(InfoMeasureTest, ChainRule) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    DiscreteJoint j = RandomJoint(rng, {"A", "B", "C"}, {3, 2, 4});
    const double lhs = MutualInformation(j, {"A"}, {"B", "C"});
    const double rhs = MutualInformation(j, {"A"}, {"B"}) +
                       ConditionalMutualInformation(j, {"A"}, {"C"}, {"B"});
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(InfoMeasureTest, NonNegativityOnRandomJoints) {
  std::mt19937_64 rng(33);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    DiscreteJoint j = RandomJoint(rng, {"A", "B", "C"}, {2, 3, 2}, trial % 2 ? 0.2 : 1.0);
    worst = std::min({worst, Entropy(j, {"A"}), Entropy(j, {"A", "B", "C"}),
                      MutualInformation(j, {"A"}, {"B"}),
                      MutualInformation(j, {"A", "C"}, {"B"}),
                      ConditionalMutualInformation(j, {"A"}, {"B"}, {"C"})});
  }
  EXPECT_GE(worst, -1e-12);
}

TEST(InfoMeasureTest, Symmetries) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    DiscreteJoint j = RandomJoint(rng, {"A", "B", "C"}, {2, 3, 3});
    EXPECT_NEAR(MutualInformation(j, {"A"}, {"B"}), MutualInformation(j, {"B"}, {"A"}), 1e-12);
    const double base = InteractionInformation(j, {"A"}, {"B"}, {"C"});
    std::vector<std::string> order = {"A", "B", "C"};
    do {
      EXPECT_NEAR(InteractionInformation(j, {order[0]}, {order[1]}, {order[2]}), base, 1e-12);
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

// ---- KL identity ------------------------------------------------------

TEST(KlIdentityTest, DirichletSweep) {
  std::mt19937_64 rng(35);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    DiscreteJoint j = RandomJoint(rng, {"A", "B", "C"}, {3, 2, 3}, 0.7);
    worst = std::max(worst, KlIdentityDeviation(j, {"A"}, {"B", "C"}));
    worst = std::max(worst, KlIdentityDeviation(j, {"C"}, {"A"}));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(KlIdentityTest, CopyAndIndependence) {
  DiscreteJoint copy({"A", "B"}, {3, 3},
                     {1.0 / 3, 0, 0, 0, 1.0 / 3, 0, 0, 0, 1.0 / 3});
  EXPECT_LT(KlIdentityDeviation(copy, {"A"}, {"B"}), 1e-12);
  EXPECT_NEAR(KlFromProduct(copy, {"A"}, {"B"}), std::log2(3.0), 1e-12);
  EXPECT_NEAR(KlFromProduct(FairBits({"A", "B"}), {"A"}, {"B"}), 0.0, 1e-15);
}

// ---- Assumption audit -------------------------------------------------

// X a fair bit, T = X, V1 = X xor N, V2 = N for a fair noise bit N. Each
// view alone says nothing about X; together they determine it.
DiscreteJoint TwoViewFixture() {
  return FairBits({"X", "N"})
      .WithDerived("T", 2, [](std::span<const int> s) { return s[0]; })
      .WithDerived("V1", 2, [](std::span<const int> s) { return s[0] ^ s[1]; })
      .WithDerived("V2", 2, [](std::span<const int> s) { return s[1]; });
}

TEST(Assumption1Test, AddingViewsShrinksResidual) {
  DiscreteJoint j = TwoViewFixture();
  const double eps[] = {0.5, 0.5};
  Assumption1Report r = Assumption1Audit(j, "X", "T", {"V1", "V2"}, eps);
  ASSERT_EQ(r.views.size(), 2u);
  EXPECT_NEAR(r.task_information, 1.0, 1e-12);
  EXPECT_NEAR(r.views[0].residual, 1.0, 1e-12);
  EXPECT_NEAR(r.views[1].residual, 1.0, 1e-12);
  EXPECT_FALSE(r.views[0].pass);
  EXPECT_NEAR(r.residual_all, 0.0, 1e-12);
  EXPECT_LT(r.residual_all, r.views[0].residual);
}

TEST(Assumption1Test, CopyViewAndIrrelevantView) {
  std::mt19937_64 rng(36);
  DiscreteJoint j = RandomJoint(rng, {"X", "T"}, {3, 3})
                        .WithDerived("V1", 3, [](std::span<const int> s) { return s[0]; });
  const double p[] = {0.3, 0.7};
  j = j.WithIndependent("V2", p);
  const double eps[] = {1e-9, 1e-9};
  Assumption1Report r = Assumption1Audit(j, "X", "T", {"V1", "V2"}, eps);
  EXPECT_NEAR(r.views[0].residual, 0.0, 1e-12);
  EXPECT_TRUE(r.views[0].pass);
  EXPECT_NEAR(r.views[1].residual, r.task_information, 1e-12);
  EXPECT_NEAR(r.task_information, MutualInformation(j, {"X"}, {"T"}), 1e-15);
  const double wrong[] = {0.1};
  EXPECT_THROW(Assumption1Audit(j, "X", "T", {"V1", "V2"}, wrong), ConfigError);
}

// ---- Definition report ------------------------------------------------

TEST(Definition1Test, SharedLatentHasNoViewSpecificTerms) {
  auto copy = [](std::span<const int> s) { return s[0]; };
  DiscreteJoint j = FairBits({"S"})
                        .WithDerived("X", 2, copy)
                        .WithDerived("V1", 2, copy)
                        .WithDerived("V2", 2, copy)
                        .WithDerived("Y", 2, copy);
  Definition1Report r = Definition1(j, "Y", "X", "V1", "V2");
  EXPECT_NEAR(r.y_x_given_views, 0.0, 1e-12);
  EXPECT_NEAR(r.y_v1_given_rest, 0.0, 1e-12);
  EXPECT_NEAR(r.y_v2_given_rest, 0.0, 1e-12);
  EXPECT_NEAR(r.shared, 1.0, 1e-12);
  EXPECT_NEAR(r.entropy_y, 1.0, 1e-12);
  EXPECT_NEAR(r.residual_y, 0.0, 1e-12);
}

TEST(Definition1Test, PrivateNoiseInXIsViewSpecific) {
  // X = (S, P) as two bits; the views see only S.
  DiscreteJoint j = FairBits({"S", "P"})
                        .WithDerived("X", 4, [](std::span<const int> s) { return 2 * s[0] + s[1]; })
                        .WithDerived("V1", 2, [](std::span<const int> s) { return s[0]; })
                        .WithDerived("V2", 2, [](std::span<const int> s) { return s[0]; })
                        .WithDerived("Y", 4, [](std::span<const int> s) { return s[2]; });
  Definition1Report r = Definition1(j, "Y", "X", "V1", "V2");
  EXPECT_NEAR(r.y_x_given_views, 1.0, 1e-12);
  EXPECT_GT(r.y_x_given_views, 0.0);
}

TEST(Definition1Test, IndependentNoiseBitRaisesEntropyOnly) {
  auto copy = [](std::span<const int> s) { return s[0]; };
  std::mt19937_64 rng(37);
  DiscreteJoint base = RandomJoint(rng, {"S", "Q"}, {2, 2})
                           .WithDerived("X", 2, [](std::span<const int> s) { return s[0] ^ s[1]; })
                           .WithDerived("V1", 2, copy)
                           .WithDerived("V2", 2, [](std::span<const int> s) { return s[1]; })
                           .WithDerived("Y", 2, copy);
  const double fair[] = {0.5, 0.5};
  // Y2 = (Y, B) with B an independent fair bit.
  DiscreteJoint noisy = base.WithIndependent("B", fair).WithDerived(
      "Y2", 4, [&](std::span<const int> s) { return 2 * s[base.Index("Y")] + s.back(); });
  Definition1Report clean = Definition1(noisy, "Y", "X", "V1", "V2");
  Definition1Report extra = Definition1(noisy, "Y2", "X", "V1", "V2");
  EXPECT_NEAR(extra.entropy_y - clean.entropy_y, 1.0, 1e-12);
  EXPECT_NEAR(extra.shared, clean.shared, 1e-12);
}

// ---- Construction and parsing -----------------------------------------

TEST(DiscreteJointTest, InvalidTablesRejected) {
  EXPECT_THROW(DiscreteJoint({"A"}, {2}, {0.5, 0.6}), DomainError);
  EXPECT_THROW(DiscreteJoint({"A"}, {2}, {1.5, -0.5}), DomainError);
  EXPECT_THROW(DiscreteJoint({"A"}, {3}, {0.5, 0.5}), ShapeError);
  DiscreteJoint j = FairBits({"A", "B"});
  EXPECT_THROW(Entropy(j, {"C"}), ConfigError);
  EXPECT_THROW(DiscreteJoint({"A", "B", "C"}, {1000, 1000, 100}, {}), Error);
}

TEST(DiscreteJointTest, ParseCsv) {
  DiscreteJoint j = ParseJointCsv("X,Y,p\n0,0,0.5\n1,1,0.5\n");
  EXPECT_EQ(j.names(), (std::vector<std::string>{"X", "Y"}));
  EXPECT_EQ(j.cards(), (std::vector<int>{2, 2}));
  EXPECT_NEAR(MutualInformation(j, {"X"}, {"Y"}), 1.0, 1e-12);
  EXPECT_THROW(ParseJointCsv("X,p\n"), FormatError);
  EXPECT_THROW(ParseJointCsv("X,p\n0,abc\n"), FormatError);
  EXPECT_THROW(ParseJointCsv("X,p\n0,0.5,1\n"), FormatError);
  EXPECT_THROW(ParseJointCsv("X,p\n-1,1\n"), FormatError);
  EXPECT_THROW(ParseJointCsv("X,p\n0,0.4\n1,0.4\n"), DomainError);
}

}  // namespace
}  // namespace ipmc
