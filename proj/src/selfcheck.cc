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

#include "ipmc/selfcheck.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "ipmc/diffmath.h"
#include "ipmc/info.h"
#include "ipmc/unified_loss.h"

namespace ipmc {

namespace {

Matrix Random(int rows, int cols, double lo, double hi, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double &v : m.data()) v = dist(rng);
  return m;
}

// Reduces any output to a scalar with fixed random weights so every entry
// of the op's output reaches the check.
Var Reduce(Graph &g, Var out, std::mt19937_64 &rng) {
  const Matrix &v = g.value(out);
  Matrix w = Random(v.rows(), v.cols(), -1.0, 1.0, rng);
  return g.Sum(g.Mul(out, g.Constant(w)));
}

double UnaryCheck(const std::function<Var(Graph &, Var)> &op, double lo, double hi,
                  std::mt19937_64 &rng) {
  Bindings point{{"x", Random(3, 4, lo, hi, rng)}};
  const uint64_t reducer_seed = rng();
  Expression expr = [&](Graph &g, const std::map<std::string, Var> &in) {
    std::mt19937_64 local(reducer_seed);
    return Reduce(g, op(g, in.at("x")), local);
  };
  return FiniteDifferenceCheck(expr, point, {"x"}, 1e-6);
}

}  // namespace

std::vector<CheckResult> RunSelfChecks(unsigned seed, int points) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> results;

  {
    using Unary = std::function<Var(Graph &, Var)>;
    struct UnaryCase {
      Unary op;
      double lo, hi;
    };
    const std::vector<int> rows = {2, 0, 2};
    const std::vector<int> flat = {11, 3, 3, 0};
    const std::vector<UnaryCase> unary = {
        {[](Graph &g, Var x) { return g.Square(x); }, -2, 2},
        {[](Graph &g, Var x) { return g.Exp(x); }, -2, 2},
        {[](Graph &g, Var x) { return g.Log(x); }, 0.5, 2},
        {[](Graph &g, Var x) { return g.Softplus(x); }, -3, 3},
        {[](Graph &g, Var x) { return g.Pow(x, 1.5); }, 0.5, 2},
        {[](Graph &g, Var x) { return g.Relu(x); }, 0.1, 2},
        {[](Graph &g, Var x) { return g.Scale(x, -1.7); }, -2, 2},
        {[](Graph &g, Var x) { return g.Shift(x, 0.3); }, -2, 2},
        {[](Graph &g, Var x) { return g.L2NormalizeRows(x); }, 0.2, 2},
        {[](Graph &g, Var x) { return g.RowNorms(x); }, 0.2, 2},
        {[](Graph &g, Var x) { return g.LogSumExp(x); }, -3, 3},
        {[](Graph &g, Var x) { return g.LogSumExpRows(x); }, -3, 3},
        {[](Graph &g, Var x) { return g.Sum(x); }, -3, 3},
        {[](Graph &g, Var x) { return g.Mean(x); }, -3, 3},
        {[](Graph &g, Var x) { return g.ColMean(x); }, -3, 3},
        {[](Graph &g, Var x) { return g.RowSum(x); }, -3, 3},
        {[&](Graph &g, Var x) { return g.GatherRows(x, rows); }, -2, 2},
        {[&](Graph &g, Var x) { return g.Gather(x, flat); }, -2, 2},
        {[](Graph &g, Var x) { return g.Mul(x, x); }, -2, 2},
    };
    // Two-input ops take x (3 x 4) and a second operand y of matching shape.
    struct BinaryCase {
      std::function<Var(Graph &, Var, Var)> op;
      int y_rows, y_cols;
    };
    const Matrix t = Random(3, 1, 0.0, 1.0, rng);
    const std::vector<BinaryCase> binary = {
        {[](Graph &g, Var x, Var y) { return g.Add(x, y); }, 3, 4},
        {[](Graph &g, Var x, Var y) { return g.Sub(x, y); }, 3, 4},
        {[](Graph &g, Var x, Var y) { return g.Mul(x, y); }, 3, 4},
        {[](Graph &g, Var x, Var y) { return g.Affine(x, y); }, 2, 4},
        {[](Graph &g, Var x, Var y) { return g.AffineT(x, y); }, 4, 2},
        {[&](Graph &g, Var x, Var y) { return g.Lerp(x, y, t); }, 3, 4},
        {[](Graph &g, Var x, Var y) {
           Var parts[] = {x, y};
           return g.ConcatRows(parts);
         }, 2, 4},
    };
    double worst = 0.0;
    for (int trial = 0; trial < points; ++trial) {
      for (const auto &c : unary) worst = std::max(worst, UnaryCheck(c.op, c.lo, c.hi, rng));
      for (const auto &c : binary) {
        Bindings point{{"x", Random(3, 4, -2, 2, rng)}, {"y", Random(c.y_rows, c.y_cols, -2, 2, rng)}};
        const uint64_t reducer_seed = rng();
        Expression expr = [&](Graph &g, const std::map<std::string, Var> &in) {
          std::mt19937_64 local(reducer_seed);
          return Reduce(g, c.op(g, in.at("x"), in.at("y")), local);
        };
        worst = std::max(worst, FiniteDifferenceCheck(expr, point, {"x", "y"}, 1e-6));
      }
      // Affine with its bias.
      Bindings point{{"x", Random(3, 4, -2, 2, rng)}, {"w", Random(2, 4, -1, 1, rng)},
                     {"b", Random(1, 2, -1, 1, rng)}};
      const uint64_t reducer_seed = rng();
      Expression expr = [&](Graph &g, const std::map<std::string, Var> &in) {
        std::mt19937_64 local(reducer_seed);
        return Reduce(g, g.Affine(in.at("x"), in.at("w"), in.at("b")), local);
      };
      worst = std::max(worst, FiniteDifferenceCheck(expr, point, {"x", "w", "b"}, 1e-6));
    }
    results.push_back({"op-gradients", worst < 1e-4, worst, 1e-4});
  }

  {
    double worst = 0.0;
    for (int trial = 0; trial < points; ++trial) {
      LossConfig config;
      config.gamma = 8.0;
      Bindings point{{"p", Random(1, 5, 0.05, 0.95, rng)}, {"n", Random(2, 6, 0.05, 0.95, rng)}};
      for (LossMode mode : {LossMode::kSoftened, LossMode::kLeveraged, LossMode::kUnified,
                            LossMode::kUnifiedAttenuated}) {
        config.mode = mode;
        Expression expr = [&](Graph &g, const std::map<std::string, Var> &in) {
          return UnifiedLossInGraph(g, in.at("p"), in.at("n"), config);
        };
        worst = std::max(worst, FiniteDifferenceCheck(expr, point, {"p", "n"}, 1e-6));
      }
    }
    results.push_back({"loss-gradients", worst < 1e-4, worst, 1e-4});
  }

  {
    double worst = 0.0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> pos(4), neg(8);
      for (double &v : pos) v = unit(rng);
      for (double &v : neg) v = unit(rng);
      worst = std::max(worst, std::abs(SoftenedLoss(pos, neg, 0.4, 1024.0) -
                                       HingeLoss(pos, neg, 0.4)));
    }
    results.push_back({"gamma-limit", worst < 1e-2, worst, 1e-2});
  }

  {
    double worst = 0.0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> pos(5), neg(9);
      for (double &v : pos) v = unit(rng);
      for (double &v : neg) v = unit(rng);
      worst = std::max(worst, AlgebraicEquivalenceCheck(pos, neg, 0.35, 32.0));
    }
    results.push_back({"leveraged-closed-form", worst < 1e-9, worst, 1e-9});
  }

  {
    double worst = 0.0;
    std::gamma_distribution<double> gamma(1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> p(3 * 4);
      double total = 0.0;
      for (double &v : p) total += (v = gamma(rng));
      for (double &v : p) v /= total;
      double sum = 0.0;
      for (size_t i = 0; i + 1 < p.size(); ++i) sum += p[i];
      p.back() = 1.0 - sum;
      DiscreteJoint joint({"A", "B"}, {3, 4}, p);
      worst = std::max(worst, KlIdentityDeviation(joint, {"A"}, {"B"}));
    }
    results.push_back({"kl-identity", worst < 1e-12, worst, 1e-12});
  }

  {
    auto joint = DiscreteJoint::Enumerate({"X", "Z"}, {2, 2}, [](std::span<const int>) {
                   return 0.25;
                 }).WithDerived("Y", 2, [](std::span<const int> s) { return s[0] ^ s[1]; });
    const double i = MutualInformation(joint, {"X"}, {"Y"});
    const double cmi = ConditionalMutualInformation(joint, {"X"}, {"Y"}, {"Z"});
    const double inter = InteractionInformation(joint, {"X"}, {"Y"}, {"Z"});
    const double worst =
        std::max({std::abs(i), std::abs(cmi - 1.0), std::abs(inter + 1.0)});
    results.push_back({"xor-fixture", worst < 1e-12, worst, 1e-12});
  }
  return results;
}

}  // namespace ipmc
