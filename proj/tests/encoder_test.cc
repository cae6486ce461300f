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

#include "ipmc/encoder.h"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "ipmc/errors.h"
#include "test_util.h"

namespace ipmc {
namespace {

using testing::RandomMatrix;

TEST(EncoderTest, SameSeedSameParameters) {
  const int dims[] = {5, 7};
  const int widths[] = {8, 4};
  EXPECT_EQ(InitEncoderParams(dims, widths, 42), InitEncoderParams(dims, widths, 42));
  EXPECT_EQ(InitEncoderParams(dims, widths, 42).Checksum(),
            InitEncoderParams(dims, widths, 42).Checksum());
}

TEST(EncoderTest, DifferentSeedsDiffer) {
  const int dims[] = {5};
  const int widths[] = {8, 4};
  EXPECT_NE(InitEncoderParams(dims, widths, 1), InitEncoderParams(dims, widths, 2));
}

TEST(EncoderTest, ShapeBookkeeping) {
  const int dims[] = {3, 6, 9};
  const int widths[] = {8, 4};
  EncoderParams p = InitEncoderParams(dims, widths, 1);
  ASSERT_EQ(p.view_count(), 3);
  for (int v = 0; v < 3; ++v) {
    ASSERT_EQ(p.views[v].layers.size(), 2u);
    EXPECT_EQ(p.views[v].input_dim(), dims[v]);
    EXPECT_EQ(p.views[v].layers[0].weight.rows(), 8);
    EXPECT_EQ(p.views[v].output_dim(), 4);
  }
  // Stacks are independent draws.
  EXPECT_NE(p.views[1].layers[1].weight, p.views[2].layers[1].weight);
}

TEST(EncoderTest, ZeroWidthIsConfigError) {
  const int dims[] = {3};
  const int widths[] = {8, 0};
  EXPECT_THROW(InitEncoderParams(dims, widths, 1), ConfigError);
}

TEST(EncoderTest, InitializationScale) {
  const int dims[] = {16};
  const int widths[] = {32};
  EncoderParams p = InitEncoderParams(dims, widths, 9);
  const double s = 1.0 / std::sqrt(16.0);
  for (double w : p.views[0].layers[0].weight.data()) EXPECT_LE(std::abs(w), s);
}

TEST(EncoderTest, IdentityLayerPassesUnitVectorThrough) {
  EncoderParams p;
  p.views.push_back({{DenseLayer{Matrix(3, 3, 0.0), Matrix(1, 3, 0.0)}}});
  for (int i = 0; i < 3; ++i) p.views[0].layers[0].weight(i, i) = 1.0;
  Matrix x(1, 3, std::vector<double>{0.6, 0.0, 0.8});
  EXPECT_EQ(Encode(p, 0, x), x);
}

TEST(EncoderTest, OutputsAreNonNegativeUnitVectors) {
  std::mt19937_64 rng(3);
  const int dims[] = {10};
  const int widths[] = {16, 8};
  EncoderParams p = InitEncoderParams(dims, widths, 3);
  Matrix y = Encode(p, 0, RandomMatrix(50, 10, 0.0, 1.0, rng));
  for (int r = 0; r < y.rows(); ++r) {
    double ss = 0.0;
    for (double v : y.row(r)) {
      EXPECT_GE(v, 0.0);
      ss += v * v;
    }
    EXPECT_NEAR(std::sqrt(ss), 1.0, 1e-6);
  }
  // Non-negativity and unit norm put every cosine in [0, 1].
  for (int a = 0; a < y.rows(); ++a) {
    for (int b = 0; b < y.rows(); ++b) {
      double dot = 0.0;
      for (int c = 0; c < y.cols(); ++c) dot += y(a, c) * y(b, c);
      EXPECT_GE(dot, 0.0);
      EXPECT_LE(dot, 1.0 + 1e-12);
    }
  }
}

TEST(EncoderTest, DeadOutputIsDomainError) {
  EncoderParams p;
  p.views.push_back({{DenseLayer{Matrix(2, 2, -1.0), Matrix(1, 2, 0.0)}}});
  EXPECT_THROW(Encode(p, 0, Matrix(1, 2, 1.0)), DomainError);
}

TEST(EncoderTest, WrongInputWidthOrViewThrows) {
  const int dims[] = {4};
  const int widths[] = {3};
  EncoderParams p = InitEncoderParams(dims, widths, 1);
  EXPECT_THROW(Encode(p, 0, Matrix(2, 5, 0.5)), ShapeError);
  EXPECT_THROW(Encode(p, 1, Matrix(2, 4, 0.5)), IndexError);
}

TEST(EncoderTest, GraphGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const int dims[] = {6};
  const int widths[] = {7, 5};
  EncoderParams p = InitEncoderParams(dims, widths, 5);
  Matrix x = RandomMatrix(4, 6, 0.0, 1.0, rng);
  Matrix proj = RandomMatrix(4, 5, -1.0, 1.0, rng);
  Bindings point;
  for (size_t l = 0; l < p.views[0].layers.size(); ++l) {
    point["w" + std::to_string(l)] = p.views[0].layers[l].weight;
    point["b" + std::to_string(l)] = p.views[0].layers[l].bias;
  }
  Expression expr = [&](Graph &g, const std::map<std::string, Var> &in) {
    EncoderVars vars;
    vars.views.resize(1);
    for (size_t l = 0; l < p.views[0].layers.size(); ++l) {
      vars.views[0].push_back({in.at("w" + std::to_string(l)), in.at("b" + std::to_string(l))});
    }
    return g.Sum(g.Mul(EncodeInGraph(g, vars, 0, g.Constant(x)), g.Constant(proj)));
  };
  EXPECT_LT(FiniteDifferenceCheck(expr, point, {"w0", "b0", "w1", "b1"}, 1e-6), 1e-4);
}

TEST(EncoderTest, EagerAndGraphForwardAgree) {
  std::mt19937_64 rng(6);
  const int dims[] = {6, 3};
  const int widths[] = {7, 5};
  EncoderParams p = InitEncoderParams(dims, widths, 6);
  Matrix x = RandomMatrix(4, 3, 0.0, 1.0, rng);
  Graph g;
  EncoderVars vars = AddEncoderToGraph(g, p, false);
  EXPECT_EQ(g.value(EncodeInGraph(g, vars, 1, g.Constant(x))), Encode(p, 1, x));
}

TEST(ConcatTest, TwoViews) {
  Embedding a{{1.0, 0.0}, 0, 0}, b{{0.0, 1.0}, 0, 1};
  Embedding per_view[] = {a, b};
  EXPECT_EQ(ConcatRepresentation(per_view, 2), (std::vector<double>{1, 0, 0, 1}));
}

TEST(ConcatTest, ShuffledOrMissingViewsRejected) {
  Embedding a{{1.0, 0.0}, 0, 0}, b{{0.0, 1.0}, 0, 1};
  Embedding swapped[] = {b, a};
  EXPECT_THROW(ConcatRepresentation(swapped, 2), ShapeError);
  Embedding one[] = {a};
  EXPECT_THROW(ConcatRepresentation(one, 2), ShapeError);
  Embedding c{{0.0, 1.0}, 3, 1};
  Embedding mixed[] = {a, c};
  EXPECT_THROW(ConcatRepresentation(mixed, 2), ShapeError);
}

TEST(ConcatTest, ThreeViewsPreserveBlocks) {
  std::mt19937_64 rng(7);
  std::vector<Embedding> views;
  for (int v = 0; v < 3; ++v) views.push_back({testing::RandomUnit(4, rng), 2, v});
  auto out = ConcatRepresentation(views, 3);
  ASSERT_EQ(out.size(), 12u);
  for (int v = 0; v < 3; ++v) {
    for (int k = 0; k < 4; ++k) EXPECT_EQ(out[v * 4 + k], views[v].vector[k]);
  }
}

TEST(EncoderTest, SerializationRoundTrip) {
  const int dims[] = {5, 2};
  const int widths[] = {4, 3};
  EncoderParams p = InitEncoderParams(dims, widths, 11);
  ByteWriter w;
  SerializeEncoder(p, w);
  ByteReader r(w.bytes());
  EXPECT_EQ(DeserializeEncoder(r), p);
  auto bytes = w.bytes();
  bytes[0] = 'X';
  ByteReader bad(bytes);
  EXPECT_THROW(DeserializeEncoder(bad), FormatError);
}

}  // namespace
}  // namespace ipmc
