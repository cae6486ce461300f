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

#include "ipmc/align.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <string>

#include "ipmc/errors.h"

namespace ipmc {

namespace {

constexpr double kVarianceFloor = 1e-8;
constexpr double kDivergenceLimit = 1e6;

Matrix Ones(int rows) { return Matrix(rows, 1, 1.0); }

double MeanOf(const Matrix &m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v;
  return acc / static_cast<double>(m.size());
}

Matrix EvalCritic(const CriticParams &critic, const Matrix &x) {
  if (x.cols() != critic.input_dim()) {
    throw ShapeError("critic expects dimension " + std::to_string(critic.input_dim()) +
                     ", got " + std::to_string(x.cols()));
  }
  Graph g;
  auto layers = AddCriticToGraph(g, critic, false);
  return g.value(CriticInGraph(g, layers, g.Constant(x)));
}

}  // namespace

Discrepancy ParseDiscrepancy(const std::string &name) {
  if (name == "wasserstein") return Discrepancy::kWasserstein;
  if (name == "kl") return Discrepancy::kKl;
  if (name == "none") return Discrepancy::kNone;
  throw ConfigError("unknown discrepancy '" + name + "'");
}

std::string DiscrepancyName(Discrepancy d) {
  switch (d) {
    case Discrepancy::kWasserstein: return "wasserstein";
    case Discrepancy::kKl: return "kl";
    case Discrepancy::kNone: return "none";
  }
  return "unknown";
}

void AlignConfig::Validate() const {
  if (discrepancy == Discrepancy::kWasserstein && k_critic < 1) {
    throw ConfigError("k_critic must be >= 1 for the wasserstein discrepancy");
  }
  if (gp_weight < 0.0) throw ConfigError("gp_weight must be non-negative");
  if (!(critic_lr > 0.0)) throw ConfigError("critic_lr must be positive");
  for (int w : critic_hidden) {
    if (w <= 0) throw ConfigError("zero-width critic layer");
  }
}

std::vector<ParamRef> CriticParams::Refs() {
  std::vector<ParamRef> refs;
  for (size_t l = 0; l < layers.size(); ++l) {
    refs.push_back({"critic.l" + std::to_string(l) + ".weight", &layers[l].weight});
    refs.push_back({"critic.l" + std::to_string(l) + ".bias", &layers[l].bias});
  }
  return refs;
}

CriticParams InitCritic(int input_dim, std::span<const int> hidden, uint64_t seed) {
  if (input_dim <= 0) throw ConfigError("critic input dimension must be positive");
  std::mt19937_64 rng(seed);
  CriticParams critic;
  int fan_in = input_dim;
  std::vector<int> widths(hidden.begin(), hidden.end());
  widths.push_back(1);
  for (size_t l = 0; l < widths.size(); ++l) {
    const int out = widths[l];
    if (out <= 0) throw ConfigError("zero-width critic layer");
    DenseLayer layer{Matrix(out, fan_in), Matrix(1, out)};
    // The output layer starts at zero: a flat critic has no preferred
    // orientation, so the first ascent steps follow the estimate alone.
    if (l + 1 < widths.size()) {
      const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-s, s);
      for (double &w : layer.weight.data()) w = dist(rng);
      for (double &b : layer.bias.data()) b = std::abs(dist(rng));
    }
    critic.layers.push_back(std::move(layer));
    fan_in = out;
  }
  return critic;
}

CriticParams LinearCritic(std::span<const double> slope, double offset) {
  CriticParams critic;
  critic.layers.push_back(
      {Matrix::RowVector(slope), Matrix::Scalar(offset)});
  return critic;
}

std::vector<EncoderVars::Layer> AddCriticToGraph(Graph &g, const CriticParams &critic,
                                                 bool trainable) {
  std::vector<EncoderVars::Layer> layers;
  for (const auto &layer : critic.layers) {
    if (trainable) {
      layers.push_back({g.Parameter(layer.weight), g.Parameter(layer.bias)});
    } else {
      layers.push_back({g.Constant(layer.weight), g.Constant(layer.bias)});
    }
  }
  return layers;
}

Var CriticInGraph(Graph &g, std::span<const EncoderVars::Layer> critic, Var x) {
  Var h = x;
  for (size_t l = 0; l < critic.size(); ++l) {
    h = g.Affine(h, critic[l].weight, critic[l].bias);
    if (l + 1 < critic.size()) h = g.Relu(h);
  }
  return h;
}

double CriticEstimate(const CriticParams &critic, const Matrix &a, const Matrix &b) {
  if (a.rows() == 0 || b.rows() == 0) throw ShapeError("critic estimate of an empty set");
  if (a.cols() != b.cols()) throw ShapeError("critic estimate of sets with different dimension");
  return MeanOf(EvalCritic(critic, a)) - MeanOf(EvalCritic(critic, b));
}

Matrix SampleInterpolates(const Matrix &a, const Matrix &b, std::mt19937_64 &rng) {
  if (a.rows() == 0 || b.rows() == 0) throw ShapeError("interpolates of an empty set");
  if (a.cols() != b.cols()) throw ShapeError("interpolates of sets with different dimension");
  const int n = std::min(a.rows(), b.rows());
  auto pick = [&](const Matrix &src, int i) {
    if (src.rows() == n) return i;
    return std::uniform_int_distribution<int>(0, src.rows() - 1)(rng);
  };
  Matrix out(n, a.cols());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    int ia = pick(a, i);
    int ib = pick(b, i);
    double t = unit(rng);
    for (int c = 0; c < a.cols(); ++c) out(i, c) = t * a(ia, c) + (1.0 - t) * b(ib, c);
  }
  return out;
}

Var GradientPenaltyInGraph(Graph &g, std::span<const EncoderVars::Layer> critic,
                           const Matrix &interpolates) {
  const int n = interpolates.rows();
  // Forward pass for the relu masks.
  std::vector<Matrix> masks;
  {
    Graph fwd;
    Var h = fwd.Constant(interpolates);
    for (size_t l = 0; l + 1 < critic.size(); ++l) {
      h = fwd.Affine(h, fwd.Constant(g.value(critic[l].weight)),
                     fwd.Constant(g.value(critic[l].bias)));
      const Matrix &pre = fwd.value(h);
      Matrix mask(pre.rows(), pre.cols());
      for (size_t i = 0; i < pre.size(); ++i) mask[i] = pre[i] > 0.0 ? 1.0 : 0.0;
      masks.push_back(std::move(mask));
      h = fwd.Relu(h);
    }
  }
  // d critic / d x, row by row: ones * W_L, then alternately mask and
  // multiply by the next weight down the stack.
  Var grad = g.AffineT(g.Constant(Ones(n)), critic.back().weight);
  for (int l = static_cast<int>(critic.size()) - 2; l >= 0; --l) {
    grad = g.Mul(grad, g.Constant(masks[l]));
    grad = g.AffineT(grad, critic[l].weight);
  }
  return g.Mean(g.Square(g.Shift(g.RowNorms(grad), -1.0)));
}

double GradientPenalty(const CriticParams &critic, const Matrix &a, const Matrix &b,
                       std::mt19937_64 &rng) {
  Matrix x = SampleInterpolates(a, b, rng);
  Graph g;
  auto layers = AddCriticToGraph(g, critic, false);
  return g.value(GradientPenaltyInGraph(g, layers, x))[0];
}

double TrainCritic(CriticState &critic, const Matrix &a, const Matrix &b,
                   const AlignConfig &config, std::mt19937_64 &rng, int steps) {
  if (config.discrepancy != Discrepancy::kWasserstein) {
    throw ConfigError("critic training requires the wasserstein discrepancy");
  }
  if (a.cols() != critic.params.input_dim() || b.cols() != critic.params.input_dim()) {
    throw ShapeError("critic input dimension mismatch");
  }
  AdamConfig adam{config.critic_lr, 0.5, 0.9, 1e-8};
  for (int step = 0; step < steps; ++step) {
    Matrix x = SampleInterpolates(a, b, rng);
    Graph g;
    auto layers = AddCriticToGraph(g, critic.params, true);
    Var estimate = g.Sub(g.Mean(CriticInGraph(g, layers, g.Constant(a))),
                         g.Mean(CriticInGraph(g, layers, g.Constant(b))));
    const double value = g.value(estimate)[0];
    if (!std::isfinite(value) || std::abs(value) > kDivergenceLimit) {
      throw DivergenceError("critic estimate diverged to " + std::to_string(value) +
                            " at step " + std::to_string(step));
    }
    Var cost = g.Sub(g.Scale(GradientPenaltyInGraph(g, layers, x), config.gp_weight), estimate);
    g.Backward(cost);
    std::vector<Matrix> grads;
    for (const auto &layer : layers) {
      grads.push_back(g.grad(layer.weight).empty() ? Matrix(g.value(layer.weight).rows(),
                                                            g.value(layer.weight).cols())
                                                   : g.grad(layer.weight));
      grads.push_back(g.grad(layer.bias).empty() ? Matrix(1, g.value(layer.bias).cols())
                                                 : g.grad(layer.bias));
    }
    auto refs = critic.params.Refs();
    AdaptiveMomentUpdate(refs, grads, critic.adam, adam);
  }
  const double final_estimate = CriticEstimate(critic.params, a, b);
  if (!std::isfinite(final_estimate) || std::abs(final_estimate) > kDivergenceLimit) {
    throw DivergenceError("critic estimate diverged to " + std::to_string(final_estimate));
  }
  return final_estimate;
}

double ExactW1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("exact W1 needs equal sample sizes");
  if (a.empty()) return 0.0;
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (size_t i = 0; i < sa.size(); ++i) acc += std::abs(sa[i] - sb[i]);
  return acc / static_cast<double>(sa.size());
}

double DiscGradDiagnostic(const CriticParams &critic, const Matrix &a, const Matrix &b) {
  if (a.rows() == 0 || b.rows() == 0) throw ShapeError("diagnostic of an empty set");
  Matrix ca = EvalCritic(critic, a);
  Matrix cb = EvalCritic(critic, b);
  const int pairs = std::max(a.rows(), b.rows());
  double total = 0.0;
  for (int p = 0; p < pairs; ++p) {
    const int i = p % a.rows();
    const int j = p % b.rows();
    const double diff = ca(i, 0) - cb(j, 0);
    double weight = 0.0;
    for (int c = 0; c < a.cols(); ++c) {
      weight += (a(i, c) / a.rows() + b(j, c) / b.rows()) / 2.0;
    }
    total += diff * diff * weight;
  }
  return total;
}

namespace {

struct GaussianFit {
  Var mean;      // 1 x D
  Var variance;  // 1 x D
  Var log_variance;
  Var inv_variance;
};

GaussianFit FitDiagonal(Graph &g, Var x) {
  const Matrix &xv = g.value(x);
  if (xv.rows() < 2) throw ShapeError("KL discrepancy needs at least two samples per set");
  GaussianFit fit;
  fit.mean = g.ColMean(x);
  Var centered = g.Sub(x, g.AffineT(g.Constant(Ones(xv.rows())), fit.mean));
  Var raw = g.ColMean(g.Square(centered));
  static std::atomic<bool> warned{false};
  for (double v : g.value(raw).data()) {
    if (v < kVarianceFloor) {
      if (!warned.exchange(true)) {
        std::cerr << "warning: embedding variance below " << kVarianceFloor
                  << " floored (reported once)\n";
      }
      break;
    }
  }
  fit.variance = g.Shift(g.Relu(g.Shift(raw, -kVarianceFloor)), kVarianceFloor);
  fit.log_variance = g.Log(fit.variance);
  fit.inv_variance = g.Exp(g.Scale(fit.log_variance, -1.0));
  return fit;
}

// KL(p || q) for diagonal Gaussians, summed over dimensions.
Var DiagonalKl(Graph &g, const GaussianFit &p, const GaussianFit &q) {
  Var gap = g.Square(g.Sub(p.mean, q.mean));
  Var ratio = g.Mul(g.Add(p.variance, gap), q.inv_variance);
  Var terms = g.Add(g.Sub(q.log_variance, p.log_variance), g.Shift(ratio, -1.0));
  return g.Scale(g.Sum(terms), 0.5);
}

}  // namespace

Var KlDiscrepancyInGraph(Graph &g, Var a, Var b) {
  if (g.value(a).cols() != g.value(b).cols()) {
    throw ShapeError("KL discrepancy of sets with different dimension");
  }
  GaussianFit fa = FitDiagonal(g, a);
  GaussianFit fb = FitDiagonal(g, b);
  return g.Scale(g.Add(DiagonalKl(g, fa, fb), DiagonalKl(g, fb, fa)), 0.5);
}

double KlDiscrepancy(const Matrix &a, const Matrix &b) {
  Graph g;
  return g.value(KlDiscrepancyInGraph(g, g.Constant(a), g.Constant(b)))[0];
}

std::vector<std::pair<int, int>> ViewPairs(int views) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < views; ++i) {
    for (int j = i + 1; j < views; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

Var AlignmentLossInGraph(Graph &g, std::span<const Var> views,
                         std::span<const CriticParams> critics, const AlignConfig &config) {
  if (views.size() < 2) throw ConfigError("alignment needs at least two views");
  auto pairs = ViewPairs(static_cast<int>(views.size()));
  Var total = g.Constant(Matrix::Scalar(0.0));
  if (config.discrepancy == Discrepancy::kNone) return total;
  if (config.discrepancy == Discrepancy::kWasserstein && critics.size() != pairs.size()) {
    throw ConfigError("expected " + std::to_string(pairs.size()) + " critics, got " +
                      std::to_string(critics.size()));
  }
  for (size_t p = 0; p < pairs.size(); ++p) {
    Var a = views[pairs[p].first];
    Var b = views[pairs[p].second];
    Var term;
    if (config.discrepancy == Discrepancy::kWasserstein) {
      auto layers = AddCriticToGraph(g, critics[p], false);
      term = g.Sub(g.Mean(CriticInGraph(g, layers, a)), g.Mean(CriticInGraph(g, layers, b)));
    } else {
      term = KlDiscrepancyInGraph(g, a, b);
    }
    total = g.Add(total, term);
  }
  return total;
}

void SerializeCritic(const CriticState &state, ByteWriter &out) {
  out.PutU32(static_cast<uint32_t>(state.params.layers.size()));
  for (const auto &layer : state.params.layers) {
    WriteMatrix(out, layer.weight);
    WriteMatrix(out, layer.bias);
  }
  state.adam.Serialize(out);
}

CriticState DeserializeCritic(ByteReader &in) {
  CriticState state;
  uint32_t layers = in.GetU32();
  for (uint32_t l = 0; l < layers; ++l) {
    DenseLayer layer{ReadMatrix(in), ReadMatrix(in)};
    state.params.layers.push_back(std::move(layer));
  }
  state.adam = AdamState::Deserialize(in);
  return state;
}

}  // namespace ipmc
