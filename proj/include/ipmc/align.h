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

#ifndef IPMC_ALIGN_H_
#define IPMC_ALIGN_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipmc/adam.h"
#include "ipmc/binary_io.h"
#include "ipmc/diffmath.h"
#include "ipmc/encoder.h"

namespace ipmc {

enum class Discrepancy { kWasserstein, kKl, kNone };

Discrepancy ParseDiscrepancy(const std::string &name);
std::string DiscrepancyName(Discrepancy d);

struct AlignConfig {
  Discrepancy discrepancy = Discrepancy::kWasserstein;
  // Critic ascent steps per trainer step.
  int k_critic = 5;
  double gp_weight = 10.0;
  double critic_lr = 1e-3;
  // Hidden widths of the critic; the output layer (width 1) is implicit.
  std::vector<int> critic_hidden = {1000, 100, 100};

  void Validate() const;
  bool operator==(const AlignConfig &) const = default;
};

// Scalar-valued affine-relu stack. Every layer but the last is followed by
// relu; the last maps to a single output.
struct CriticParams {
  std::vector<DenseLayer> layers;
  int input_dim() const { return layers.front().weight.cols(); }
  std::vector<ParamRef> Refs();
  bool operator==(const CriticParams &) const = default;
};

struct CriticState {
  CriticParams params;
  AdamState adam;
  bool operator==(const CriticState &) const = default;
};

CriticParams InitCritic(int input_dim, std::span<const int> hidden, uint64_t seed);

// Builds a one-layer critic x -> <slope, x> + offset (test fixtures).
CriticParams LinearCritic(std::span<const double> slope, double offset = 0.0);

// Per-row critic values (B x 1), differentiable w.r.t. x and the critic.
Var CriticInGraph(Graph &g, std::span<const EncoderVars::Layer> critic, Var x);
std::vector<EncoderVars::Layer> AddCriticToGraph(Graph &g, const CriticParams &critic,
                                                 bool trainable);

// mean critic(A) - mean critic(B). Rows are samples.
double CriticEstimate(const CriticParams &critic, const Matrix &a, const Matrix &b);

// Random interpolates between A and B after resampling the larger set with
// replacement down to the size of the smaller one.
Matrix SampleInterpolates(const Matrix &a, const Matrix &b, std::mt19937_64 &rng);

// mean over interpolates of (||grad_x critic(x)|| - 1)^2, differentiable
// w.r.t. the critic parameters. The input gradient is assembled in the
// graph from the transposed layers and the (constant) relu masks.
Var GradientPenaltyInGraph(Graph &g, std::span<const EncoderVars::Layer> critic,
                           const Matrix &interpolates);
double GradientPenalty(const CriticParams &critic, const Matrix &a, const Matrix &b,
                       std::mt19937_64 &rng);

// `steps` ascent steps on estimate - gp_weight * penalty with A and B held
// constant. Returns the estimate after the last step. An estimate beyond
// 1e6 in magnitude raises DivergenceError.
double TrainCritic(CriticState &critic, const Matrix &a, const Matrix &b,
                   const AlignConfig &config, std::mt19937_64 &rng, int steps);
inline double TrainCritic(CriticState &critic, const Matrix &a, const Matrix &b,
                          const AlignConfig &config, std::mt19937_64 &rng) {
  return TrainCritic(critic, a, b, config, rng, config.k_critic);
}

// Exact 1-D W1 between equal-size empirical samples via sorted matching.
double ExactW1_1d(std::span<const double> a, std::span<const double> b);

// sum over index-aligned pairs (the shorter set cycles) of
// (critic(a) - critic(b))^2 * sum_k (a_k / |A| + b_k / |B|) / 2.
// Diagnostic only.
double DiscGradDiagnostic(const CriticParams &critic, const Matrix &a, const Matrix &b);

// Symmetrized KL divergence between diagonal Gaussian fits (biased moment
// estimates) of A and B. Variances below 1e-8 are floored.
Var KlDiscrepancyInGraph(Graph &g, Var a, Var b);
double KlDiscrepancy(const Matrix &a, const Matrix &b);

// Unordered view pairs (i < j) in lexicographic order.
std::vector<std::pair<int, int>> ViewPairs(int views);

// Sum over all view pairs of the configured discrepancy. Critics are frozen
// (constants); gradients reach only the embeddings. `critics[p]` belongs to
// ViewPairs(views.size())[p].
Var AlignmentLossInGraph(Graph &g, std::span<const Var> views,
                         std::span<const CriticParams> critics, const AlignConfig &config);

void SerializeCritic(const CriticState &state, ByteWriter &out);
CriticState DeserializeCritic(ByteReader &in);

}  // namespace ipmc

#endif  // IPMC_ALIGN_H_
