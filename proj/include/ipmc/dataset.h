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

#ifndef IPMC_DATASET_H_
#define IPMC_DATASET_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ipmc/diffmath.h"

namespace ipmc {

// n samples observed through m views. Labels and the split flag are for
// evaluation only; the trainer receives a TrainingViews instead.
struct MultiViewDataset {
  std::vector<Matrix> views;  // one n x d_v matrix per view
  std::vector<int> labels;
  std::vector<uint8_t> test;  // 1 marks a held-out sample

  int samples() const { return views.empty() ? 0 : views.front().rows(); }
  int view_count() const { return static_cast<int>(views.size()); }
  std::vector<int> view_dims() const;
  // Throws ShapeError on ragged views or mismatched label/split lengths.
  void Validate() const;
  bool operator==(const MultiViewDataset &) const = default;
};

// Label-free training input: the training-split rows of every view.
// `source_index[i]` is the dataset row of local sample i.
struct TrainingViews {
  std::vector<Matrix> views;
  std::vector<int> source_index;

  int samples() const { return static_cast<int>(source_index.size()); }
  int view_count() const { return static_cast<int>(views.size()); }
  std::vector<int> view_dims() const;
};

TrainingViews TrainingSplit(const MultiViewDataset &data);
// Restricts the training input to a subset of views, in the given order.
TrainingViews SelectViews(const TrainingViews &data, std::span<const int> views);
MultiViewDataset SelectViews(const MultiViewDataset &data, std::span<const int> views);

// Row indices of the requested split, ascending.
std::vector<int> SplitIndices(const MultiViewDataset &data, bool test);
Matrix SelectRows(const Matrix &m, std::span<const int> rows);

struct SyntheticConfig {
  int classes = 4;
  int per_class = 500;
  int latent_dim = 8;
  int views = 3;
  // Width of every view.
  int view_dim = 32;
  // Distance between class means, in units of the within-class deviation.
  double class_separation = 5.0;
  // Scale of the view-specific nuisance added before the relu.
  double noise_scale = 1.0;
  // Rank of the structured part of each view's nuisance.
  int nuisance_rank = 4;
  double test_fraction = 0.2;
  uint64_t seed = 1;
};

// z ~ N(mu_c, I) with the class means on a scaled simplex; view v is
// relu(A_v z + b_v + noise_scale * (C_v u_v + e_v)) with fixed random maps
// A_v, C_v and fresh Gaussian u_v, e_v per sample. Samples are shuffled and
// a stratified test split is marked.
MultiViewDataset GenerateSynthetic(const SyntheticConfig &config);

// The fixed per-view maps behind GenerateSynthetic, usable on their own to
// render chosen latents.
class SyntheticModel {
 public:
  // Draws the maps from `rng`; validates the config.
  SyntheticModel(const SyntheticConfig &config, std::mt19937_64 &rng);

  // Class mean of latent coordinate k.
  double Mean(int label, int k) const;
  // One view of latent z with fresh nuisance drawn from `rng`.
  std::vector<double> Render(int view, std::span<const double> z, std::mt19937_64 &rng) const;

 private:
  struct ViewMap {
    Matrix a, c;
    std::vector<double> b;
  };
  SyntheticConfig config_;
  std::vector<ViewMap> maps_;
};

// Rows are images with pixels stored as interleaved r, g, b in [0, 1].
struct ChannelViews {
  Matrix rgb;        // n x 3P, the input
  Matrix luminance;  // n x P
  Matrix chroma;     // n x 2P, interleaved (cb, cr)
};

// L = 0.299 R + 0.587 G + 0.114 B, cb = (B - L) / 1.772 + 0.5,
// cr = (R - L) / 1.402 + 0.5. Every channel stays in [0, 1]; a gray pixel
// has cb = cr = 0.5. Out-of-range pixels raise DomainError.
ChannelViews DecomposeChannels(const Matrix &rgb);
Matrix ReconstructRgb(const Matrix &luminance, const Matrix &chroma);

struct ImageConfig {
  int classes = 4;
  int per_class = 100;
  int side = 6;
  double noise = 0.05;
  double test_fraction = 0.2;
  uint64_t seed = 1;
};

// Small procedural images (class-specific hue and stripe orientation with
// random phase and jitter) decomposed into RGB, luminance and chroma views.
MultiViewDataset GenerateChannelDataset(const ImageConfig &config);

// Format: "IPMCDAT\0", u32 version, u32 n, u32 m, u32 dims[m], i32
// labels[n], u8 test[n], then each view's n x d_v reals row-major as
// little-endian IEEE-754 doubles.
std::vector<uint8_t> SerializeDataset(const MultiViewDataset &data);
MultiViewDataset DeserializeDataset(std::span<const uint8_t> bytes);
void WriteDataset(const MultiViewDataset &data, const std::string &path);
MultiViewDataset ReadDataset(const std::string &path);

}  // namespace ipmc

#endif  // IPMC_DATASET_H_
