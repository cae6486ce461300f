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

#ifndef IPMC_EVAL_H_
#define IPMC_EVAL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipmc/dataset.h"
#include "ipmc/diffmath.h"
#include "ipmc/encoder.h"

namespace ipmc {

struct ProbeConfig {
  int epochs = 100;
  double lr = 1e-2;
  int batch = 64;
  uint64_t seed = 7;
};

// Multinomial logistic regression on standardized features (statistics
// from the training rows), trained with Adam on minibatches. Returns top-1
// accuracy on the test rows. Every label seen in either split must occur in
// the training labels (ConfigError otherwise).
double LinearProbe(const Matrix &train_x, std::span<const int> train_y, const Matrix &test_x,
                   std::span<const int> test_y, const ProbeConfig &config = {});

// Gallery row indices sorted by ascending L1 distance to `query`, ties by
// ascending index; the first k are returned.
std::vector<int> KnnRetrieve(std::span<const double> query, const Matrix &gallery, int k);

// Accuracy of a linear probe predicting which view an embedding came from.
// Samples with even index form the training half, odd ones the test half.
double ViewDiscriminability(std::span<const Matrix> per_view, const ProbeConfig &config = {});

struct Embedding2d {
  Matrix coords;                    // n x 2
  std::vector<double> explained;   // variance along each of the 2 axes
};

// Projection of the centered rows onto the top two principal directions,
// each axis signed so that its largest-magnitude coordinate is positive.
Embedding2d ExportEmbedding2d(const Matrix &features);
// CSV with columns index, x, y, label.
std::string Embedding2dCsv(const Embedding2d &e, std::span<const int> labels);

// Per-view embeddings of the given dataset rows.
std::vector<Matrix> EmbedViews(const EncoderParams &params, const MultiViewDataset &data,
                               std::span<const int> rows);

// Probe on the concatenated representation: trains on the training split
// and reports test accuracy.
double ProbeEncoder(const EncoderParams &params, const MultiViewDataset &data,
                    const ProbeConfig &config = {});

}  // namespace ipmc

#endif  // IPMC_EVAL_H_
