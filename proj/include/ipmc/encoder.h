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

#ifndef IPMC_ENCODER_H_
#define IPMC_ENCODER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "ipmc/adam.h"
#include "ipmc/binary_io.h"
#include "ipmc/diffmath.h"

namespace ipmc {

struct DenseLayer {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
  bool operator==(const DenseLayer &) const = default;
};

// Affine-relu stack for one view. The output of the last layer is passed
// through relu and then l2-normalized, so embeddings are non-negative unit
// vectors and any cosine similarity between two of them lies in [0, 1].
struct ViewEncoder {
  std::vector<DenseLayer> layers;
  int input_dim() const { return layers.front().weight.cols(); }
  int output_dim() const { return layers.back().weight.rows(); }
  bool operator==(const ViewEncoder &) const = default;
};

// One encoder per view; architectures match, parameters are independent.
struct EncoderParams {
  std::vector<ViewEncoder> views;

  int view_count() const { return static_cast<int>(views.size()); }
  int embed_dim() const { return views.front().output_dim(); }
  std::vector<ParamRef> Refs();
  // Order-independent FNV-1a digest of all parameter bits.
  uint64_t Checksum() const;
  bool operator==(const EncoderParams &) const = default;
};

// A single encoded (sample, view) term.
struct Embedding {
  std::vector<double> vector;
  int sample = 0;
  int view = 0;
};

// `widths` lists the output width of each layer; the last entry is the
// embedding dimension. Weights are drawn from U(-s, s) and biases from
// U(0, s) with s = 1 / sqrt(fan_in).
EncoderParams InitEncoderParams(std::span<const int> input_dims, std::span<const int> widths,
                                uint64_t seed);

// Graph handles for one set of encoder parameters.
struct EncoderVars {
  struct Layer {
    Var weight;
    Var bias;
  };
  std::vector<std::vector<Layer>> views;
};

EncoderVars AddEncoderToGraph(Graph &g, const EncoderParams &params, bool trainable);

// Differentiable forward pass. Raises DomainError when a row collapses to
// the zero vector before normalization.
Var EncodeInGraph(Graph &g, const EncoderVars &vars, int view, Var batch);

// Eager forward pass returning one embedding per row of `batch`.
Matrix Encode(const EncoderParams &params, int view, const Matrix &batch);

// Concatenates one sample's per-view embeddings in ascending view order.
// The input must hold exactly `view_count` embeddings of the same sample,
// already sorted by view.
std::vector<double> ConcatRepresentation(std::span<const Embedding> per_view, int view_count);

// Row-wise concatenation of per-view embedding matrices (n x m*D).
Matrix ConcatRepresentations(std::span<const Matrix> per_view);

// Binary format: "IPMCENC\0", u32 version, u32 m, u32 layer count, u32
// widths[layer count], u32 input dims[m], then per view and layer the
// weight and bias matrices (u32 rows, u32 cols, little-endian reals).
void SerializeEncoder(const EncoderParams &params, ByteWriter &out);
EncoderParams DeserializeEncoder(ByteReader &in);

}  // namespace ipmc

#endif  // IPMC_ENCODER_H_
