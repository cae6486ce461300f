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

#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "ipmc/errors.h"

namespace ipmc {

namespace {

constexpr char kEncoderMagic[8] = {'I', 'P', 'M', 'C', 'E', 'N', 'C', '\0'};
constexpr uint32_t kEncoderVersion = 1;

}  // namespace

std::vector<ParamRef> EncoderParams::Refs() {
  std::vector<ParamRef> refs;
  for (size_t v = 0; v < views.size(); ++v) {
    for (size_t l = 0; l < views[v].layers.size(); ++l) {
      std::string prefix = "encoder.v" + std::to_string(v) + ".l" + std::to_string(l);
      refs.push_back({prefix + ".weight", &views[v].layers[l].weight});
      refs.push_back({prefix + ".bias", &views[v].layers[l].bias});
    }
  }
  return refs;
}

uint64_t EncoderParams::Checksum() const {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (const auto &view : views) {
    for (const auto &layer : view.layers) {
      for (double w : layer.weight.data()) mix(std::bit_cast<uint64_t>(w));
      for (double b : layer.bias.data()) mix(std::bit_cast<uint64_t>(b));
    }
  }
  return h;
}

EncoderParams InitEncoderParams(std::span<const int> input_dims, std::span<const int> widths,
                                uint64_t seed) {
  if (input_dims.empty()) throw ConfigError("encoder needs at least one view");
  if (widths.empty()) throw ConfigError("encoder needs at least one layer");
  for (int w : widths) {
    if (w <= 0) throw ConfigError("zero-width encoder layer");
  }
  std::mt19937_64 rng(seed);
  EncoderParams params;
  for (int in_dim : input_dims) {
    if (in_dim <= 0) throw ConfigError("zero-width encoder input");
    ViewEncoder enc;
    int fan_in = in_dim;
    for (int out : widths) {
      const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> wdist(-s, s);
      std::uniform_real_distribution<double> bdist(0.0, s);
      DenseLayer layer{Matrix(out, fan_in), Matrix(1, out)};
      for (double &w : layer.weight.data()) w = wdist(rng);
      for (double &b : layer.bias.data()) b = bdist(rng);
      enc.layers.push_back(std::move(layer));
      fan_in = out;
    }
    params.views.push_back(std::move(enc));
  }
  return params;
}

EncoderVars AddEncoderToGraph(Graph &g, const EncoderParams &params, bool trainable) {
  EncoderVars vars;
  for (const auto &view : params.views) {
    std::vector<EncoderVars::Layer> layers;
    for (const auto &layer : view.layers) {
      if (trainable) {
        layers.push_back({g.Parameter(layer.weight), g.Parameter(layer.bias)});
      } else {
        layers.push_back({g.Constant(layer.weight), g.Constant(layer.bias)});
      }
    }
    vars.views.push_back(std::move(layers));
  }
  return vars;
}

Var EncodeInGraph(Graph &g, const EncoderVars &vars, int view, Var batch) {
  if (view < 0 || view >= static_cast<int>(vars.views.size())) {
    throw IndexError("view " + std::to_string(view) + " out of range");
  }
  Var h = batch;
  for (const auto &layer : vars.views[view]) h = g.Relu(g.Affine(h, layer.weight, layer.bias));
  try {
    return g.L2NormalizeRows(h);
  } catch (const DomainError &e) {
    throw DomainError("collapsed encoder output for view " + std::to_string(view) + ": " +
                      e.what());
  }
}

Matrix Encode(const EncoderParams &params, int view, const Matrix &batch) {
  if (view < 0 || view >= params.view_count()) {
    throw IndexError("view " + std::to_string(view) + " out of range");
  }
  if (batch.cols() != params.views[view].input_dim()) {
    throw ShapeError("view " + std::to_string(view) + " expects " +
                     std::to_string(params.views[view].input_dim()) + " features, got " +
                     std::to_string(batch.cols()));
  }
  Graph g;
  Var h = g.Constant(batch);
  for (const auto &layer : params.views[view].layers) {
    h = g.Relu(g.Affine(h, g.Constant(layer.weight), g.Constant(layer.bias)));
  }
  try {
    return g.value(g.L2NormalizeRows(h));
  } catch (const DomainError &e) {
    throw DomainError("collapsed encoder output for view " + std::to_string(view) + ": " +
                      e.what());
  }
}

std::vector<double> ConcatRepresentation(std::span<const Embedding> per_view, int view_count) {
  if (static_cast<int>(per_view.size()) != view_count) {
    throw ShapeError("expected " + std::to_string(view_count) + " views, got " +
                     std::to_string(per_view.size()));
  }
  std::vector<double> out;
  for (int v = 0; v < view_count; ++v) {
    const Embedding &e = per_view[v];
    if (e.view != v) {
      throw ShapeError("view " + std::to_string(e.view) + " found at position " +
                       std::to_string(v));
    }
    if (e.sample != per_view[0].sample) throw ShapeError("embeddings from different samples");
    if (e.vector.size() != per_view[0].vector.size()) {
      throw ShapeError("embedding dimensions differ across views");
    }
    out.insert(out.end(), e.vector.begin(), e.vector.end());
  }
  return out;
}

Matrix ConcatRepresentations(std::span<const Matrix> per_view) {
  if (per_view.empty()) throw ShapeError("no views to concatenate");
  const int n = per_view[0].rows();
  int total = 0;
  for (const auto &m : per_view) {
    if (m.rows() != n) throw ShapeError("views disagree on sample count");
    total += m.cols();
  }
  Matrix out(n, total);
  for (int r = 0; r < n; ++r) {
    int offset = 0;
    for (const auto &m : per_view) {
      for (int c = 0; c < m.cols(); ++c) out(r, offset + c) = m(r, c);
      offset += m.cols();
    }
  }
  return out;
}

void SerializeEncoder(const EncoderParams &params, ByteWriter &out) {
  out.PutBytes(std::string_view(kEncoderMagic, 8));
  out.PutU32(kEncoderVersion);
  out.PutU32(static_cast<uint32_t>(params.view_count()));
  const auto &first = params.views.front().layers;
  out.PutU32(static_cast<uint32_t>(first.size()));
  for (const auto &layer : first) out.PutU32(static_cast<uint32_t>(layer.weight.rows()));
  for (const auto &view : params.views) out.PutU32(static_cast<uint32_t>(view.input_dim()));
  for (const auto &view : params.views) {
    for (const auto &layer : view.layers) {
      WriteMatrix(out, layer.weight);
      WriteMatrix(out, layer.bias);
    }
  }
}

EncoderParams DeserializeEncoder(ByteReader &in) {
  if (in.GetBytes(8) != std::string_view(kEncoderMagic, 8)) {
    throw FormatError("bad encoder magic");
  }
  uint32_t version = in.GetU32();
  if (version != kEncoderVersion) {
    throw FormatError("unsupported encoder version " + std::to_string(version));
  }
  uint32_t m = in.GetU32();
  uint32_t layers = in.GetU32();
  if (m == 0 || layers == 0) throw FormatError("empty encoder header");
  std::vector<int> widths(layers), inputs(m);
  for (auto &w : widths) w = static_cast<int>(in.GetU32());
  for (auto &d : inputs) d = static_cast<int>(in.GetU32());
  EncoderParams params;
  for (uint32_t v = 0; v < m; ++v) {
    ViewEncoder enc;
    int fan_in = inputs[v];
    for (uint32_t l = 0; l < layers; ++l) {
      DenseLayer layer{ReadMatrix(in), ReadMatrix(in)};
      if (layer.weight.rows() != widths[l] || layer.weight.cols() != fan_in ||
          layer.bias.rows() != 1 || layer.bias.cols() != widths[l]) {
        throw FormatError("encoder layer shape does not match header");
      }
      enc.layers.push_back(std::move(layer));
      fan_in = widths[l];
    }
    params.views.push_back(std::move(enc));
  }
  return params;
}

}  // namespace ipmc
