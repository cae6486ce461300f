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

#include "ipmc/dataset.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ipmc/binary_io.h"
#include "ipmc/errors.h"

namespace ipmc {

namespace {

constexpr char kMagic[8] = {'I', 'P', 'M', 'C', 'D', 'A', 'T', '\0'};
constexpr uint32_t kVersion = 1;

constexpr double kRedWeight = 0.299;
constexpr double kGreenWeight = 0.587;
constexpr double kBlueWeight = 0.114;
constexpr double kBlueSpan = 2.0 * (1.0 - kBlueWeight);  // 1.772
constexpr double kRedSpan = 2.0 * (1.0 - kRedWeight);    // 1.402

std::vector<int> DimsOf(const std::vector<Matrix> &views) {
  std::vector<int> dims;
  for (const auto &v : views) dims.push_back(v.cols());
  return dims;
}

// Shuffles samples and marks the last `test_fraction` of every class as
// held out.
void ShuffleAndSplit(MultiViewDataset &data, int classes, double test_fraction,
                     std::mt19937_64 &rng) {
  const int n = data.samples();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  MultiViewDataset out;
  for (const auto &v : data.views) out.views.push_back(SelectRows(v, order));
  for (int i : order) out.labels.push_back(data.labels[i]);
  out.test.assign(n, 0);
  for (int c = 0; c < classes; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (out.labels[i] == c) members.push_back(i);
    }
    const int held = static_cast<int>(std::lround(test_fraction * members.size()));
    for (int j = 0; j < held; ++j) out.test[members[members.size() - 1 - j]] = 1;
  }
  data = std::move(out);
}

}  // namespace

std::vector<int> MultiViewDataset::view_dims() const { return DimsOf(views); }
std::vector<int> TrainingViews::view_dims() const { return DimsOf(views); }

void MultiViewDataset::Validate() const {
  const int n = samples();
  for (size_t v = 0; v < views.size(); ++v) {
    if (views[v].rows() != n) {
      throw ShapeError("view " + std::to_string(v) + " has " + std::to_string(views[v].rows()) +
                       " rows, expected " + std::to_string(n));
    }
  }
  if (static_cast<int>(labels.size()) != n || static_cast<int>(test.size()) != n) {
    throw ShapeError("labels and split flags must have one entry per sample");
  }
}

Matrix SelectRows(const Matrix &m, std::span<const int> rows) {
  Matrix out(static_cast<int>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= m.rows()) {
      throw IndexError("row " + std::to_string(rows[i]) + " outside " + m.ShapeString());
    }
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(static_cast<int>(i)).begin());
  }
  return out;
}

std::vector<int> SplitIndices(const MultiViewDataset &data, bool test) {
  std::vector<int> out;
  for (int i = 0; i < data.samples(); ++i) {
    if ((data.test[i] != 0) == test) out.push_back(i);
  }
  return out;
}

TrainingViews TrainingSplit(const MultiViewDataset &data) {
  data.Validate();
  TrainingViews out;
  out.source_index = SplitIndices(data, false);
  for (const auto &v : data.views) out.views.push_back(SelectRows(v, out.source_index));
  return out;
}

TrainingViews SelectViews(const TrainingViews &data, std::span<const int> views) {
  TrainingViews out;
  out.source_index = data.source_index;
  for (int v : views) {
    if (v < 0 || v >= data.view_count()) throw IndexError("view " + std::to_string(v));
    out.views.push_back(data.views[v]);
  }
  return out;
}

MultiViewDataset SelectViews(const MultiViewDataset &data, std::span<const int> views) {
  MultiViewDataset out;
  out.labels = data.labels;
  out.test = data.test;
  for (int v : views) {
    if (v < 0 || v >= data.view_count()) throw IndexError("view " + std::to_string(v));
    out.views.push_back(data.views[v]);
  }
  return out;
}

SyntheticModel::SyntheticModel(const SyntheticConfig &config, std::mt19937_64 &rng)
    : config_(config) {
  if (config.classes < 2) throw ConfigError("need at least 2 classes");
  if (config.views < 2) throw ConfigError("need at least 2 views");
  if (config.latent_dim < config.classes) {
    throw ConfigError("latent_dim must be at least the number of classes");
  }
  if (config.per_class < 1 || config.view_dim < 1 || config.nuisance_rank < 0) {
    throw ConfigError("synthetic sizes must be positive");
  }
  if (config.noise_scale < 0.0) throw ConfigError("noise_scale must be non-negative");
  if (config.test_fraction < 0.0 || config.test_fraction >= 1.0) {
    throw ConfigError("test_fraction must lie in [0, 1)");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const int l = config.latent_dim;
  maps_.resize(config.views);
  for (auto &map : maps_) {
    map.a = Matrix(config.view_dim, l);
    for (double &x : map.a.data()) x = normal(rng) / std::sqrt(static_cast<double>(l));
    map.c = Matrix(config.view_dim, config.nuisance_rank);
    for (double &x : map.c.data()) x = normal(rng);
    map.b.resize(config.view_dim);
    for (double &x : map.b) x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
}

double SyntheticModel::Mean(int label, int k) const {
  // Simplex vertices scaled so any two class means sit `class_separation` apart.
  return k == label ? config_.class_separation / std::sqrt(2.0) : 0.0;
}

std::vector<double> SyntheticModel::Render(int view, std::span<const double> z,
                                           std::mt19937_64 &rng) const {
  if (static_cast<int>(z.size()) != config_.latent_dim) throw ShapeError("latent size mismatch");
  std::normal_distribution<double> normal(0.0, 1.0);
  const ViewMap &map = maps_.at(view);
  std::vector<double> u(config_.nuisance_rank);
  for (double &x : u) x = normal(rng);
  std::vector<double> row(config_.view_dim);
  for (int j = 0; j < config_.view_dim; ++j) {
    double x = map.b[j];
    for (int k = 0; k < config_.latent_dim; ++k) x += map.a(j, k) * z[k];
    double nuisance = normal(rng) * 0.5;
    for (int k = 0; k < config_.nuisance_rank; ++k) nuisance += map.c(j, k) * u[k];
    row[j] = std::max(0.0, x + config_.noise_scale * nuisance);
  }
  return row;
}

MultiViewDataset GenerateSynthetic(const SyntheticConfig &config) {
  std::mt19937_64 rng(config.seed);
  SyntheticModel model(config, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = config.classes * config.per_class;
  MultiViewDataset data;
  data.views.assign(config.views, Matrix(n, config.view_dim));
  data.labels.resize(n);
  std::vector<double> z(config.latent_dim);
  for (int i = 0; i < n; ++i) {
    const int label = i / config.per_class;
    data.labels[i] = label;
    for (int k = 0; k < config.latent_dim; ++k) z[k] = normal(rng) + model.Mean(label, k);
    for (int v = 0; v < config.views; ++v) {
      auto row = model.Render(v, z, rng);
      std::copy(row.begin(), row.end(), data.views[v].row(i).begin());
    }
  }
  data.test.assign(n, 0);
  ShuffleAndSplit(data, config.classes, config.test_fraction, rng);
  return data;
}

ChannelViews DecomposeChannels(const Matrix &rgb) {
  if (rgb.cols() % 3 != 0) throw ShapeError("rgb rows must hold 3 values per pixel");
  const int pixels = rgb.cols() / 3;
  ChannelViews out{rgb, Matrix(rgb.rows(), pixels), Matrix(rgb.rows(), 2 * pixels)};
  for (int i = 0; i < rgb.rows(); ++i) {
    for (int p = 0; p < pixels; ++p) {
      const double r = rgb(i, 3 * p), g = rgb(i, 3 * p + 1), b = rgb(i, 3 * p + 2);
      for (double c : {r, g, b}) {
        if (!(c >= 0.0 && c <= 1.0)) {
          throw DomainError("pixel value " + std::to_string(c) + " outside [0, 1] in image " +
                            std::to_string(i));
        }
      }
      const double lum = kRedWeight * r + kGreenWeight * g + kBlueWeight * b;
      out.luminance(i, p) = lum;
      out.chroma(i, 2 * p) = (b - lum) / kBlueSpan + 0.5;
      out.chroma(i, 2 * p + 1) = (r - lum) / kRedSpan + 0.5;
    }
  }
  return out;
}

Matrix ReconstructRgb(const Matrix &luminance, const Matrix &chroma) {
  if (chroma.rows() != luminance.rows() || chroma.cols() != 2 * luminance.cols()) {
    throw ShapeError("chroma must hold two values per luminance pixel");
  }
  Matrix rgb(luminance.rows(), 3 * luminance.cols());
  for (int i = 0; i < luminance.rows(); ++i) {
    for (int p = 0; p < luminance.cols(); ++p) {
      const double lum = luminance(i, p);
      const double b = (chroma(i, 2 * p) - 0.5) * kBlueSpan + lum;
      const double r = (chroma(i, 2 * p + 1) - 0.5) * kRedSpan + lum;
      const double g = (lum - kRedWeight * r - kBlueWeight * b) / kGreenWeight;
      rgb(i, 3 * p) = r;
      rgb(i, 3 * p + 1) = g;
      rgb(i, 3 * p + 2) = b;
    }
  }
  return rgb;
}

MultiViewDataset GenerateChannelDataset(const ImageConfig &config) {
  if (config.classes < 2) throw ConfigError("need at least 2 classes");
  if (config.per_class < 1 || config.side < 2) throw ConfigError("image sizes must be positive");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int pixels = config.side * config.side;
  const int n = config.classes * config.per_class;
  const double pi = std::acos(-1.0);
  Matrix rgb(n, 3 * pixels);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const int c = i / config.per_class;
    labels[i] = c;
    const double hue = static_cast<double>(c) / config.classes + 0.05 * normal(rng);
    const double angle = pi * c / config.classes;
    const double phase = 2.0 * pi * unit(rng);
    const double freq = 2.0 * pi / config.side * 1.5;
    double base[3];
    for (int ch = 0; ch < 3; ++ch) {
      base[ch] = 0.5 + 0.4 * std::cos(2.0 * pi * (hue - ch / 3.0));
    }
    for (int y = 0; y < config.side; ++y) {
      for (int x = 0; x < config.side; ++x) {
        const double t = std::sin(freq * (x * std::cos(angle) + y * std::sin(angle)) + phase);
        const double shade = 0.65 + 0.35 * t;
        for (int ch = 0; ch < 3; ++ch) {
          const double v = base[ch] * shade + config.noise * normal(rng);
          rgb(i, 3 * (y * config.side + x) + ch) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  ChannelViews channels = DecomposeChannels(rgb);
  MultiViewDataset data;
  data.views = {std::move(channels.rgb), std::move(channels.luminance),
                std::move(channels.chroma)};
  data.labels = std::move(labels);
  data.test.assign(n, 0);
  ShuffleAndSplit(data, config.classes, config.test_fraction, rng);
  return data;
}

std::vector<uint8_t> SerializeDataset(const MultiViewDataset &data) {
  data.Validate();
  if (data.samples() == 0) throw ConfigError("refusing to write an empty dataset");
  ByteWriter out;
  out.PutBytes(std::string_view(kMagic, 8));
  out.PutU32(kVersion);
  out.PutU32(static_cast<uint32_t>(data.samples()));
  out.PutU32(static_cast<uint32_t>(data.view_count()));
  for (int d : data.view_dims()) out.PutU32(static_cast<uint32_t>(d));
  for (int label : data.labels) out.PutI32(label);
  for (uint8_t t : data.test) out.PutU8(t);
  for (const auto &v : data.views) out.PutF64s(v.data());
  return out.Release();
}

MultiViewDataset DeserializeDataset(std::span<const uint8_t> bytes) {
  ByteReader in(bytes);
  if (bytes.size() < 8 || in.GetBytes(8) != std::string(kMagic, 8)) {
    throw FormatError("bad magic: not an IPMC dataset file");
  }
  const uint32_t version = in.GetU32();
  if (version != kVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  const uint32_t n = in.GetU32();
  const uint32_t m = in.GetU32();
  if (n == 0) throw FormatError("dataset holds no samples");
  std::vector<int> dims(m);
  for (auto &d : dims) d = static_cast<int>(in.GetU32());
  // Check the declared payload against the buffer before allocating.
  uint64_t reals = 0;
  for (int d : dims) reals += static_cast<uint64_t>(d) * n;
  if (in.remaining() != static_cast<uint64_t>(n) * 5 + reals * 8) {
    throw FormatError("truncated or oversized dataset payload");
  }
  MultiViewDataset data;
  data.labels.resize(n);
  for (auto &label : data.labels) label = in.GetI32();
  data.test.resize(n);
  for (auto &t : data.test) {
    t = in.GetU8();
    if (t > 1) throw FormatError("split flag must be 0 or 1");
  }
  for (int d : dims) {
    Matrix v(static_cast<int>(n), d);
    in.GetF64s(v.data());
    data.views.push_back(std::move(v));
  }
  return data;
}

void WriteDataset(const MultiViewDataset &data, const std::string &path) {
  WriteFileBytes(path, SerializeDataset(data));
}

MultiViewDataset ReadDataset(const std::string &path) {
  return DeserializeDataset(ReadFileBytes(path));
}

}  // namespace ipmc
