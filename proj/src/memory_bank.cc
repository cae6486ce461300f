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

#include "ipmc/memory_bank.h"

#include <cmath>
#include <string>
#include <unordered_set>

#include "ipmc/errors.h"

namespace ipmc {

MemoryBank MemoryBank::Create(int samples, int views, int dim, uint64_t seed) {
  if (samples < 1 || views < 1 || dim < 1) {
    throw ConfigError("memory bank dimensions must be positive");
  }
  MemoryBank bank;
  bank.samples_ = samples;
  bank.views_ = views;
  bank.dim_ = dim;
  bank.store_ = Matrix(samples * views, dim);
  std::mt19937_64 rng(seed);
  for (int r = 0; r < bank.store_.rows(); ++r) {
    auto row = bank.store_.row(r);
    double ss = 0.0;
    while (!(ss > 1e-12)) {
      ss = 0.0;
      for (double &v : row) {
        v = std::abs(std::normal_distribution<double>(0.0, 1.0)(rng));
        ss += v * v;
      }
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (double &v : row) v *= inv;
  }
  return bank;
}

void MemoryBank::CheckIndex(int sample, int view) const {
  if (sample < 0 || sample >= samples_ || view < 0 || view >= views_) {
    throw IndexError("bank slot (" + std::to_string(sample) + ", " + std::to_string(view) +
                     ") outside " + std::to_string(samples_) + " x " + std::to_string(views_));
  }
}

std::span<const double> MemoryBank::Read(int sample, int view) const {
  CheckIndex(sample, view);
  return store_.row(sample * views_ + view);
}

void MemoryBank::Update(int sample, int view, std::span<const double> embedding) {
  CheckIndex(sample, view);
  if (static_cast<int>(embedding.size()) != dim_) {
    throw ShapeError("bank update of width " + std::to_string(embedding.size()) +
                     ", expected " + std::to_string(dim_));
  }
  double ss = 0.0;
  for (double v : embedding) {
    if (v < 0.0) throw DomainError("bank update with a negative component");
    ss += v * v;
  }
  if (std::abs(std::sqrt(ss) - 1.0) > 1e-6) {
    throw DomainError("bank update with norm " + std::to_string(std::sqrt(ss)));
  }
  auto row = store_.row(sample * views_ + view);
  std::copy(embedding.begin(), embedding.end(), row.begin());
}

std::vector<BankTerm> MemoryBank::Slots(int sample) const {
  std::vector<BankTerm> out;
  for (int v = 0; v < views_; ++v) {
    auto f = Read(sample, v);
    out.push_back({sample * views_ + v, sample, v, {f.begin(), f.end()}});
  }
  return out;
}

std::vector<BankTerm> MemoryBank::SampleNegatives(int exclude, int count,
                                                  std::mt19937_64 &rng) const {
  if (exclude < 0 || exclude >= samples_) {
    throw IndexError("excluded sample " + std::to_string(exclude) + " out of range");
  }
  const int available = samples_ - 1;
  if (count < 0 || count > available) {
    throw SamplingError("requested " + std::to_string(count) + " negatives from " +
                        std::to_string(available) + " available samples");
  }
  // Floyd's algorithm over the population [0, available), then shift past
  // the excluded index.
  std::vector<int> picked;
  picked.reserve(count);
  std::unordered_set<int> seen;
  for (int j = available - count; j < available; ++j) {
    int t = std::uniform_int_distribution<int>(0, j)(rng);
    int choice = seen.contains(t) ? j : t;
    seen.insert(choice);
    picked.push_back(choice);
  }
  std::vector<BankTerm> out;
  out.reserve(static_cast<size_t>(count) * views_);
  for (int p : picked) {
    int sample = p >= exclude ? p + 1 : p;
    for (int v = 0; v < views_; ++v) {
      auto f = store_.row(sample * views_ + v);
      out.push_back({sample * views_ + v, sample, v, {f.begin(), f.end()}});
    }
  }
  return out;
}

void MemoryBank::Serialize(ByteWriter &out) const {
  out.PutU32(static_cast<uint32_t>(samples_));
  out.PutU32(static_cast<uint32_t>(views_));
  out.PutU32(static_cast<uint32_t>(dim_));
  WriteMatrix(out, store_);
}

MemoryBank MemoryBank::Deserialize(ByteReader &in) {
  MemoryBank bank;
  bank.samples_ = static_cast<int>(in.GetU32());
  bank.views_ = static_cast<int>(in.GetU32());
  bank.dim_ = static_cast<int>(in.GetU32());
  bank.store_ = ReadMatrix(in);
  if (bank.store_.rows() != bank.samples_ * bank.views_ || bank.store_.cols() != bank.dim_) {
    throw FormatError("memory bank payload does not match its header");
  }
  return bank;
}

}  // namespace ipmc
