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

#ifndef IPMC_MEMORY_BANK_H_
#define IPMC_MEMORY_BANK_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ipmc/binary_io.h"
#include "ipmc/diffmath.h"

namespace ipmc {

// A feature read from the bank. `id` = sample * view_count + view and is
// the stable identity used for tie-breaking and similarity tracking.
struct BankTerm {
  int id = 0;
  int sample = 0;
  int view = 0;
  std::vector<double> feature;
};

// One unit-norm feature per (sample, view). Writes replace the slot
// outright; there is no momentum mixing.
class MemoryBank {
 public:
  MemoryBank() = default;

  // Slots start as random non-negative unit vectors so that similarities
  // against fresh embeddings already lie in [0, 1].
  static MemoryBank Create(int samples, int views, int dim, uint64_t seed);

  int samples() const { return samples_; }
  int views() const { return views_; }
  int dim() const { return dim_; }

  std::span<const double> Read(int sample, int view) const;
  // Requires a non-negative vector of norm 1 +- 1e-6.
  void Update(int sample, int view, std::span<const double> embedding);

  // Draws `count` distinct samples other than `exclude`, uniformly without
  // replacement, and returns every view of each (count * views terms).
  std::vector<BankTerm> SampleNegatives(int exclude, int count, std::mt19937_64 &rng) const;

  // All views of one sample, in view order.
  std::vector<BankTerm> Slots(int sample) const;

  void Serialize(ByteWriter &out) const;
  static MemoryBank Deserialize(ByteReader &in);
  bool operator==(const MemoryBank &) const = default;

 private:
  void CheckIndex(int sample, int view) const;

  int samples_ = 0;
  int views_ = 0;
  int dim_ = 0;
  Matrix store_;  // (samples * views) x dim
};

}  // namespace ipmc

#endif  // IPMC_MEMORY_BANK_H_
