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

#ifndef IPMC_POOLS_H_
#define IPMC_POOLS_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "ipmc/binary_io.h"
#include "ipmc/diffmath.h"
#include "ipmc/memory_bank.h"

namespace ipmc {

enum class Provenance { kBatch, kBank, kTransferred };

struct PositiveTerm {
  std::vector<double> feature;
  Provenance provenance = Provenance::kBatch;
  // Anchor view for batch/bank terms, -1 for transferred ones.
  int view = -1;
  // Bank id of a transferred term, -1 otherwise.
  int source_id = -1;
};

struct NegativeTerm {
  std::vector<double> feature;
  int id = 0;
  int sample = 0;
};

// Positive and negative contrasting pools of one anchor sample.
struct ContrastPools {
  int anchor = 0;
  std::vector<PositiveTerm> positives;
  std::vector<NegativeTerm> negatives;
};

// S_pos holds C(n_pos, 2) unordered positive pairs (i < j, row-major);
// S_neg holds n_pos * n_neg positive x negative pairs, positive-major.
struct SimilaritySets {
  std::vector<double> pos;
  std::vector<double> neg;
};

struct PoolConfig {
  // Negative samples drawn per anchor; each contributes all of its views.
  int negatives = 4096;
  // Add the anchor's own bank slots to the positive pool.
  bool bank_positives = true;
  int k_top = 1;
  int eta = 10;
  int start_epoch = 10;
  bool operator==(const PoolConfig &) const = default;
};

// Dot product of the two vectors divided by their norms. Zero vectors
// raise DomainError.
double CosineSimilarity(std::span<const double> a, std::span<const double> b);

// Positives: the anchor's current per-view embeddings (rows of
// `anchor_views`) followed by its bank slots when enabled. Negatives:
// bank.SampleNegatives(anchor, config.negatives).
ContrastPools BuildPools(const Matrix &anchor_views, const MemoryBank &bank, int anchor,
                         const PoolConfig &config, std::mt19937_64 &rng);

// Windowed moving average of per-(anchor, candidate) similarities over
// epochs. Each key keeps at most one value per epoch and only the values
// of the last `window` epochs; the smoothed value is their arithmetic mean.
class SimilarityTracker {
 public:
  explicit SimilarityTracker(int window = 10);

  static uint64_t Key(int anchor, int candidate) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(anchor)) << 32) |
           static_cast<uint32_t>(candidate);
  }

  // Records `value` for `epoch` (replacing an earlier value of the same
  // epoch) and returns the smoothed similarity.
  double Update(uint64_t key, int epoch, double value);
  std::optional<double> Smoothed(uint64_t key, int epoch) const;
  // Drops every value that has left the window as of `epoch`.
  void Prune(int epoch);

  int window() const { return window_; }
  size_t size() const { return windows_.size(); }

  void Serialize(ByteWriter &out) const;
  static SimilarityTracker Deserialize(ByteReader &in);
  bool operator==(const SimilarityTracker &) const = default;

 private:
  struct Record {
    int epoch;
    double value;
    bool operator==(const Record &) const = default;
  };
  int window_;
  std::unordered_map<uint64_t, std::vector<Record>> windows_;
};

// Raw ranking score of each negative: max cosine against the anchor's
// batch/bank positives (transferred terms are not scored against).
std::vector<double> NegativeScores(const ContrastPools &pools);

// Feeds the raw scores of every negative into the tracker.
void RecordPoolSimilarities(const ContrastPools &pools, SimilarityTracker &tracker, int epoch);

struct TransferEvent {
  int anchor;
  int negative_id;
  double score;
};

// Moves the k negatives with the highest smoothed score (raw score when the
// tracker holds no history) into the positive pool. Ties go to the lower
// negative id. k >= |negatives| raises ConfigError.
std::vector<TransferEvent> ViewFilterTransfer(ContrastPools &pools,
                                              const SimilarityTracker &tracker, int k, int epoch);

// Requires n_pos >= 2 and n_neg >= 1.
SimilaritySets PairSimilarities(const ContrastPools &pools);

// Graph form of PairSimilarities for unit-norm rows: returns S_pos as a
// 1 x C(n_pos, 2) row and S_neg as an n_pos x n_neg matrix.
struct SimilarityVars {
  Var pos;
  Var neg;
};
SimilarityVars PairSimilaritiesInGraph(Graph &g, Var positives, Var negatives);

}  // namespace ipmc

#endif  // IPMC_POOLS_H_
