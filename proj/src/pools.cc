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

#include "ipmc/pools.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ipmc/errors.h"

namespace ipmc {

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine of vectors with different lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine similarity of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

ContrastPools BuildPools(const Matrix &anchor_views, const MemoryBank &bank, int anchor,
                         const PoolConfig &config, std::mt19937_64 &rng) {
  if (anchor_views.rows() != bank.views()) {
    throw ShapeError("anchor has " + std::to_string(anchor_views.rows()) +
                     " encoded views, bank expects " + std::to_string(bank.views()));
  }
  ContrastPools pools;
  pools.anchor = anchor;
  for (int v = 0; v < anchor_views.rows(); ++v) {
    auto row = anchor_views.row(v);
    pools.positives.push_back({{row.begin(), row.end()}, Provenance::kBatch, v, -1});
  }
  if (config.bank_positives) {
    for (auto &slot : bank.Slots(anchor)) {
      pools.positives.push_back({std::move(slot.feature), Provenance::kBank, slot.view, -1});
    }
  }
  for (auto &term : bank.SampleNegatives(anchor, config.negatives, rng)) {
    pools.negatives.push_back({std::move(term.feature), term.id, term.sample});
  }
  return pools;
}

SimilarityTracker::SimilarityTracker(int window) : window_(window) {
  if (window < 1) throw ConfigError("moving-average window must be >= 1");
}

double SimilarityTracker::Update(uint64_t key, int epoch, double value) {
  auto &records = windows_[key];
  if (!records.empty() && records.back().epoch > epoch) {
    throw ConfigError("similarity tracker epochs must be non-decreasing per key");
  }
  if (!records.empty() && records.back().epoch == epoch) {
    records.back().value = value;
  } else {
    records.push_back({epoch, value});
  }
  const int oldest = epoch - window_ + 1;
  auto keep = std::find_if(records.begin(), records.end(),
                           [oldest](const Record &r) { return r.epoch >= oldest; });
  records.erase(records.begin(), keep);
  return *Smoothed(key, epoch);
}

std::optional<double> SimilarityTracker::Smoothed(uint64_t key, int epoch) const {
  auto it = windows_.find(key);
  if (it == windows_.end()) return std::nullopt;
  const int oldest = epoch - window_ + 1;
  double sum = 0.0;
  int count = 0;
  for (const Record &r : it->second) {
    if (r.epoch >= oldest && r.epoch <= epoch) {
      sum += r.value;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

void SimilarityTracker::Prune(int epoch) {
  const int oldest = epoch - window_ + 1;
  for (auto it = windows_.begin(); it != windows_.end();) {
    auto &records = it->second;
    auto keep = std::find_if(records.begin(), records.end(),
                             [oldest](const Record &r) { return r.epoch >= oldest; });
    records.erase(records.begin(), keep);
    it = records.empty() ? windows_.erase(it) : std::next(it);
  }
}

void SimilarityTracker::Serialize(ByteWriter &out) const {
  std::vector<uint64_t> keys;
  keys.reserve(windows_.size());
  for (const auto &[k, _] : windows_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  out.PutU32(static_cast<uint32_t>(window_));
  out.PutU64(keys.size());
  for (uint64_t k : keys) {
    const auto &records = windows_.at(k);
    out.PutU64(k);
    out.PutU32(static_cast<uint32_t>(records.size()));
    for (const Record &r : records) {
      out.PutI32(r.epoch);
      out.PutF64(r.value);
    }
  }
}

SimilarityTracker SimilarityTracker::Deserialize(ByteReader &in) {
  SimilarityTracker tracker(static_cast<int>(in.GetU32()));
  uint64_t n = in.GetU64();
  for (uint64_t i = 0; i < n; ++i) {
    uint64_t k = in.GetU64();
    uint32_t count = in.GetU32();
    auto &records = tracker.windows_[k];
    for (uint32_t j = 0; j < count; ++j) {
      int epoch = in.GetI32();
      records.push_back({epoch, in.GetF64()});
    }
  }
  return tracker;
}

std::vector<double> NegativeScores(const ContrastPools &pools) {
  std::vector<double> scores(pools.negatives.size(), 0.0);
  for (size_t j = 0; j < pools.negatives.size(); ++j) {
    double best = -1.0;
    for (const auto &p : pools.positives) {
      if (p.provenance == Provenance::kTransferred) continue;
      best = std::max(best, CosineSimilarity(p.feature, pools.negatives[j].feature));
    }
    scores[j] = best;
  }
  return scores;
}

void RecordPoolSimilarities(const ContrastPools &pools, SimilarityTracker &tracker, int epoch) {
  auto scores = NegativeScores(pools);
  for (size_t j = 0; j < scores.size(); ++j) {
    tracker.Update(SimilarityTracker::Key(pools.anchor, pools.negatives[j].id), epoch, scores[j]);
  }
}

std::vector<TransferEvent> ViewFilterTransfer(ContrastPools &pools,
                                              const SimilarityTracker &tracker, int k, int epoch) {
  if (k < 0) throw ConfigError("negative transfer count");
  if (k == 0) return {};
  if (k >= static_cast<int>(pools.negatives.size())) {
    throw ConfigError("transfer count " + std::to_string(k) + " must be below the " +
                      std::to_string(pools.negatives.size()) + " negatives");
  }
  std::vector<double> scores = NegativeScores(pools);
  for (size_t j = 0; j < scores.size(); ++j) {
    auto smoothed =
        tracker.Smoothed(SimilarityTracker::Key(pools.anchor, pools.negatives[j].id), epoch);
    if (smoothed) scores[j] = *smoothed;
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return pools.negatives[a].id < pools.negatives[b].id;
  });
  order.resize(k);

  std::vector<TransferEvent> events;
  std::vector<bool> moved(pools.negatives.size(), false);
  for (size_t j : order) {
    moved[j] = true;
    auto &neg = pools.negatives[j];
    events.push_back({pools.anchor, neg.id, scores[j]});
    pools.positives.push_back({neg.feature, Provenance::kTransferred, -1, neg.id});
  }
  std::vector<NegativeTerm> kept;
  kept.reserve(pools.negatives.size() - k);
  for (size_t j = 0; j < pools.negatives.size(); ++j) {
    if (!moved[j]) kept.push_back(std::move(pools.negatives[j]));
  }
  pools.negatives = std::move(kept);
  return events;
}

SimilaritySets PairSimilarities(const ContrastPools &pools) {
  const size_t np = pools.positives.size();
  if (np < 2) throw ConfigError("pair similarities need at least two positives");
  if (pools.negatives.empty()) throw ConfigError("pair similarities need a negative");
  SimilaritySets sets;
  for (size_t i = 0; i < np; ++i) {
    for (size_t j = i + 1; j < np; ++j) {
      sets.pos.push_back(CosineSimilarity(pools.positives[i].feature, pools.positives[j].feature));
    }
  }
  for (size_t i = 0; i < np; ++i) {
    for (const auto &neg : pools.negatives) {
      sets.neg.push_back(CosineSimilarity(pools.positives[i].feature, neg.feature));
    }
  }
  return sets;
}

SimilarityVars PairSimilaritiesInGraph(Graph &g, Var positives, Var negatives) {
  const int np = g.value(positives).rows();
  if (np < 2) throw ConfigError("pair similarities need at least two positives");
  if (g.value(negatives).rows() < 1) throw ConfigError("pair similarities need a negative");
  std::vector<int> upper;
  upper.reserve(static_cast<size_t>(np) * (np - 1) / 2);
  for (int i = 0; i < np; ++i) {
    for (int j = i + 1; j < np; ++j) upper.push_back(i * np + j);
  }
  Var gram = g.Affine(positives, positives);
  return {g.Gather(gram, upper), g.Affine(positives, negatives)};
}

}  // namespace ipmc
