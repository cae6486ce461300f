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

#ifndef IPMC_TRAINER_H_
#define IPMC_TRAINER_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ipmc/adam.h"
#include "ipmc/align.h"
#include "ipmc/dataset.h"
#include "ipmc/encoder.h"
#include "ipmc/memory_bank.h"
#include "ipmc/pools.h"
#include "ipmc/unified_loss.h"

namespace ipmc {

// fp: pools only. fp+da: pools plus distribution alignment. sap+da: both
// plus the view filter.
enum class Variant { kFp, kFpDa, kSapDa };

Variant ParseVariant(const std::string &name);
std::string VariantName(Variant v);

struct TrainConfig {
  double beta = 1.0;
  int epochs = 50;
  int batch = 64;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  uint64_t seed = 1;
  // Hidden widths of each view encoder; the embedding layer is appended.
  std::vector<int> widths = {64};
  int embed_dim = 64;
  Variant variant = Variant::kSapDa;
  // Bank slots per view added to each critic step's sample (from epoch 1).
  int critic_bank_samples = 0;
  LossConfig loss;
  AlignConfig align;
  PoolConfig pools;

  // Applies the variant's forced settings: fp disables alignment and the
  // view filter, fp+da disables the view filter.
  void Resolve();
  void Validate() const;
  std::vector<int> EncoderWidths() const;
  bool operator==(const TrainConfig &) const = default;
};

// Parses a JSON object. Unknown keys raise ConfigError; missing keys keep
// their defaults. The variant is resolved before returning.
TrainConfig ParseTrainConfig(const std::string &json_text);
// Every key, defaults filled, pretty-printed.
std::string TrainConfigToJson(const TrainConfig &config);

struct TrainState {
  TrainConfig config;
  EncoderParams encoder;
  AdamState encoder_adam;
  // One per unordered view pair, in ViewPairs order; empty without DA.
  std::vector<CriticState> critics;
  MemoryBank bank;
  SimilarityTracker tracker;
  std::mt19937_64 rng;
  int epoch = 0;
  int64_t step = 0;

  bool operator==(const TrainState &) const = default;
};

// Fresh state for `samples` training samples with the given view widths.
// A negative pool larger than the other samples is clamped with a warning.
TrainState InitTrainState(const TrainConfig &config, std::span<const int> input_dims,
                          int samples);

struct StepMetrics {
  double loss_total = 0.0;
  double loss_unisap = 0.0;
  double loss_da = 0.0;
  int transfers = 0;
  // Per view pair: critic estimate (or KL value), gradient penalty and the
  // discrete-gradient diagnostic.
  std::vector<double> pair_estimate;
  std::vector<double> pair_penalty;
  std::vector<double> pair_discgrad;
  std::vector<TransferEvent> events;
};

// Everything the step loss depends on besides the encoder parameters.
struct StepPlan {
  std::vector<int> batch;
  // Per anchor; positives[0..m) are placeholders for the anchor's live
  // embeddings and are replaced by graph rows in StepLossInGraph.
  std::vector<ContrastPools> pools;
  std::vector<CriticParams> critics;
};

struct StepLoss {
  Var total;
  Var unisap;
  Var da;
  std::vector<Var> embeddings;  // per view, batch x D
};

// L_UniSap averaged over anchors plus beta * L_DA with frozen critics.
StepLoss StepLossInGraph(Graph &g, const EncoderVars &encoder, const TrainConfig &config,
                         const TrainingViews &data, const StepPlan &plan);

// One optimizer step on `batch` (local sample indices).
StepMetrics TrainStep(TrainState &state, const TrainingViews &data, std::span<const int> batch);

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_unisap = 0.0;
  double loss_da = 0.0;
  int transfers = 0;
  std::vector<double> pair_estimate;
  std::vector<double> pair_penalty;
  std::vector<double> pair_discgrad;
  bool operator==(const EpochRecord &) const = default;
};

struct History {
  int views = 0;
  std::vector<EpochRecord> epochs;
  // Every transfer of the run; dataset row indices for anchor and source.
  struct Transfer {
    int epoch;
    int anchor;
    int sample;
    int view;
    double score;
    bool operator==(const Transfer &) const = default;
  };
  std::vector<Transfer> transfers;

  std::string EpochCsv() const;
  std::string TransferCsv() const;
  bool operator==(const History &) const = default;
};

struct FitOptions {
  // Stop after this epoch (exclusive) instead of config.epochs.
  std::optional<int> stop_epoch;
  // Where to save the epoch-start state when a step diverges.
  std::string failure_checkpoint;
};

// Runs epochs state.epoch .. config.epochs with seeded shuffles. The data
// must match the state's view count and widths.
History Fit(TrainState &state, const TrainingViews &data, const FitOptions &options = {});

// Single-file checkpoint: "IPMCCKP\0", u32 version, u32 section count, a
// table of (name, offset, length) and the section payloads.
std::vector<uint8_t> SerializeCheckpoint(const TrainState &state);
TrainState DeserializeCheckpoint(std::span<const uint8_t> bytes);
void WriteCheckpoint(const TrainState &state, const std::string &path);
TrainState ReadCheckpoint(const std::string &path);

}  // namespace ipmc

#endif  // IPMC_TRAINER_H_
