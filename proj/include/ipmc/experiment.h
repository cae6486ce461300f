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

#ifndef IPMC_EXPERIMENT_H_
#define IPMC_EXPERIMENT_H_

#include <string>
#include <vector>

#include "ipmc/dataset.h"
#include "ipmc/eval.h"
#include "ipmc/trainer.h"

namespace ipmc {

struct RunResult {
  TrainState state;
  History history;
  double probe = 0.0;
  // View discriminability on the test rows; 0 for single-view data.
  double view_disc = 0.0;
};

// Trains on the training split of `data` and evaluates the frozen encoder.
RunResult TrainAndEvaluate(const MultiViewDataset &data, const TrainConfig &config,
                           const ProbeConfig &probe = {});

// Probe accuracy of an untrained encoder built from `config`.
double RandomEncoderProbe(const MultiViewDataset &data, const TrainConfig &config,
                          const ProbeConfig &probe = {});

// Fraction of the k nearest training samples (L1, concatenated
// representation) that share the query's label, averaged over test rows.
double KnnPrecision(const EncoderParams &params, const MultiViewDataset &data, int k);

struct AblationRow {
  Variant variant;
  double probe = 0.0;
  double view_disc = 0.0;
  double final_unisap = 0.0;
  int transfers = 0;
};

// fp, fp+da and sap+da on the same data and base config.
std::vector<AblationRow> RunAblation(const MultiViewDataset &data, const TrainConfig &base,
                                     const ProbeConfig &probe = {});
// Columns: variant, probe_accuracy, view_discriminability, final_loss_unisap,
// transfers.
std::string AblationCsv(const std::vector<AblationRow> &rows);

}  // namespace ipmc

#endif  // IPMC_EXPERIMENT_H_
