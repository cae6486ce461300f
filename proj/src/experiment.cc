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

#include "ipmc/experiment.h"

#include <algorithm>
#include <vector>

#include "ipmc/csv.h"
#include "ipmc/errors.h"

namespace ipmc {

RunResult TrainAndEvaluate(const MultiViewDataset &data, const TrainConfig &config,
                           const ProbeConfig &probe) {
  data.Validate();
  TrainingViews train = TrainingSplit(data);
  RunResult result{InitTrainState(config, train.view_dims(), train.samples()), {}, 0.0, 0.0};
  result.history = Fit(result.state, train);
  result.probe = ProbeEncoder(result.state.encoder, data, probe);
  if (data.view_count() >= 2) {
    auto rows = SplitIndices(data, true);
    result.view_disc = ViewDiscriminability(EmbedViews(result.state.encoder, data, rows), probe);
  }
  return result;
}

double RandomEncoderProbe(const MultiViewDataset &data, const TrainConfig &config,
                          const ProbeConfig &probe) {
  data.Validate();
  TrainingViews train = TrainingSplit(data);
  TrainState state = InitTrainState(config, train.view_dims(), train.samples());
  return ProbeEncoder(state.encoder, data, probe);
}

double KnnPrecision(const EncoderParams &params, const MultiViewDataset &data, int k) {
  data.Validate();
  auto train_rows = SplitIndices(data, false);
  auto test_rows = SplitIndices(data, true);
  if (k < 1 || k > static_cast<int>(train_rows.size())) {
    throw ConfigError("k must lie in [1, training samples]");
  }
  if (test_rows.empty()) throw ConfigError("dataset has no test rows");
  Matrix gallery = ConcatRepresentations(EmbedViews(params, data, train_rows));
  Matrix queries = ConcatRepresentations(EmbedViews(params, data, test_rows));
  long hits = 0;
  for (int q = 0; q < queries.rows(); ++q) {
    for (int g : KnnRetrieve(queries.row(q), gallery, k)) {
      if (data.labels[train_rows[g]] == data.labels[test_rows[q]]) ++hits;
    }
  }
  return static_cast<double>(hits) / (static_cast<double>(k) * queries.rows());
}

std::vector<AblationRow> RunAblation(const MultiViewDataset &data, const TrainConfig &base,
                                     const ProbeConfig &probe) {
  std::vector<AblationRow> rows;
  for (Variant v : {Variant::kFp, Variant::kFpDa, Variant::kSapDa}) {
    TrainConfig config = base;
    config.variant = v;
    config.Resolve();
    RunResult r = TrainAndEvaluate(data, config, probe);
    AblationRow row{v, r.probe, r.view_disc, 0.0, 0};
    if (!r.history.epochs.empty()) row.final_unisap = r.history.epochs.back().loss_unisap;
    row.transfers = static_cast<int>(r.history.transfers.size());
    rows.push_back(row);
  }
  return rows;
}

std::string AblationCsv(const std::vector<AblationRow> &rows) {
  CsvWriter csv;
  csv.Row({"variant", "probe_accuracy", "view_discriminability", "final_loss_unisap",
           "transfers"});
  for (const auto &r : rows) {
    csv.Row({VariantName(r.variant), FormatReal(r.probe), FormatReal(r.view_disc),
             FormatReal(r.final_unisap), std::to_string(r.transfers)});
  }
  return csv.text();
}

}  // namespace ipmc
