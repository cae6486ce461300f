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

#include "ipmc/trainer.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "gtest/gtest.h"
#include "ipmc/errors.h"
#include "test_util.h"

namespace ipmc {
namespace {

// A trainer must never see labels; this fails to compile if one is added.
template <typename T>
concept HasLabels = requires(T t) { t.labels; };
static_assert(!HasLabels<TrainingViews>);

MultiViewDataset SmallData(uint64_t seed = 3, int views = 2) {
  SyntheticConfig s;
  s.classes = 2;
  s.per_class = 12;
  s.latent_dim = 3;
  s.views = views;
  s.view_dim = 5;
  s.nuisance_rank = 2;
  s.test_fraction = 0.25;
  s.seed = seed;
  return GenerateSynthetic(s);
}

TrainConfig SmallConfig() {
  TrainConfig c;
  c.widths = {6};
  c.embed_dim = 4;
  c.batch = 6;
  c.epochs = 4;
  c.pools.negatives = 5;
  c.pools.k_top = 1;
  c.pools.eta = 2;
  c.pools.start_epoch = 1;
  c.align.critic_hidden = {8, 8};
  c.align.k_critic = 2;
  c.variant = Variant::kSapDa;
  return c;
}

TrainState StateFor(const TrainConfig &c, const TrainingViews &data) {
  auto dims = data.view_dims();
  return InitTrainState(c, dims, data.samples());
}

// ---- Adam -------------------------------------------------------------

TEST(AdamTest, ZeroGradientLeavesParamsUnchanged) {
  Matrix w(2, 3, 0.7);
  std::vector<ParamRef> refs = {{"w", &w}};
  std::vector<Matrix> grads = {Matrix(2, 3, 0.0)};
  AdamState state;
  for (int i = 0; i < 10; ++i) AdaptiveMomentUpdate(refs, grads, state, AdamConfig{});
  EXPECT_EQ(w, Matrix(2, 3, 0.7));
  EXPECT_EQ(state.first[0], Matrix(2, 3, 0.0));
  EXPECT_EQ(state.second[0], Matrix(2, 3, 0.0));
  EXPECT_EQ(state.step, 10);
}

TEST(AdamTest, ConstantGradientStepsByLearningRate) {
  Matrix w(1, 1, 0.0);
  std::vector<ParamRef> refs = {{"w", &w}};
  std::vector<Matrix> grads = {Matrix::Scalar(0.37)};
  AdamState state;
  AdamConfig config;
  config.lr = 1e-2;
  double last = 0.0;
  for (int i = 0; i < 500; ++i) {
    last = w[0];
    AdaptiveMomentUpdate(refs, grads, state, config);
  }
  EXPECT_NEAR(last - w[0], config.lr, 0.01 * config.lr);
}

TEST(AdamTest, Deterministic) {
  std::mt19937_64 rng(4);
  Matrix g = testing::RandomMatrix(3, 3, -1, 1, rng);
  Matrix a(3, 3, 0.1), b(3, 3, 0.1);
  AdamState sa, sb;
  std::vector<ParamRef> ra = {{"a", &a}}, rb = {{"b", &b}};
  for (int i = 0; i < 7; ++i) {
    AdaptiveMomentUpdate(ra, std::span<const Matrix>(&g, 1), sa, AdamConfig{});
    AdaptiveMomentUpdate(rb, std::span<const Matrix>(&g, 1), sb, AdamConfig{});
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa, sb);
}

TEST(AdamTest, NonFiniteGradientNamesParameterAndLeavesStateUntouched) {
  Matrix w(1, 2, 1.0), v(1, 2, 2.0);
  std::vector<ParamRef> refs = {{"first", &w}, {"second", &v}};
  std::vector<Matrix> ok = {Matrix(1, 2, 0.5), Matrix(1, 2, 0.5)};
  AdamState state;
  AdaptiveMomentUpdate(refs, ok, state, AdamConfig{});
  const Matrix w0 = w, v0 = v;
  const AdamState s0 = state;
  std::vector<Matrix> bad = {Matrix(1, 2, 0.5), Matrix(1, 2, 0.5)};
  bad[1][1] = std::numeric_limits<double>::quiet_NaN();
  try {
    AdaptiveMomentUpdate(refs, bad, state, AdamConfig{});
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError &e) {
    EXPECT_NE(std::string(e.what()).find("second"), std::string::npos) << e.what();
  }
  EXPECT_EQ(w, w0);
  EXPECT_EQ(v, v0);
  EXPECT_EQ(state, s0);
}

// ---- Config -----------------------------------------------------------

TEST(TrainConfigTest, UnknownKeyRejected) {
  EXPECT_THROW(ParseTrainConfig(R"({"gamma": 2, "gamme": 3})"), ConfigError);
  EXPECT_THROW(ParseTrainConfig("[1, 2]"), ConfigError);
  EXPECT_THROW(ParseTrainConfig("{not json"), ConfigError);
  EXPECT_THROW(ParseTrainConfig(R"({"variant": "fancy"})"), ConfigError);
  EXPECT_THROW(ParseTrainConfig(R"({"beta": -1})"), ConfigError);
}

TEST(TrainConfigTest, MissingKeysKeepDefaults) {
  TrainConfig c = ParseTrainConfig("{}");
  EXPECT_EQ(c.epochs, 50);
  EXPECT_EQ(c.batch, 64);
  EXPECT_DOUBLE_EQ(c.beta, 1.0);
  EXPECT_EQ(c.pools.negatives, 4096);
  EXPECT_EQ(c.pools.k_top, 1);
  EXPECT_EQ(c.align.k_critic, 5);
  EXPECT_EQ(c.align.critic_hidden, (std::vector<int>{1000, 100, 100}));
}

TEST(TrainConfigTest, VariantForcesSettings) {
  TrainConfig fp = ParseTrainConfig(R"({"variant": "fp", "k_top": 3})");
  EXPECT_EQ(fp.align.discrepancy, Discrepancy::kNone);
  EXPECT_EQ(fp.pools.k_top, 0);
  TrainConfig fpda = ParseTrainConfig(R"({"variant": "fp+da", "k_top": 3})");
  EXPECT_EQ(fpda.align.discrepancy, Discrepancy::kWasserstein);
  EXPECT_EQ(fpda.pools.k_top, 0);
  TrainConfig sap = ParseTrainConfig(R"({"variant": "sap+da", "k_top": 3})");
  EXPECT_EQ(sap.pools.k_top, 3);
}

TEST(TrainConfigTest, JsonRoundTrip) {
  TrainConfig c = SmallConfig();
  c.loss.mode = LossMode::kUnified;
  c.align.discrepancy = Discrepancy::kKl;
  c.lr = 0.0123;
  c.seed = 99;
  c.Resolve();
  TrainConfig back = ParseTrainConfig(TrainConfigToJson(c));
  EXPECT_EQ(TrainConfigToJson(back), TrainConfigToJson(c));
  EXPECT_EQ(back.align, c.align);
  EXPECT_EQ(back.pools, c.pools);
  EXPECT_EQ(back.loss, c.loss);
}

TEST(TrainConfigTest, HingeCannotBeTrained) {
  EXPECT_THROW(ParseTrainConfig(R"({"mode": "hinge"})"), ConfigError);
}

TEST(InitTrainStateTest, ClampsNegativesAndRejectsOversizedTopK) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c = SmallConfig();
  c.pools.negatives = 1000;
  TrainState s = StateFor(c, tv);
  EXPECT_EQ(s.config.pools.negatives, tv.samples() - 1);
  c.pools.negatives = 2;
  c.pools.k_top = 4;  // pool holds 2 x 2 view terms
  EXPECT_THROW(StateFor(c, tv), ConfigError);
}

TEST(InitTrainStateTest, SingleViewDisablesAlignment) {
  MultiViewDataset d = SmallData();
  const int view0[] = {0};
  TrainingViews tv = SelectViews(TrainingSplit(d), view0);
  TrainState s = StateFor(SmallConfig(), tv);
  EXPECT_EQ(s.config.align.discrepancy, Discrepancy::kNone);
  EXPECT_TRUE(s.critics.empty());
}

// ---- Steps ------------------------------------------------------------

TEST(TrainStepTest, FpHasNoAlignmentTerm) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c = SmallConfig();
  c.variant = Variant::kFp;
  TrainState s = StateFor(c, tv);
  const int batch[] = {0, 1, 2, 3};
  for (int i = 0; i < 3; ++i) {
    StepMetrics m = TrainStep(s, tv, batch);
    EXPECT_EQ(m.loss_da, 0.0);
    EXPECT_DOUBLE_EQ(m.loss_total, m.loss_unisap);
    EXPECT_GT(m.loss_unisap, 0.0);
  }
}

TEST(TrainStepTest, ZeroLearningRateGivesConstantLoss) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c = SmallConfig();
  c.lr = 0.0;
  c.align.discrepancy = Discrepancy::kNone;
  c.pools.k_top = 0;
  c.pools.negatives = tv.samples() - 1;  // every other sample, so no sampling noise
  TrainState s = StateFor(c, tv);
  const EncoderParams before = s.encoder;
  std::vector<int> all(tv.samples());
  std::iota(all.begin(), all.end(), 0);
  TrainStep(s, tv, all);  // fills every bank slot
  const double reference = TrainStep(s, tv, all).loss_total;
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(TrainStep(s, tv, all).loss_total, reference, 1e-12);
  }
  EXPECT_EQ(s.encoder, before);
}

// The step loss built for the optimizer, checked against central
// differences of the same expression in the encoder parameters.
TEST(TrainStepTest, StepLossGradientMatchesFiniteDifferences) {
  MultiViewDataset d = SmallData(5);
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c = SmallConfig();
  c.pools.start_epoch = 0;
  TrainState s = StateFor(c, tv);
  const int warm[] = {0, 1, 2, 3, 4, 5, 6, 7};
  TrainStep(s, tv, warm);

  const int m = tv.view_count();
  StepPlan plan;
  plan.batch = {2, 5, 9, 11};
  for (const auto &critic : s.critics) plan.critics.push_back(critic.params);
  std::vector<Matrix> detached;
  for (int v = 0; v < m; ++v) {
    detached.push_back(Encode(s.encoder, v, SelectRows(tv.views[v], plan.batch)));
  }
  std::mt19937_64 rng(17);
  for (size_t a = 0; a < plan.batch.size(); ++a) {
    Matrix anchor(m, c.embed_dim);
    for (int v = 0; v < m; ++v) {
      auto row = detached[v].row(static_cast<int>(a));
      std::copy(row.begin(), row.end(), anchor.row(v).begin());
    }
    plan.pools.push_back(BuildPools(anchor, s.bank, plan.batch[a], s.config.pools, rng));
  }

  Bindings point;
  std::vector<std::string> names;
  for (int v = 0; v < m; ++v) {
    for (size_t l = 0; l < s.encoder.views[v].layers.size(); ++l) {
      const std::string p = std::to_string(v) + "." + std::to_string(l);
      point["w" + p] = s.encoder.views[v].layers[l].weight;
      point["b" + p] = s.encoder.views[v].layers[l].bias;
      names.push_back("w" + p);
      names.push_back("b" + p);
    }
  }
  const TrainConfig &config = s.config;
  Expression expr = [&](Graph &g, const std::map<std::string, Var> &in) {
    EncoderVars vars;
    vars.views.resize(m);
    for (int v = 0; v < m; ++v) {
      for (size_t l = 0; l < s.encoder.views[v].layers.size(); ++l) {
        const std::string p = std::to_string(v) + "." + std::to_string(l);
        vars.views[v].push_back({in.at("w" + p), in.at("b" + p)});
      }
    }
    return StepLossInGraph(g, vars, config, tv, plan).total;
  };
  EXPECT_LT(FiniteDifferenceCheck(expr, point, names, 1e-6), 1e-3);

  // The alignment term is present and contributes.
  Graph g;
  EncoderVars vars = AddEncoderToGraph(g, s.encoder, false);
  StepLoss loss = StepLossInGraph(g, vars, config, tv, plan);
  EXPECT_NE(g.value(loss.da)[0], 0.0);
}

TEST(TrainStepTest, ZeroBetaMatchesNoAlignment) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainConfig with = SmallConfig();
  with.variant = Variant::kFpDa;
  with.beta = 0.0;
  TrainConfig without = with;
  without.align.discrepancy = Discrepancy::kNone;
  TrainState a = StateFor(with, tv);
  TrainState b = StateFor(without, tv);
  ASSERT_EQ(a.encoder, b.encoder);
  const int batch[] = {1, 4, 6, 8, 10};
  for (int i = 0; i < 5; ++i) {
    StepMetrics ma = TrainStep(a, tv, batch);
    StepMetrics mb = TrainStep(b, tv, batch);
    EXPECT_EQ(ma.loss_unisap, mb.loss_unisap);
  }
  EXPECT_EQ(a.encoder, b.encoder);
  EXPECT_EQ(a.bank, b.bank);
}

TEST(TrainStepTest, ViewCountMismatchRejected) {
  MultiViewDataset d3 = SmallData(3, 3);
  MultiViewDataset d2 = SmallData(3, 2);
  TrainState s = StateFor(SmallConfig(), TrainingSplit(d2));
  const int batch[] = {0, 1};
  EXPECT_THROW(TrainStep(s, TrainingSplit(d3), batch), ConfigError);
  EXPECT_THROW(Fit(s, TrainingSplit(d3)), ConfigError);
}

// ---- Fit --------------------------------------------------------------

TEST(FitTest, ZeroEpochsGivesEmptyHistory) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c = SmallConfig();
  c.epochs = 0;
  TrainState s = StateFor(c, tv);
  const TrainState before = s;
  History h = Fit(s, tv);
  EXPECT_TRUE(h.epochs.empty());
  EXPECT_TRUE(h.transfers.empty());
  EXPECT_EQ(s, before);
}

TEST(FitTest, SameSeedSameRun) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainState a = StateFor(SmallConfig(), tv);
  TrainState b = StateFor(SmallConfig(), tv);
  History ha = Fit(a, tv);
  History hb = Fit(b, tv);
  EXPECT_EQ(ha.EpochCsv(), hb.EpochCsv());
  EXPECT_EQ(ha.TransferCsv(), hb.TransferCsv());
  EXPECT_EQ(a, b);
  EXPECT_EQ(ha.epochs.size(), 4u);
}

TEST(FitTest, ResumeFromCheckpointIsBitIdentical) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainState whole = StateFor(SmallConfig(), tv);
  History full = Fit(whole, tv);

  TrainState first = StateFor(SmallConfig(), tv);
  FitOptions stop;
  stop.stop_epoch = 2;
  History part1 = Fit(first, tv, stop);
  EXPECT_EQ(first.epoch, 2);
  TrainState resumed = DeserializeCheckpoint(SerializeCheckpoint(first));
  EXPECT_EQ(resumed, first);
  History part2 = Fit(resumed, tv);

  EXPECT_EQ(resumed, whole);
  ASSERT_EQ(part1.epochs.size() + part2.epochs.size(), full.epochs.size());
  for (size_t e = 0; e < part1.epochs.size(); ++e) EXPECT_EQ(part1.epochs[e], full.epochs[e]);
  for (size_t e = 0; e < part2.epochs.size(); ++e) {
    EXPECT_EQ(part2.epochs[e], full.epochs[part1.epochs.size() + e]);
  }
  std::vector<History::Transfer> joined = part1.transfers;
  joined.insert(joined.end(), part2.transfers.begin(), part2.transfers.end());
  EXPECT_EQ(joined, full.transfers);
}

TEST(FitTest, TransfersOnlyAfterStartEpochAndOnlyTrainingRows) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c = SmallConfig();
  c.pools.start_epoch = 2;
  TrainState s = StateFor(c, tv);
  History h = Fit(s, tv);
  std::set<int> train_rows(tv.source_index.begin(), tv.source_index.end());
  for (int row : SplitIndices(d, true)) EXPECT_EQ(train_rows.count(row), 0u);
  EXPECT_EQ(h.epochs[0].transfers, 0);
  EXPECT_EQ(h.epochs[1].transfers, 0);
  EXPECT_GT(h.epochs[2].transfers, 0);
  for (const auto &t : h.transfers) {
    EXPECT_GE(t.epoch, 2);
    EXPECT_EQ(train_rows.count(t.anchor), 1u);
    EXPECT_EQ(train_rows.count(t.sample), 1u);
    EXPECT_NE(t.anchor, t.sample);
  }
}

TEST(FitTest, UnifiedLossDecreasesOnSeparableData) {
  SyntheticConfig s;
  s.per_class = 100;
  s.seed = 2;
  MultiViewDataset d = GenerateSynthetic(s);
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c;
  c.variant = Variant::kFp;
  c.widths = {32};
  c.embed_dim = 16;
  c.pools.negatives = 32;
  c.epochs = 6;
  TrainState state = StateFor(c, tv);
  History h = Fit(state, tv);
  EXPECT_LT(h.epochs.back().loss_unisap, h.epochs.front().loss_unisap);
}

TEST(FitTest, HistoryCsvColumns) {
  MultiViewDataset d = SmallData(3, 3);
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c = SmallConfig();
  c.epochs = 1;
  TrainState s = StateFor(c, tv);
  History h = Fit(s, tv);
  const std::string csv = h.EpochCsv();
  const std::string header = csv.substr(0, csv.find("\r\n"));
  EXPECT_EQ(header,
            "epoch,loss_total,loss_unisap,loss_da,transfers,"
            "wd_pair_0_1,wd_pair_0_2,wd_pair_1_2,gp_pair_0_1,gp_pair_0_2,gp_pair_1_2,"
            "discgrad_pair_0_1,discgrad_pair_0_2,discgrad_pair_1_2");
  EXPECT_EQ(h.TransferCsv().substr(0, 29), "epoch,anchor,sample,view,scor");
}

// ---- Checkpoints ------------------------------------------------------

TEST(CheckpointTest, CorruptionDetected) {
  MultiViewDataset d = SmallData();
  TrainingViews tv = TrainingSplit(d);
  TrainState s = StateFor(SmallConfig(), tv);
  std::vector<uint8_t> bytes = SerializeCheckpoint(s);
  EXPECT_EQ(DeserializeCheckpoint(bytes), s);

  std::vector<uint8_t> bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(DeserializeCheckpoint(bad_magic), FormatError);

  std::vector<uint8_t> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
  EXPECT_THROW(DeserializeCheckpoint(truncated), FormatError);

  std::vector<uint8_t> version = bytes;
  version[8] = 0x7f;
  EXPECT_THROW(DeserializeCheckpoint(version), FormatError);
}

TEST(CheckpointTest, MissingFileIsIoError) {
  EXPECT_THROW(ReadCheckpoint("/nonexistent/dir/ckpt.bin"), IoError);
}

}  // namespace
}  // namespace ipmc
