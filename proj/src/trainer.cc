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

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "ipmc/csv.h"
#include "ipmc/errors.h"
#include "json.hpp"

namespace ipmc {

namespace {

using json = nlohmann::json;

constexpr char kCheckpointMagic[8] = {'I', 'P', 'M', 'C', 'C', 'K', 'P', '\0'};
constexpr uint32_t kCheckpointVersion = 1;

uint64_t SplitMix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b = 0) {
  return SplitMix(SplitMix(SplitMix(seed) ^ a) ^ b);
}

// Seed streams.
enum Stream : uint64_t { kEncoderInit = 1, kBankInit, kCriticInit, kShuffle, kCriticStep };

Matrix GradOrZero(const Graph &g, Var v) {
  const Matrix &grad = g.grad(v);
  if (!grad.empty()) return grad;
  const Matrix &value = g.value(v);
  return Matrix(value.rows(), value.cols());
}

std::string PairName(const std::string &prefix, int i, int j) {
  return prefix + "_pair_" + std::to_string(i) + "_" + std::to_string(j);
}

// Appends `count` bank slots of `view`, drawn with replacement.
Matrix WithBankRows(const Matrix &batch, const MemoryBank &bank, int view, int count,
                    std::mt19937_64 &rng) {
  Matrix out(batch.rows() + count, batch.cols());
  std::copy(batch.data().begin(), batch.data().end(), out.data().begin());
  std::uniform_int_distribution<int> pick(0, bank.samples() - 1);
  for (int i = 0; i < count; ++i) {
    auto slot = bank.Read(pick(rng), view);
    std::copy(slot.begin(), slot.end(), out.row(batch.rows() + i).begin());
  }
  return out;
}

template <typename T>
void Take(const json &j, const char *key, T &out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Variant ParseVariant(const std::string &name) {
  if (name == "fp") return Variant::kFp;
  if (name == "fp+da") return Variant::kFpDa;
  if (name == "sap+da") return Variant::kSapDa;
  throw ConfigError("unknown variant '" + name + "'");
}

std::string VariantName(Variant v) {
  switch (v) {
    case Variant::kFp: return "fp";
    case Variant::kFpDa: return "fp+da";
    case Variant::kSapDa: return "sap+da";
  }
  return "unknown";
}

void TrainConfig::Resolve() {
  if (variant == Variant::kFp) {
    align.discrepancy = Discrepancy::kNone;
    pools.k_top = 0;
  } else if (variant == Variant::kFpDa) {
    pools.k_top = 0;
  }
}

void TrainConfig::Validate() const {
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch < 1) throw ConfigError("batch must be positive");
  if (lr < 0.0) throw ConfigError("lr must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam decay rates must lie in [0, 1)");
  }
  if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
  for (int w : widths) {
    if (w < 1) throw ConfigError("zero-width encoder layer");
  }
  loss.Validate();
  if (loss.mode == LossMode::kHinge) throw ConfigError("hinge mode cannot be trained");
  align.Validate();
  if (critic_bank_samples < 0) throw ConfigError("critic_bank_samples must be non-negative");
  if (pools.negatives < 1) throw ConfigError("pool_negatives must be positive");
  if (pools.k_top < 0) throw ConfigError("k_top must be non-negative");
  if (pools.eta < 1) throw ConfigError("eta must be >= 1");
  if (pools.start_epoch < 0) throw ConfigError("sap_start_epoch must be non-negative");
}

std::vector<int> TrainConfig::EncoderWidths() const {
  std::vector<int> out = widths;
  out.push_back(embed_dim);
  return out;
}

TrainConfig ParseTrainConfig(const std::string &json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception &e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const char *kKeys[] = {
      "gamma", "delta", "lambda", "beta", "k_top", "eta", "phi_dec", "tau_dec", "mode",
      "k_critic", "gp_weight", "discrepancy", "pool_negatives", "sap_start_epoch", "seed",
      "epochs", "batch", "lr", "widths", "embed_dim", "critic_hidden", "critic_lr",
      "variant", "loss_scale", "bank_positives", "critic_bank_samples", "adam_beta1", "adam_beta2"};
  for (const auto &[key, _] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    Take(j, "gamma", c.loss.gamma);
    Take(j, "delta", c.loss.delta);
    Take(j, "lambda", c.loss.lambda);
    Take(j, "phi_dec", c.loss.phi_dec);
    Take(j, "tau_dec", c.loss.tau_dec);
    Take(j, "loss_scale", c.loss.scale);
    if (j.contains("mode")) c.loss.mode = ParseLossMode(j.at("mode").get<std::string>());
    Take(j, "beta", c.beta);
    Take(j, "k_top", c.pools.k_top);
    Take(j, "eta", c.pools.eta);
    Take(j, "pool_negatives", c.pools.negatives);
    Take(j, "sap_start_epoch", c.pools.start_epoch);
    Take(j, "bank_positives", c.pools.bank_positives);
    Take(j, "k_critic", c.align.k_critic);
    Take(j, "gp_weight", c.align.gp_weight);
    Take(j, "critic_lr", c.align.critic_lr);
    Take(j, "critic_hidden", c.align.critic_hidden);
    Take(j, "critic_bank_samples", c.critic_bank_samples);
    if (j.contains("discrepancy")) {
      c.align.discrepancy = ParseDiscrepancy(j.at("discrepancy").get<std::string>());
    }
    Take(j, "seed", c.seed);
    Take(j, "epochs", c.epochs);
    Take(j, "batch", c.batch);
    Take(j, "lr", c.lr);
    Take(j, "adam_beta1", c.adam_beta1);
    Take(j, "adam_beta2", c.adam_beta2);
    Take(j, "widths", c.widths);
    Take(j, "embed_dim", c.embed_dim);
    if (j.contains("variant")) c.variant = ParseVariant(j.at("variant").get<std::string>());
  } catch (const json::exception &e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.Resolve();
  c.Validate();
  return c;
}

std::string TrainConfigToJson(const TrainConfig &c) {
  json j;
  j["gamma"] = c.loss.gamma;
  j["delta"] = c.loss.delta;
  j["lambda"] = c.loss.lambda;
  j["phi_dec"] = c.loss.phi_dec;
  j["tau_dec"] = c.loss.tau_dec;
  j["loss_scale"] = c.loss.scale;
  j["mode"] = LossModeName(c.loss.mode);
  j["beta"] = c.beta;
  j["k_top"] = c.pools.k_top;
  j["eta"] = c.pools.eta;
  j["pool_negatives"] = c.pools.negatives;
  j["sap_start_epoch"] = c.pools.start_epoch;
  j["bank_positives"] = c.pools.bank_positives;
  j["k_critic"] = c.align.k_critic;
  j["gp_weight"] = c.align.gp_weight;
  j["critic_lr"] = c.align.critic_lr;
  j["critic_hidden"] = c.align.critic_hidden;
  j["critic_bank_samples"] = c.critic_bank_samples;
  j["discrepancy"] = DiscrepancyName(c.align.discrepancy);
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["widths"] = c.widths;
  j["embed_dim"] = c.embed_dim;
  j["variant"] = VariantName(c.variant);
  return j.dump(2) + "\n";
}

TrainState InitTrainState(const TrainConfig &config, std::span<const int> input_dims,
                          int samples) {
  TrainState state;
  state.config = config;
  state.config.Resolve();
  state.config.Validate();
  TrainConfig &c = state.config;
  const int m = static_cast<int>(input_dims.size());
  if (m < 1) throw ConfigError("need at least one view");
  if (samples < 2) throw ConfigError("need at least two training samples");
  if (m < 2) c.align.discrepancy = Discrepancy::kNone;
  if (c.pools.negatives > samples - 1) {
    std::cerr << "warning: pool_negatives " << c.pools.negatives << " exceeds the "
              << samples - 1 << " other samples; clamped\n";
    c.pools.negatives = samples - 1;
  }
  if (c.pools.k_top > 0 && c.pools.k_top >= c.pools.negatives * m) {
    throw ConfigError("k_top must be smaller than the negative pool");
  }
  state.encoder = InitEncoderParams(input_dims, c.EncoderWidths(), DeriveSeed(c.seed, kEncoderInit));
  state.bank = MemoryBank::Create(samples, m, c.embed_dim, DeriveSeed(c.seed, kBankInit));
  if (c.align.discrepancy == Discrepancy::kWasserstein) {
    auto pairs = ViewPairs(m);
    for (size_t p = 0; p < pairs.size(); ++p) {
      state.critics.push_back(
          {InitCritic(c.embed_dim, c.align.critic_hidden, DeriveSeed(c.seed, kCriticInit, p)),
           AdamState{}});
    }
  }
  state.tracker = SimilarityTracker(c.pools.eta);
  state.rng.seed(DeriveSeed(c.seed, kShuffle));
  return state;
}

StepLoss StepLossInGraph(Graph &g, const EncoderVars &encoder, const TrainConfig &config,
                         const TrainingViews &data, const StepPlan &plan) {
  const int m = data.view_count();
  const int batch = static_cast<int>(plan.batch.size());
  if (batch == 0) throw ConfigError("empty batch");
  if (static_cast<int>(plan.pools.size()) != batch) {
    throw ShapeError("one pool per anchor expected");
  }
  StepLoss out;
  for (int v = 0; v < m; ++v) {
    out.embeddings.push_back(
        EncodeInGraph(g, encoder, v, g.Constant(SelectRows(data.views[v], plan.batch))));
  }
  Var sum = g.Constant(Matrix::Scalar(0.0));
  for (int a = 0; a < batch; ++a) {
    const ContrastPools &pools = plan.pools[a];
    const int dim = static_cast<int>(pools.negatives.front().feature.size());
    std::vector<Var> parts;
    const int anchor_row[1] = {a};
    for (int v = 0; v < m; ++v) parts.push_back(g.GatherRows(out.embeddings[v], anchor_row));
    const int extra = static_cast<int>(pools.positives.size()) - m;
    if (extra > 0) {
      Matrix rest(extra, dim);
      for (int i = 0; i < extra; ++i) {
        const auto &f = pools.positives[m + i].feature;
        std::copy(f.begin(), f.end(), rest.row(i).begin());
      }
      parts.push_back(g.Constant(std::move(rest)));
    }
    Matrix negatives(static_cast<int>(pools.negatives.size()), dim);
    for (size_t i = 0; i < pools.negatives.size(); ++i) {
      const auto &f = pools.negatives[i].feature;
      std::copy(f.begin(), f.end(), negatives.row(static_cast<int>(i)).begin());
    }
    SimilarityVars sims =
        PairSimilaritiesInGraph(g, g.ConcatRows(parts), g.Constant(std::move(negatives)));
    sum = g.Add(sum, UnifiedLossInGraph(g, sims.pos, sims.neg, config.loss));
  }
  out.unisap = g.Scale(sum, 1.0 / batch);
  if (m >= 2 && config.align.discrepancy != Discrepancy::kNone) {
    out.da = AlignmentLossInGraph(g, out.embeddings, plan.critics, config.align);
  } else {
    out.da = g.Constant(Matrix::Scalar(0.0));
  }
  out.total = g.Add(out.unisap, g.Scale(out.da, config.beta));
  return out;
}

StepMetrics TrainStep(TrainState &state, const TrainingViews &data, std::span<const int> batch) {
  const TrainConfig &c = state.config;
  const int m = data.view_count();
  if (batch.empty()) throw ConfigError("empty batch");
  if (m != state.encoder.view_count()) throw ConfigError("data/state view count mismatch");

  // (1) Detached embeddings of every view.
  std::vector<Matrix> detached;
  for (int v = 0; v < m; ++v) {
    detached.push_back(Encode(state.encoder, v, SelectRows(data.views[v], batch)));
  }

  StepMetrics metrics;
  // (2) Critic ascent on the detached embeddings.
  auto pairs = ViewPairs(m);
  for (size_t p = 0; p < pairs.size(); ++p) {
    std::mt19937_64 crng(DeriveSeed(c.seed, kCriticStep, state.step * 1000 + p));
    Matrix a = detached[pairs[p].first];
    Matrix b = detached[pairs[p].second];
    // Once every slot holds a real embedding, the critic also sees bank rows
    // of other samples, which lowers the finite-sample floor of its estimate.
    if (c.critic_bank_samples > 0 && state.epoch > 0 &&
        c.align.discrepancy == Discrepancy::kWasserstein) {
      a = WithBankRows(a, state.bank, pairs[p].first, c.critic_bank_samples, crng);
      b = WithBankRows(b, state.bank, pairs[p].second, c.critic_bank_samples, crng);
    }
    switch (c.align.discrepancy) {
      case Discrepancy::kWasserstein: {
        metrics.pair_estimate.push_back(TrainCritic(state.critics[p], a, b, c.align, crng));
        metrics.pair_penalty.push_back(GradientPenalty(state.critics[p].params, a, b, crng));
        metrics.pair_discgrad.push_back(DiscGradDiagnostic(state.critics[p].params, a, b));
        break;
      }
      case Discrepancy::kKl:
        metrics.pair_estimate.push_back(KlDiscrepancy(a, b));
        metrics.pair_penalty.push_back(0.0);
        metrics.pair_discgrad.push_back(0.0);
        break;
      case Discrepancy::kNone:
        metrics.pair_estimate.push_back(0.0);
        metrics.pair_penalty.push_back(0.0);
        metrics.pair_discgrad.push_back(0.0);
        break;
    }
  }

  // (3) Pools, similarity tracking and the view filter.
  StepPlan plan;
  plan.batch.assign(batch.begin(), batch.end());
  for (const auto &critic : state.critics) plan.critics.push_back(critic.params);
  for (size_t a = 0; a < batch.size(); ++a) {
    Matrix anchor_views(m, c.embed_dim);
    for (int v = 0; v < m; ++v) {
      auto row = detached[v].row(static_cast<int>(a));
      std::copy(row.begin(), row.end(), anchor_views.row(v).begin());
    }
    ContrastPools pools = BuildPools(anchor_views, state.bank, batch[a], c.pools, state.rng);
    if (c.pools.k_top > 0) {
      RecordPoolSimilarities(pools, state.tracker, state.epoch);
      if (state.epoch >= c.pools.start_epoch) {
        auto events = ViewFilterTransfer(pools, state.tracker, c.pools.k_top, state.epoch);
        metrics.transfers += static_cast<int>(events.size());
        metrics.events.insert(metrics.events.end(), events.begin(), events.end());
      }
    }
    plan.pools.push_back(std::move(pools));
  }

  // (4) Step loss with frozen critics.
  Graph g;
  EncoderVars vars = AddEncoderToGraph(g, state.encoder, true);
  StepLoss loss = StepLossInGraph(g, vars, c, data, plan);
  metrics.loss_total = g.value(loss.total)[0];
  metrics.loss_unisap = g.value(loss.unisap)[0];
  metrics.loss_da = g.value(loss.da)[0];
  if (!std::isfinite(metrics.loss_total)) {
    throw DivergenceError("non-finite step loss at epoch " + std::to_string(state.epoch) +
                          ", step " + std::to_string(state.step));
  }
  g.Backward(loss.total);

  // (5) Encoder update.
  std::vector<Matrix> grads;
  for (const auto &view : vars.views) {
    for (const auto &layer : view) {
      grads.push_back(GradOrZero(g, layer.weight));
      grads.push_back(GradOrZero(g, layer.bias));
    }
  }
  auto refs = state.encoder.Refs();
  AdaptiveMomentUpdate(refs, grads, state.encoder_adam, AdamConfig{c.lr, c.adam_beta1, c.adam_beta2, 1e-8});

  // (6) Bank refresh with this step's embeddings.
  for (size_t a = 0; a < batch.size(); ++a) {
    for (int v = 0; v < m; ++v) {
      state.bank.Update(batch[a], v, detached[v].row(static_cast<int>(a)));
    }
  }
  ++state.step;
  return metrics;
}

History Fit(TrainState &state, const TrainingViews &data, const FitOptions &options) {
  const TrainConfig &c = state.config;
  const int m = data.view_count();
  if (m != state.encoder.view_count()) {
    throw ConfigError("dataset has " + std::to_string(m) + " views, model expects " +
                      std::to_string(state.encoder.view_count()));
  }
  for (int v = 0; v < m; ++v) {
    if (data.views[v].cols() != state.encoder.views[v].input_dim()) {
      throw ConfigError("view " + std::to_string(v) + " width mismatch");
    }
  }
  if (data.samples() != state.bank.samples()) {
    throw ConfigError("dataset has " + std::to_string(data.samples()) +
                      " training samples, state expects " + std::to_string(state.bank.samples()));
  }
  const int stop = std::min(c.epochs, options.stop_epoch.value_or(c.epochs));
  const int pair_count = static_cast<int>(ViewPairs(m).size());
  History history;
  history.views = m;
  while (state.epoch < stop) {
    std::vector<uint8_t> snapshot;
    if (!options.failure_checkpoint.empty()) snapshot = SerializeCheckpoint(state);
    std::vector<int> order(data.samples());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), state.rng);
    EpochRecord record;
    record.epoch = state.epoch;
    record.pair_estimate.assign(pair_count, 0.0);
    record.pair_penalty.assign(pair_count, 0.0);
    record.pair_discgrad.assign(pair_count, 0.0);
    int steps = 0;
    try {
      for (size_t begin = 0; begin < order.size(); begin += c.batch) {
        const size_t end = std::min(order.size(), begin + c.batch);
        std::span<const int> batch(order.data() + begin, end - begin);
        StepMetrics step = TrainStep(state, data, batch);
        record.loss_total += step.loss_total;
        record.loss_unisap += step.loss_unisap;
        record.loss_da += step.loss_da;
        record.transfers += step.transfers;
        for (int p = 0; p < pair_count; ++p) {
          record.pair_estimate[p] += step.pair_estimate[p];
          record.pair_penalty[p] += step.pair_penalty[p];
          record.pair_discgrad[p] += step.pair_discgrad[p];
        }
        for (const auto &e : step.events) {
          const int sample = e.negative_id / m;
          history.transfers.push_back({state.epoch, data.source_index[e.anchor],
                                       data.source_index[sample], e.negative_id % m, e.score});
        }
        ++steps;
      }
    } catch (const DivergenceError &) {
      if (!snapshot.empty()) {
        WriteFileBytes(options.failure_checkpoint, snapshot);
        std::cerr << "diverged; epoch-start state saved to " << options.failure_checkpoint
                  << "\n";
      }
      throw;
    }
    const double inv = 1.0 / steps;
    record.loss_total *= inv;
    record.loss_unisap *= inv;
    record.loss_da *= inv;
    for (int p = 0; p < pair_count; ++p) {
      record.pair_estimate[p] *= inv;
      record.pair_penalty[p] *= inv;
      record.pair_discgrad[p] *= inv;
    }
    history.epochs.push_back(std::move(record));
    ++state.epoch;
    state.tracker.Prune(state.epoch);
  }
  return history;
}

std::string History::EpochCsv() const {
  CsvWriter csv;
  std::vector<std::string> header = {"epoch", "loss_total", "loss_unisap", "loss_da",
                                     "transfers"};
  auto pairs = ViewPairs(views);
  for (const char *prefix : {"wd", "gp", "discgrad"}) {
    for (auto [i, j] : pairs) header.push_back(PairName(prefix, i, j));
  }
  csv.Row(header);
  for (const auto &r : epochs) {
    std::vector<std::string> row = {std::to_string(r.epoch), FormatReal(r.loss_total),
                                    FormatReal(r.loss_unisap), FormatReal(r.loss_da),
                                    std::to_string(r.transfers)};
    for (const auto *values : {&r.pair_estimate, &r.pair_penalty, &r.pair_discgrad}) {
      for (double v : *values) row.push_back(FormatReal(v));
    }
    csv.Row(row);
  }
  return csv.text();
}

std::string History::TransferCsv() const {
  CsvWriter csv;
  csv.Row({"epoch", "anchor", "sample", "view", "score"});
  for (const auto &t : transfers) {
    csv.Row({std::to_string(t.epoch), std::to_string(t.anchor), std::to_string(t.sample),
             std::to_string(t.view), FormatReal(t.score)});
  }
  return csv.text();
}

std::vector<uint8_t> SerializeCheckpoint(const TrainState &state) {
  std::vector<std::pair<std::string, std::vector<uint8_t>>> sections;
  auto add = [&](const std::string &name, ByteWriter w) {
    sections.emplace_back(name, w.Release());
  };
  {
    ByteWriter w;
    w.PutString(TrainConfigToJson(state.config));
    add("config", std::move(w));
  }
  {
    ByteWriter w;
    SerializeEncoder(state.encoder, w);
    state.encoder_adam.Serialize(w);
    add("encoder", std::move(w));
  }
  {
    ByteWriter w;
    w.PutU32(static_cast<uint32_t>(state.critics.size()));
    for (const auto &critic : state.critics) SerializeCritic(critic, w);
    add("critics", std::move(w));
  }
  {
    ByteWriter w;
    state.bank.Serialize(w);
    add("bank", std::move(w));
  }
  {
    ByteWriter w;
    state.tracker.Serialize(w);
    add("tracker", std::move(w));
  }
  {
    ByteWriter w;
    std::ostringstream text;
    text << state.rng;
    w.PutString(text.str());
    w.PutI32(state.epoch);
    w.PutU64(static_cast<uint64_t>(state.step));
    add("meta", std::move(w));
  }
  ByteWriter out;
  out.PutBytes(std::string_view(kCheckpointMagic, 8));
  out.PutU32(kCheckpointVersion);
  out.PutU32(static_cast<uint32_t>(sections.size()));
  // Table entry: u64-prefixed name, u64 offset, u64 length.
  uint64_t table = 0;
  for (const auto &[name, _] : sections) table += 8 + name.size() + 16;
  uint64_t offset = 16 + table;
  for (const auto &[name, payload] : sections) {
    out.PutString(name);
    out.PutU64(offset);
    out.PutU64(payload.size());
    offset += payload.size();
  }
  for (const auto &[_, payload] : sections) {
    out.PutBytes(std::string_view(reinterpret_cast<const char *>(payload.data()), payload.size()));
  }
  return out.Release();
}

TrainState DeserializeCheckpoint(std::span<const uint8_t> bytes) {
  ByteReader in(bytes);
  if (bytes.size() < 8 || in.GetBytes(8) != std::string(kCheckpointMagic, 8)) {
    throw FormatError("bad magic: not an IPMC checkpoint");
  }
  const uint32_t version = in.GetU32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t count = in.GetU32();
  std::map<std::string, std::span<const uint8_t>> sections;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = in.GetString();
    const uint64_t offset = in.GetU64();
    const uint64_t length = in.GetU64();
    if (offset > bytes.size() || length > bytes.size() - offset) {
      throw FormatError("checkpoint section '" + name + "' out of bounds");
    }
    sections[name] = bytes.subspan(offset, length);
  }
  auto section = [&](const char *name) {
    auto it = sections.find(name);
    if (it == sections.end()) throw FormatError(std::string("missing section ") + name);
    return ByteReader(it->second);
  };
  TrainState state;
  {
    ByteReader r = section("config");
    state.config = ParseTrainConfig(r.GetString());
  }
  {
    ByteReader r = section("encoder");
    state.encoder = DeserializeEncoder(r);
    state.encoder_adam = AdamState::Deserialize(r);
  }
  {
    ByteReader r = section("critics");
    const uint32_t n = r.GetU32();
    for (uint32_t i = 0; i < n; ++i) state.critics.push_back(DeserializeCritic(r));
  }
  {
    ByteReader r = section("bank");
    state.bank = MemoryBank::Deserialize(r);
  }
  {
    ByteReader r = section("tracker");
    state.tracker = SimilarityTracker::Deserialize(r);
  }
  {
    ByteReader r = section("meta");
    std::istringstream text(r.GetString());
    text >> state.rng;
    if (!text) throw FormatError("corrupt rng state");
    state.epoch = r.GetI32();
    state.step = static_cast<int64_t>(r.GetU64());
  }
  return state;
}

void WriteCheckpoint(const TrainState &state, const std::string &path) {
  WriteFileBytes(path, SerializeCheckpoint(state));
}

TrainState ReadCheckpoint(const std::string &path) {
  return DeserializeCheckpoint(ReadFileBytes(path));
}

}  // namespace ipmc
