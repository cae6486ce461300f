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

// Acceptance run: one PASS/FAIL line per criterion with the measured value
// and the tolerance it was held to. Exits 0 when every criterion could be
// evaluated; with --strict, any FAIL also makes the exit code 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ipmc/align.h"
#include "ipmc/dataset.h"
#include "ipmc/errors.h"
#include "ipmc/eval.h"
#include "ipmc/experiment.h"
#include "ipmc/info.h"
#include "ipmc/pools.h"
#include "ipmc/selfcheck.h"
#include "ipmc/trainer.h"

namespace ipmc {
namespace {

struct Line {
  std::string id;
  bool pass;
  std::string detail;
  double seconds;
};

class Report {
 public:
  explicit Report(std::ostream &log) : log_(log) {}

  void Add(const std::string &id, bool pass, const std::string &detail, double seconds) {
    lines_.push_back({id, pass, detail, seconds});
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1fs", seconds);
    const std::string text = id + " " + (pass ? "PASS" : "FAIL") + " " + detail + " (" + buf + ")";
    std::cout << text << std::endl;
    log_ << text << "\n";
    log_.flush();
  }
  void Note(const std::string &text) {
    std::cout << "  " << text << std::endl;
    log_ << "  " << text << "\n";
    log_.flush();
  }
  bool all_pass() const {
    return std::all_of(lines_.begin(), lines_.end(), [](const Line &l) { return l.pass; });
  }

 private:
  std::ostream &log_;
  std::vector<Line> lines_;
};

class Timer {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string Fmt(const char *format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- Pinned settings ----------------------------------------------------

constexpr int kSeeds = 5;

SyntheticConfig AblationData(uint64_t seed) {
  SyntheticConfig s;
  s.classes = 4;
  s.per_class = 500;
  s.views = 3;
  s.class_separation = 5.0;
  s.noise_scale = 3.0;
  s.seed = seed;
  return s;
}

TrainConfig AblationConfig(Variant variant, uint64_t seed) {
  TrainConfig c;
  c.epochs = 50;
  c.batch = 64;
  c.lr = 2e-4;
  c.adam_beta1 = 0.5;
  c.adam_beta2 = 0.9;
  c.beta = 1.0;
  c.widths = {64};
  c.embed_dim = 16;
  c.pools.negatives = 32;
  c.align.critic_hidden = {64, 32, 32};
  c.align.k_critic = 5;
  c.variant = variant;
  c.seed = seed;
  c.Resolve();
  return c;
}

// ---- AC-1 ---------------------------------------------------------------

// Central differences of the full training step loss (pool loss plus the
// alignment term) in every encoder parameter, at a trained-for-one-step
// state and a fresh batch.
double StepLossGradientError(uint64_t seed) {
  SyntheticConfig s;
  s.per_class = 15;
  s.view_dim = 6;
  s.latent_dim = 4;
  s.seed = seed;
  MultiViewDataset d = GenerateSynthetic(s);
  TrainingViews tv = TrainingSplit(d);
  TrainConfig c;
  c.widths = {8};
  c.embed_dim = 6;
  c.pools.negatives = 6;
  c.pools.start_epoch = 0;
  c.pools.eta = 2;
  c.align.critic_hidden = {12, 12};
  c.align.k_critic = 2;
  c.seed = seed;
  auto dims = tv.view_dims();
  TrainState state = InitTrainState(c, dims, tv.samples());
  std::vector<int> warm(16);
  std::iota(warm.begin(), warm.end(), 0);
  TrainStep(state, tv, warm);

  std::mt19937_64 rng(seed);
  const int m = tv.view_count();
  StepPlan plan;
  std::vector<int> order(tv.samples());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  plan.batch.assign(order.begin(), order.begin() + 4);
  for (const auto &critic : state.critics) plan.critics.push_back(critic.params);
  std::vector<Matrix> detached;
  for (int v = 0; v < m; ++v) {
    detached.push_back(Encode(state.encoder, v, SelectRows(tv.views[v], plan.batch)));
  }
  for (size_t a = 0; a < plan.batch.size(); ++a) {
    Matrix anchor(m, c.embed_dim);
    for (int v = 0; v < m; ++v) {
      auto row = detached[v].row(static_cast<int>(a));
      std::copy(row.begin(), row.end(), anchor.row(v).begin());
    }
    ContrastPools pools = BuildPools(anchor, state.bank, plan.batch[a], state.config.pools, rng);
    ViewFilterTransfer(pools, state.tracker, 1, 0);
    plan.pools.push_back(std::move(pools));
  }

  Bindings point;
  std::vector<std::string> names;
  for (int v = 0; v < m; ++v) {
    for (size_t l = 0; l < state.encoder.views[v].layers.size(); ++l) {
      const std::string p = std::to_string(v) + "." + std::to_string(l);
      point["w" + p] = state.encoder.views[v].layers[l].weight;
      point["b" + p] = state.encoder.views[v].layers[l].bias;
      names.push_back("w" + p);
      names.push_back("b" + p);
    }
  }
  const TrainConfig &config = state.config;
  Expression expr = [&](Graph &g, const std::map<std::string, Var> &in) {
    EncoderVars vars;
    vars.views.resize(m);
    for (int v = 0; v < m; ++v) {
      for (size_t l = 0; l < state.encoder.views[v].layers.size(); ++l) {
        const std::string p = std::to_string(v) + "." + std::to_string(l);
        vars.views[v].push_back({in.at("w" + p), in.at("b" + p)});
      }
    }
    return StepLossInGraph(g, vars, config, tv, plan).total;
  };
  return FiniteDifferenceCheck(expr, point, names, 1e-6);
}

void CheckGradients(Report &report, const std::vector<CheckResult> &checks) {
  Timer t;
  double ops = 0.0, losses = 0.0;
  for (const auto &c : checks) {
    if (c.name == "op-gradients") ops = c.worst;
    if (c.name == "loss-gradients") losses = c.worst;
  }
  double step = 0.0;
  for (uint64_t seed = 1; seed <= 10; ++seed) step = std::max(step, StepLossGradientError(seed));
  const double worst = std::max({ops, losses, step});
  report.Add("AC-1", worst < 1e-4,
             Fmt("max_rel_err=%.2e (ops %.2e, losses %.2e, step loss %.2e) tolerance=1e-4", worst,
                 ops, losses, step),
             t.Seconds());
}

// ---- AC-2, AC-3, AC-8 ---------------------------------------------------

CheckResult Find(const std::vector<CheckResult> &checks, const std::string &name) {
  for (const auto &c : checks) {
    if (c.name == name) return c;
  }
  throw Error("internal", "missing self-check " + name);
}

void CheckLossIdentities(Report &report, const std::vector<CheckResult> &checks) {
  auto find = [&](const std::string &name) { return Find(checks, name); };
  const CheckResult gamma = find("gamma-limit");
  report.Add("AC-2", gamma.pass,
             Fmt("max|softened-hinge|=%.2e at gamma=1024 tolerance=1e-2", gamma.worst), 0.0);
  const CheckResult closed = find("leveraged-closed-form");
  report.Add("AC-3", closed.pass, Fmt("max_dev=%.2e tolerance=1e-9", closed.worst), 0.0);
}

void CheckInformation(Report &report, const std::vector<CheckResult> &checks, double seconds) {
  Timer t;
  const CheckResult kl = Find(checks, "kl-identity");
  // XOR triple checked here as well, against exact bit values.
  DiscreteJoint x = DiscreteJoint({"X", "Z"}, {2, 2}, {0.25, 0.25, 0.25, 0.25})
                        .WithDerived("Y", 2, [](std::span<const int> s) { return s[0] ^ s[1]; });
  const double i = MutualInformation(x, {"X"}, {"Y"});
  const double cmi = ConditionalMutualInformation(x, {"X"}, {"Y"}, {"Z"});
  const double inter = InteractionInformation(x, {"X"}, {"Y"}, {"Z"});
  const double xor_dev = std::max({std::abs(i), std::abs(cmi - 1.0), std::abs(inter + 1.0)});
  report.Add("AC-8", kl.pass && xor_dev < 1e-12,
             Fmt("kl_identity_max_dev=%.2e xor=(%.3g, %.3g, %.3g) tolerance=1e-12", kl.worst, i,
                 cmi, inter),
             seconds + t.Seconds());
}

// ---- AC-4 ---------------------------------------------------------------

void CheckCritic(Report &report) {
  Timer t;
  AlignConfig config;
  config.critic_hidden = {64, 32, 32};
  config.critic_lr = 1e-3;
  const int n = 512, steps = 300;
  double worst_rel = 0.0, worst_same = 0.0;
  std::ostringstream detail;
  for (double shift : {0.5, 1.0}) {
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      std::mt19937_64 rng(seed * 100 + static_cast<uint64_t>(shift * 10));
      std::normal_distribution<double> nd(0.0, 0.5);
      Matrix a(n, 1), b(n, 1);
      for (int r = 0; r < n; ++r) {
        a[r] = shift + nd(rng);
        b[r] = nd(rng);
      }
      CriticState critic{InitCritic(1, config.critic_hidden, seed), {}};
      const double est = TrainCritic(critic, a, b, config, rng, steps);
      const double exact = ExactW1_1d(a.data(), b.data());
      worst_rel = std::max(worst_rel, std::abs(est - exact) / exact);
    }
  }
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 rng(seed + 900);
    std::normal_distribution<double> nd(0.0, 0.5);
    Matrix a(n, 1);
    for (double &v : a.data()) v = nd(rng);
    CriticState critic{InitCritic(1, config.critic_hidden, seed), {}};
    worst_same = std::max(worst_same, std::abs(TrainCritic(critic, a, a, config, rng, steps)));
  }
  report.Add("AC-4", worst_rel <= 0.2 && worst_same < 0.1,
             Fmt("max_rel_err_vs_exact_w1=%.3f (tolerance 0.2) max|identical|=%.3f "
                 "(tolerance 0.1)",
                 worst_rel, worst_same),
             t.Seconds());
}

// ---- AC-7 ---------------------------------------------------------------

void CheckViewFilter(Report &report) {
  Timer t;
  const int classes = 4, per_class = 100, views = 2, dim = 16;
  const int n = classes * per_class;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.4);
  std::vector<std::vector<double>> proto(classes, std::vector<double>(dim));
  for (auto &p : proto) {
    for (double &v : p) v = unit(rng) < 0.5 ? unit(rng) : 0.0;
  }
  auto draw = [&](int label) {
    std::vector<double> v(dim);
    double ss = 0.0;
    for (int k = 0; k < dim; ++k) {
      v[k] = std::max(0.0, proto[label][k] + noise(rng));
      ss += v[k] * v[k];
    }
    for (double &x : v) x /= std::sqrt(ss);
    return v;
  };
  std::vector<int> label(n);
  for (int i = 0; i < n; ++i) label[i] = i % classes;
  MemoryBank bank = MemoryBank::Create(n, views, dim, 5);
  auto refresh = [&] {
    for (int i = 0; i < n; ++i) {
      for (int v = 0; v < views; ++v) bank.Update(i, v, draw(label[i]));
    }
  };
  refresh();

  // Measured cluster geometry of the bank.
  double within = 0.0, cross = 0.0;
  int nw = 0, nc = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; j += 7) {
      const double c = CosineSimilarity(bank.Read(i, 0), bank.Read(j, 1));
      if (label[i] == label[j]) {
        within += c;
        ++nw;
      } else {
        cross += c;
        ++nc;
      }
    }
  }
  within /= nw;
  cross /= nc;

  PoolConfig config;
  config.negatives = 32;
  config.k_top = 1;
  SimilarityTracker tracker(config.eta);
  std::mt19937_64 pool_rng(78);
  int same = 0, total = 0;
  for (int epoch = 0; total < 1000; ++epoch) {
    for (int anchor = 0; anchor < n && total < 1000; ++anchor) {
      Matrix anchor_views(views, dim);
      for (int v = 0; v < views; ++v) {
        auto f = draw(label[anchor]);
        std::copy(f.begin(), f.end(), anchor_views.row(v).begin());
      }
      ContrastPools pools = BuildPools(anchor_views, bank, anchor, config, pool_rng);
      RecordPoolSimilarities(pools, tracker, epoch);
      for (const auto &e : ViewFilterTransfer(pools, tracker, config.k_top, epoch)) {
        same += label[e.negative_id / views] == label[anchor];
        ++total;
      }
    }
    refresh();
    tracker.Prune(epoch + 1);
  }
  const double precision = static_cast<double>(same) / total;
  const bool geometry_ok = within - cross >= 0.2;
  report.Add("AC-7", geometry_ok && precision >= 0.95,
             Fmt("same_class_rate=%.4f over %.0f transfers (tolerance >= 0.95); "
                 "within_cos=%.3f cross_cos=%.3f",
                 precision, total, within, cross),
             t.Seconds());
}

// ---- AC-5, AC-6, AC-9 -----------------------------------------------------

// What the view-subset criterion reuses from the ablation runs.
struct AblationRuns {
  std::vector<MultiViewDataset> datasets;
  std::vector<double> full_method;
};

AblationRuns CheckAblation(Report &report, int seeds) {
  ProbeConfig probe;
  Timer t5;
  std::vector<double> fp, fpda, sapda, random, vd_fp, vd_fpda;
  std::vector<MultiViewDataset> datasets;
  for (int s = 1; s <= seeds; ++s) {
    Timer ts;
    MultiViewDataset data = GenerateSynthetic(AblationData(s));
    random.push_back(RandomEncoderProbe(data, AblationConfig(Variant::kFp, s), probe));
    RunResult a = TrainAndEvaluate(data, AblationConfig(Variant::kFp, s), probe);
    RunResult b = TrainAndEvaluate(data, AblationConfig(Variant::kFpDa, s), probe);
    RunResult c = TrainAndEvaluate(data, AblationConfig(Variant::kSapDa, s), probe);
    fp.push_back(a.probe);
    fpda.push_back(b.probe);
    sapda.push_back(c.probe);
    vd_fp.push_back(a.view_disc);
    vd_fpda.push_back(b.view_disc);
    report.Note(Fmt("seed %.0f: random=%.4f fp=%.4f", s, random.back(), a.probe) +
                Fmt(" fp+da=%.4f sap+da=%.4f", b.probe, c.probe) +
                Fmt(" view_disc fp=%.4f fp+da=%.4f sap+da=%.4f", a.view_disc, b.view_disc,
                    c.view_disc) +
                Fmt(" (%.0fs)", ts.Seconds()));
    datasets.push_back(std::move(data));
  }
  const double m_fp = Median(fp), m_fpda = Median(fpda), m_sap = Median(sapda);
  const double m_rand = Median(random);
  const bool order = m_sap - m_fpda >= -0.005 && m_fpda - m_fp >= -0.005;
  const double margin = std::min({m_fp, m_fpda, m_sap}) - m_rand;
  report.Add("AC-5", order && margin >= 0.10,
             Fmt("median probe fp=%.4f fp+da=%.4f sap+da=%.4f random=%.4f", m_fp, m_fpda, m_sap,
                 m_rand) +
                 Fmt("; gaps sap+da-fp+da=%+.4f fp+da-fp=%+.4f (tolerance >= -0.005); "
                     "min margin over random=%.4f (tolerance >= 0.10)",
                     m_sap - m_fpda, m_fpda - m_fp, margin),
             t5.Seconds());

  const double drop = Median(vd_fp) - Median(vd_fpda);
  report.Add("AC-6", drop >= 0.10,
             Fmt("median view_disc fp=%.4f fp+da=%.4f drop=%.4f (tolerance >= 0.10)",
                 Median(vd_fp), Median(vd_fpda), drop),
             0.0);
  return {std::move(datasets), std::move(sapda)};
}

// View subsets, full method (alignment switches itself off for one view).
void CheckViewSubsets(Report &report, const AblationRuns &runs) {
  ProbeConfig probe;
  const int seeds = static_cast<int>(runs.datasets.size());
  const std::vector<double> &sapda = runs.full_method;
  const std::vector<MultiViewDataset> &datasets = runs.datasets;
  Timer t9;
  const std::vector<std::vector<int>> pairs = {{0, 1}, {0, 2}, {1, 2}};
  const std::vector<std::vector<int>> singles = {{0}, {1}, {2}};
  std::vector<std::vector<double>> pair_acc(pairs.size()), single_acc(singles.size());
  for (int s = 1; s <= seeds; ++s) {
    const MultiViewDataset &data = datasets[s - 1];
    std::string line = Fmt("seed %.0f: all=%.4f", s, sapda[s - 1]);
    for (size_t p = 0; p < pairs.size(); ++p) {
      MultiViewDataset sub = SelectViews(data, pairs[p]);
      pair_acc[p].push_back(TrainAndEvaluate(sub, AblationConfig(Variant::kSapDa, s), probe).probe);
      line += Fmt(" {%.0f,%.0f}=%.4f", pairs[p][0], pairs[p][1], pair_acc[p].back());
    }
    for (size_t v = 0; v < singles.size(); ++v) {
      MultiViewDataset sub = SelectViews(data, singles[v]);
      single_acc[v].push_back(
          TrainAndEvaluate(sub, AblationConfig(Variant::kSapDa, s), probe).probe);
      line += Fmt(" {%.0f}=%.4f", singles[v][0], single_acc[v].back());
    }
    report.Note(line);
  }
  double best_pair = 0.0, worst_pair = 1.0, best_single = 0.0;
  for (const auto &a : pair_acc) {
    best_pair = std::max(best_pair, Median(a));
    worst_pair = std::min(worst_pair, Median(a));
  }
  for (const auto &a : single_acc) best_single = std::max(best_single, Median(a));
  const double all = Median(sapda);
  report.Add("AC-9", all - best_pair >= -0.005 && worst_pair - best_single >= -0.005,
             Fmt("median probe 3 views=%.4f best pair=%.4f worst pair=%.4f best single=%.4f",
                 all, best_pair, worst_pair, best_single) +
                 Fmt("; gaps all-best_pair=%+.4f worst_pair-best_single=%+.4f "
                     "(tolerance >= -0.005)",
                     all - best_pair, worst_pair - best_single),
             t9.Seconds());
}

// ---- AC-10 --------------------------------------------------------------

void CheckDeterminism(Report &report) {
  Timer t;
  MultiViewDataset data = GenerateSynthetic(AblationData(11));
  TrainConfig config = AblationConfig(Variant::kSapDa, 11);
  config.epochs = 3;
  config.pools.start_epoch = 1;
  TrainingViews tv = TrainingSplit(data);
  auto dims = tv.view_dims();
  TrainState a = InitTrainState(config, dims, tv.samples());
  TrainState b = InitTrainState(config, dims, tv.samples());
  History ha = Fit(a, tv);
  History hb = Fit(b, tv);
  const bool history_same = ha.EpochCsv() == hb.EpochCsv() && ha.TransferCsv() == hb.TransferCsv();

  const auto data_bytes = SerializeDataset(data);
  const bool data_round = SerializeDataset(DeserializeDataset(data_bytes)) == data_bytes &&
                          DeserializeDataset(data_bytes) == data;
  const auto ckpt_bytes = SerializeCheckpoint(a);
  const TrainState back = DeserializeCheckpoint(ckpt_bytes);
  const bool ckpt_round = SerializeCheckpoint(back) == ckpt_bytes && back == a;

  // Resuming from a mid-run checkpoint ends in the same state.
  TrainState c = InitTrainState(config, dims, tv.samples());
  FitOptions stop;
  stop.stop_epoch = 1;
  Fit(c, tv, stop);
  TrainState resumed = DeserializeCheckpoint(SerializeCheckpoint(c));
  Fit(resumed, tv);
  const bool resume_same = resumed == a;

  report.Add("AC-10", history_same && data_round && ckpt_round && resume_same,
             std::string("history_identical=") + (history_same ? "yes" : "no") +
                 " dataset_roundtrip=" + (data_round ? "yes" : "no") +
                 " checkpoint_roundtrip=" + (ckpt_round ? "yes" : "no") +
                 " resume_identical=" + (resume_same ? "yes" : "no"),
             t.Seconds());
}

}  // namespace
}  // namespace ipmc

int main(int argc, char **argv) {
  CLI::App app("Acceptance criteria for the ipmc library");
  bool strict = false;
  bool quick = false;
  std::string log_path = "acceptance_report.txt";
  app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
  app.add_flag("--quick", quick, "Skip the training criteria (AC-5, AC-6, AC-9)");
  app.add_option("--report", log_path, "Where to copy the PASS/FAIL lines");
  CLI11_PARSE(app, argc, argv);

  std::ofstream log(log_path);
  if (!log) {
    std::cerr << "cannot write " << log_path << "\n";
    return 2;
  }
  ipmc::Report report(log);
  try {
    ipmc::Timer t;
    const auto checks = ipmc::RunSelfChecks(1, 100);
    const double self_seconds = t.Seconds();
    ipmc::CheckGradients(report, checks);
    ipmc::CheckLossIdentities(report, checks);
    ipmc::CheckCritic(report);
    ipmc::AblationRuns runs;
    if (!quick) runs = ipmc::CheckAblation(report, ipmc::kSeeds);
    ipmc::CheckViewFilter(report);
    ipmc::CheckInformation(report, checks, self_seconds);
    if (!quick) ipmc::CheckViewSubsets(report, runs);
    ipmc::CheckDeterminism(report);
  } catch (const std::exception &e) {
    std::cerr << "acceptance run aborted: " << e.what() << "\n";
    return 2;
  }
  return strict && !report.all_pass() ? 1 : 0;
}
