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

#include "ipmc/cli.h"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ipmc/binary_io.h"
#include "ipmc/csv.h"
#include "ipmc/dataset.h"
#include "ipmc/errors.h"
#include "ipmc/eval.h"
#include "ipmc/experiment.h"
#include "ipmc/info.h"
#include "ipmc/selfcheck.h"
#include "ipmc/trainer.h"
#include "json.hpp"

namespace ipmc {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string ReadText(const std::string &path) {
  auto bytes = ReadFileBytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void WriteText(const std::string &path, const std::string &text) {
  WriteFileBytes(path, std::span<const uint8_t>(
                           reinterpret_cast<const uint8_t *>(text.data()), text.size()));
}

std::string Join(const fs::path &dir, const std::string &name) { return (dir / name).string(); }

void MakeDirectory(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

// Config text with command-line overrides applied before variant
// resolution, so --variant can re-enable what the file's variant forced off.
TrainConfig LoadTrainConfig(const std::string &path, std::optional<uint64_t> seed,
                            const std::string &variant) {
  json j = json::object();
  if (!path.empty()) {
    try {
      j = json::parse(ReadText(path));
    } catch (const json::parse_error &e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
  }
  if (seed) j["seed"] = *seed;
  if (!variant.empty()) j["variant"] = variant;
  return ParseTrainConfig(j.dump());
}

struct Options {
  std::string out, data, config, checkpoint, joint, kind = "synthetic", export_2d, measure;
  std::string variant;
  std::optional<uint64_t> seed;
  std::vector<std::string> vars;
  std::vector<double> epsilons;
  int k = 5;
  int probe_epochs = ProbeConfig{}.epochs;
  SyntheticConfig synthetic;
  ImageConfig image;
};

int GenData(const Options &o, std::ostream &out) {
  MultiViewDataset data;
  json record;
  if (o.kind == "synthetic") {
    SyntheticConfig c = o.synthetic;
    if (o.seed) c.seed = *o.seed;
    data = GenerateSynthetic(c);
    record = {{"kind", "synthetic"},          {"classes", c.classes},
              {"per_class", c.per_class},     {"latent_dim", c.latent_dim},
              {"views", c.views},             {"view_dim", c.view_dim},
              {"class_separation", c.class_separation},
              {"noise_scale", c.noise_scale}, {"nuisance_rank", c.nuisance_rank},
              {"test_fraction", c.test_fraction}, {"seed", c.seed}};
  } else {
    ImageConfig c = o.image;
    if (o.seed) c.seed = *o.seed;
    data = GenerateChannelDataset(c);
    record = {{"kind", "channels"},   {"classes", c.classes}, {"per_class", c.per_class},
              {"side", c.side},       {"noise", c.noise},     {"test_fraction", c.test_fraction},
              {"seed", c.seed}};
  }
  WriteDataset(data, o.out);
  WriteText(o.out + ".config.json", record.dump(2) + "\n");
  out << json{{"dataset", o.out}, {"samples", data.samples()}, {"views", data.view_dims()}}.dump()
      << "\n";
  return kExitOk;
}

int Train(const Options &o, std::ostream &out) {
  TrainConfig config = LoadTrainConfig(o.config, o.seed, o.variant);
  MultiViewDataset data = ReadDataset(o.data);
  data.Validate();
  MakeDirectory(o.out);
  const fs::path dir(o.out);
  WriteText(Join(dir, "config.json"), TrainConfigToJson(config));
  TrainingViews train = TrainingSplit(data);
  TrainState state = InitTrainState(config, train.view_dims(), train.samples());
  FitOptions fit;
  fit.failure_checkpoint = Join(dir, "failure_checkpoint.bin");
  History history = Fit(state, train, fit);
  WriteCheckpoint(state, Join(dir, "checkpoint.bin"));
  WriteText(Join(dir, "history.csv"), history.EpochCsv());
  WriteText(Join(dir, "transfers.csv"), history.TransferCsv());
  json summary = {{"out", o.out}, {"epochs", static_cast<int>(history.epochs.size())}};
  if (!history.epochs.empty()) {
    summary["final_loss_total"] = history.epochs.back().loss_total;
    summary["final_loss_unisap"] = history.epochs.back().loss_unisap;
  }
  out << summary.dump() << "\n";
  return kExitOk;
}

ProbeConfig MakeProbeConfig(const Options &o) {
  ProbeConfig p;
  p.epochs = o.probe_epochs;
  if (o.seed) p.seed = *o.seed;
  return p;
}

void MaybeWriteResult(const Options &o, const std::string &name, const json &result) {
  if (o.out.empty()) return;
  MakeDirectory(o.out);
  WriteText(Join(fs::path(o.out), name), result.dump(2) + "\n");
}

int RunProbe(const Options &o, std::ostream &out) {
  TrainState state = ReadCheckpoint(o.checkpoint);
  MultiViewDataset data = ReadDataset(o.data);
  ProbeConfig p = MakeProbeConfig(o);
  json result = {{"accuracy", ProbeEncoder(state.encoder, data, p)},
                 {"probe", {{"epochs", p.epochs}, {"lr", p.lr}, {"batch", p.batch},
                            {"seed", p.seed}}}};
  if (!o.export_2d.empty()) {
    std::vector<int> rows(data.samples());
    for (int i = 0; i < data.samples(); ++i) rows[i] = i;
    Embedding2d e = ExportEmbedding2d(ConcatRepresentations(EmbedViews(state.encoder, data, rows)));
    WriteText(o.export_2d, Embedding2dCsv(e, data.labels));
    result["export_2d"] = o.export_2d;
  }
  MaybeWriteResult(o, "probe.json", result);
  out << result.dump() << "\n";
  return kExitOk;
}

int Knn(const Options &o, std::ostream &out) {
  TrainState state = ReadCheckpoint(o.checkpoint);
  MultiViewDataset data = ReadDataset(o.data);
  json result = {{"k", o.k}, {"precision_at_k", KnnPrecision(state.encoder, data, o.k)}};
  MaybeWriteResult(o, "knn.json", result);
  out << result.dump() << "\n";
  return kExitOk;
}

int RunViewAudit(const Options &o, std::ostream &out) {
  TrainState state = ReadCheckpoint(o.checkpoint);
  MultiViewDataset data = ReadDataset(o.data);
  if (data.view_count() < 2) throw ConfigError("view audit needs at least two views");
  auto rows = SplitIndices(data, true);
  ProbeConfig p = MakeProbeConfig(o);
  json result = {
      {"view_discriminability", ViewDiscriminability(EmbedViews(state.encoder, data, rows), p)},
      {"chance", 1.0 / data.view_count()}};
  MaybeWriteResult(o, "view_audit.json", result);
  out << result.dump() << "\n";
  return kExitOk;
}

void RequireVars(const Options &o, size_t n, const std::string &what) {
  if (o.vars.size() != n) {
    throw ConfigError(o.measure + " takes " + std::to_string(n) + " variables (" + what + ")");
  }
}

int MiAudit(const Options &o, std::ostream &out) {
  DiscreteJoint joint = ParseJointCsv(ReadText(o.joint));
  json result = {{"measure", o.measure}, {"vars", o.vars}};
  if (o.measure == "KL") {
    RequireVars(o, 2, "A,B");
    VarSet a{o.vars[0]}, b{o.vars[1]};
    result["mutual_information"] = MutualInformation(joint, a, b);
    result["kl_from_product"] = KlFromProduct(joint, a, b);
    result["deviation"] = KlIdentityDeviation(joint, a, b);
  } else if (o.measure == "definition1") {
    RequireVars(o, 4, "Y,X,V1,V2");
    Definition1Report r = Definition1(joint, o.vars[0], o.vars[1], o.vars[2], o.vars[3]);
    result["y_x_given_views"] = r.y_x_given_views;
    result["y_v1_given_rest"] = r.y_v1_given_rest;
    result["y_v2_given_rest"] = r.y_v2_given_rest;
    result["shared"] = r.shared;
    result["entropy_y"] = r.entropy_y;
    result["residual_y"] = r.residual_y;
    result["common"] = r.common;
  } else if (o.measure == "assumption1") {
    if (o.vars.size() < 3) throw ConfigError("assumption1 takes X,T,V1[,V2...]");
    VarSet views(o.vars.begin() + 2, o.vars.end());
    std::vector<double> eps = o.epsilons;
    if (eps.size() == 1) eps.assign(views.size(), eps.front());
    Assumption1Report r = Assumption1Audit(joint, o.vars[0], o.vars[1], views, eps);
    json per_view = json::array();
    for (const auto &v : r.views) {
      per_view.push_back(
          {{"view", v.view}, {"residual", v.residual}, {"bound", v.bound}, {"pass", v.pass}});
    }
    result["views"] = per_view;
    result["residual_all"] = r.residual_all;
    result["task_information"] = r.task_information;
  } else {
    VarSet vars(o.vars.begin(), o.vars.end());
    result["bits"] = InfoMeasure(joint, ParseInfoKind(o.measure), vars);
  }
  MaybeWriteResult(o, "mi_audit.json", result);
  out << result.dump() << "\n";
  return kExitOk;
}

int Ablate(const Options &o, std::ostream &out) {
  TrainConfig config = LoadTrainConfig(o.config, o.seed, "");
  MultiViewDataset data = ReadDataset(o.data);
  auto rows = RunAblation(data, config, MakeProbeConfig(o));
  std::string csv = AblationCsv(rows);
  if (!o.out.empty()) {
    MakeDirectory(o.out);
    WriteText(Join(fs::path(o.out), "config.json"), TrainConfigToJson(config));
    WriteText(Join(fs::path(o.out), "ablation.csv"), csv);
  }
  out << csv;
  return kExitOk;
}

int Check(const Options &o, std::ostream &out) {
  bool all = true;
  for (const auto &r : RunSelfChecks(o.seed ? static_cast<unsigned>(*o.seed) : 1u)) {
    out << r.name << " " << (r.pass ? "pass" : "FAIL") << " worst=" << FormatReal(r.worst)
        << " tolerance=" << FormatReal(r.tolerance) << "\n";
    all = all && r.pass;
  }
  return all ? kExitOk : kExitRuntime;
}

int ReportError(std::ostream &err, const std::string &kind, const std::string &message,
                int code) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}}.dump()
      << "\n";
  return code;
}

}  // namespace

int ThreadsFromEnvironment() {
  const char *raw = std::getenv("IPMC_THREADS");
  if (raw == nullptr) return 1;
  std::string_view text(raw);
  int value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || value < 1) {
    throw ConfigError("IPMC_THREADS must be a positive integer, got '" + std::string(text) + "'");
  }
  return value;
}

int RunCli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Options o;
  CLI::App app{"Multi-view contrastive representation learning toolkit", "ipmc"};
  app.require_subcommand(1);
  auto seed_flag = [&](CLI::App *sub) {
    sub->add_option_function<uint64_t>("--seed", [&](const uint64_t &s) { o.seed = s; },
                                       "Random seed (overrides the config)");
  };

  CLI::App *gen = app.add_subcommand("gen-data", "Generate a multi-view dataset");
  gen->add_option("--out", o.out, "Dataset file to write")->required();
  gen->add_option("--kind", o.kind, "synthetic or channels")
      ->check(CLI::IsMember({"synthetic", "channels"}));
  gen->add_option("--classes", o.synthetic.classes);
  gen->add_option("--per-class", o.synthetic.per_class);
  gen->add_option("--latent-dim", o.synthetic.latent_dim);
  gen->add_option("--views", o.synthetic.views);
  gen->add_option("--view-dim", o.synthetic.view_dim);
  gen->add_option("--separation", o.synthetic.class_separation);
  gen->add_option("--noise", o.synthetic.noise_scale);
  gen->add_option("--nuisance-rank", o.synthetic.nuisance_rank);
  gen->add_option("--test-fraction", o.synthetic.test_fraction);
  gen->add_option("--side", o.image.side, "Image side (channels)");
  seed_flag(gen);

  CLI::App *train = app.add_subcommand("train", "Train encoders from a JSON config");
  train->add_option("--config", o.config, "JSON config")->check(CLI::ExistingFile);
  train->add_option("--data", o.data, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--variant", o.variant, "fp, fp+da or sap+da")
      ->check(CLI::IsMember({"fp", "fp+da", "sap+da"}));
  seed_flag(train);

  auto eval_flags = [&](CLI::App *sub) {
    sub->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
    sub->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Directory for the JSON result");
    sub->add_option("--probe-epochs", o.probe_epochs)->check(CLI::PositiveNumber);
    seed_flag(sub);
  };
  CLI::App *probe = app.add_subcommand("probe", "Linear probe on frozen embeddings");
  eval_flags(probe);
  probe->add_option("--export-2d", o.export_2d, "CSV path for a 2-D PCA projection");
  CLI::App *knn = app.add_subcommand("knn", "L1 nearest-neighbour retrieval precision");
  eval_flags(knn);
  knn->add_option("--k", o.k)->check(CLI::PositiveNumber);
  CLI::App *audit = app.add_subcommand("view-audit", "How well views can be told apart");
  eval_flags(audit);

  CLI::App *mi = app.add_subcommand("mi-audit", "Information measures on a discrete joint");
  mi->add_option("--joint", o.joint, "Joint table CSV")->required()->check(CLI::ExistingFile);
  mi->add_option("--measure", o.measure)
      ->required()
      ->check(CLI::IsMember({"H", "I", "CMI", "CMI2", "INT", "KL", "definition1", "assumption1"}));
  mi->add_option("--vars", o.vars, "Comma-separated variable names")->required()->delimiter(',');
  mi->add_option("--epsilon", o.epsilons, "Per-view bounds (assumption1)")->delimiter(',');
  mi->add_option("--out", o.out, "Directory for the JSON result");

  CLI::App *ablate = app.add_subcommand("ablate", "Train fp, fp+da and sap+da and compare");
  ablate->add_option("--config", o.config)->check(CLI::ExistingFile);
  ablate->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", o.out, "Output directory");
  ablate->add_option("--probe-epochs", o.probe_epochs)->check(CLI::PositiveNumber);
  seed_flag(ablate);

  CLI::App *check = app.add_subcommand("check", "Gradient and identity self-checks");
  seed_flag(check);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    return ReportError(err, "usage", e.what(), kExitUsage);
  }

  try {
    ThreadsFromEnvironment();
    if (gen->parsed()) {
      if (gen->count("--classes")) o.image.classes = o.synthetic.classes;
      if (gen->count("--per-class")) o.image.per_class = o.synthetic.per_class;
      if (gen->count("--test-fraction")) o.image.test_fraction = o.synthetic.test_fraction;
      return GenData(o, out);
    }
    if (train->parsed()) return Train(o, out);
    if (probe->parsed()) return RunProbe(o, out);
    if (knn->parsed()) return Knn(o, out);
    if (audit->parsed()) return RunViewAudit(o, out);
    if (mi->parsed()) return MiAudit(o, out);
    if (ablate->parsed()) return Ablate(o, out);
    if (check->parsed()) return Check(o, out);
  } catch (const ConfigError &e) {
    return ReportError(err, e.kind(), e.what(), kExitUsage);
  } catch (const Error &e) {
    return ReportError(err, e.kind(), e.what(), kExitRuntime);
  } catch (const std::exception &e) {
    return ReportError(err, "internal", e.what(), kExitRuntime);
  }
  return ReportError(err, "usage", "no subcommand", kExitUsage);
}

}  // namespace ipmc
