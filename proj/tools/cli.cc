// Copyright 2026 The Reinformer-cpp Authors.
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

#include "cli.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "reinformer/checkpoint.h"
#include "reinformer/config.h"
#include "reinformer/dataset_io.h"
#include "reinformer/envs.h"
#include "reinformer/errors.h"
#include "reinformer/expectile.h"
#include "reinformer/grad_check.h"
#include "reinformer/rollout.h"
#include "reinformer/training.h"

namespace reinformer::cli {
namespace {

namespace fs = std::filesystem;

// Options shared by every command that resolves a RunConfig.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
  KeyValues flags;  // dedicated flags such as --m, --seed
};

void AddConfigArgs(CLI::App* app, ConfigArgs& args) {
  app->add_option("--config", args.file, "key = value config file");
  app->add_option("--set", args.sets, "override, key=value (repeatable)");
}

void AddFlag(CLI::App* app, const std::string& name, const std::string& key,
             ConfigArgs& args, const std::string& help) {
  app->add_option_function<std::string>(
      name, [&args, key](const std::string& v) { args.flags[key] = v; }, help);
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("cannot write " + path);
  out << text;
  if (!out) throw ContractError("failed writing " + path);
}

// `inferred_env` fills the env key when neither the file nor the flags set it.
RunConfig Resolve(const ConfigArgs& args, const std::string& inferred_env = "") {
  const KeyValues file = args.file.empty() ? KeyValues{} : LoadKeyValues(args.file);
  KeyValues cli;
  for (const std::string& s : args.sets) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    cli[s.substr(0, eq)] = s.substr(eq + 1);
  }
  for (const auto& [k, v] : args.flags) cli[k] = v;
  if (!inferred_env.empty() && !file.count("env") && !cli.count("env")) {
    cli["env"] = inferred_env;
  }
  RunConfig config = ResolveRunConfig(file, cli);
  config.Validate();
  return config;
}

std::unique_ptr<Environment> MakeEnv(const RunConfig& config) {
  if (config.env == "lineworld") return std::make_unique<LineWorld>();
  if (config.layout.empty()) return std::make_unique<GridMaze>();
  return std::make_unique<GridMaze>(ParseMazeLayout(ReadText(config.layout)));
}

std::string SidecarPath(const std::string& data_path, const std::string& suffix) {
  fs::path p(data_path);
  p.replace_extension(suffix);
  return p.string();
}

void EnsureDirectory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ContractError("cannot create output directory " + dir);
  }
}

void WriteManifest(const std::string& path, const std::string& command,
                   const RunConfig& config, const std::string& dataset_path) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = REINFORMER_VERSION;
  j["seed"] = config.seed;
  j["config_hash"] = HexDigest(Fingerprint(config.Serialize()));
  if (dataset_path.empty()) {
    j["dataset_hash"] = nullptr;
  } else {
    j["dataset"] = fs::path(dataset_path).filename().string();
    j["dataset_hash"] = HexDigest(FingerprintFile(dataset_path));
  }
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : config.ToKeyValues()) cfg[k] = v;
  j["config"] = cfg;
  WriteText(path, j.dump(2) + "\n");
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenArgs {
  ConfigArgs config;
  std::string out;
};

int GenData(const GenArgs& args, std::ostream& out) {
  const RunConfig config = Resolve(args.config);
  Dataset data;
  if (config.env == "maze") {
    StitchOptions opts;
    opts.noise = config.noise;
    opts.suffix_variants = config.suffix_variants;
    opts.seed = config.seed;
    const auto env = MakeEnv(config);
    data = GenStitchDataset(static_cast<const GridMaze&>(*env).layout(), config.copies, opts);
  } else {
    LineWorldDataOptions opts;
    opts.episodes = config.episodes_data;
    opts.seed = config.seed;
    data = GenLineWorldDataset({}, opts);
  }
  data = ApplyRewardTransform(std::move(data), config.reward_scale, config.reward_shift);
  DatasetStats stats = ComputeStats(data);
  stats.reward_scale = config.reward_scale;
  stats.reward_shift = config.reward_shift;

  SaveDataset(args.out, data);
  SaveStats(SidecarPath(args.out, ".stats.json"), stats);
  WriteManifest(SidecarPath(args.out, ".manifest.json"), "gen-data", config, args.out);
  out << "wrote " << data.size() << " trajectories to " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ConfigArgs config;
  std::string data;
  std::string stats;
  std::string out;
  std::string resume;
};

std::string EnvForDataset(const Dataset& data) {
  return data.front().action_kind() == ActionKind::kDiscrete ? "maze" : "lineworld";
}

DatasetStats StatsFor(const std::string& data_path, const std::string& explicit_path,
                      const Dataset& data, const RunConfig& config) {
  if (!explicit_path.empty()) return LoadStats(explicit_path);
  const std::string sidecar = SidecarPath(data_path, ".stats.json");
  if (fs::exists(sidecar)) return LoadStats(sidecar);
  DatasetStats stats = ComputeStats(data);
  stats.reward_scale = config.reward_scale;
  stats.reward_shift = config.reward_shift;
  return stats;
}

struct TrainedModel {
  ReinformerModel model;
  std::vector<MetricRow> metrics;
};

// Trains from a fresh model. Writes checkpoints into `dir` when non-empty.
// Throws NumericError after saving the metric rows produced so far.
TrainedModel TrainModel(const RunConfig& config, const Dataset& normalized,
                        const DatasetStats& stats, const Environment& env,
                        const std::string& dir, const std::string& resume,
                        std::ostream& log) {
  ReinformerModel model(ModelConfigFor(config, env), config.seed);
  Trainer trainer(model, normalized, config.train);
  std::vector<MetricRow> rows;
  const std::string metrics_path = dir.empty() ? "" : (fs::path(dir) / "metrics.csv").string();
  if (!resume.empty()) {
    const Checkpoint ckpt = LoadCheckpoint(resume);
    if (ckpt.config != model.config()) {
      throw ConfigError("checkpoint " + resume + " was trained with a different model config");
    }
    trainer.Restore(ckpt);
    if (!metrics_path.empty() && fs::exists(metrics_path)) {
      for (const MetricRow& r : ReadMetricsCsv(metrics_path)) {
        if (r.step <= trainer.step()) rows.push_back(r);
      }
    }
    log << "resumed from " << resume << " at step " << trainer.step() << "\n";
  }
  auto save = [&](const std::string& name) {
    Checkpoint ckpt = trainer.MakeCheckpoint();
    PutStats(ckpt, stats);
    const std::string path = (fs::path(dir) / name).string();
    SaveCheckpoint(path, ckpt);
    return path;
  };
  std::string last_good;
  const int64_t total = config.train.steps;
  while (trainer.step() < total) {
    try {
      rows.push_back(trainer.Step());
    } catch (const NumericError&) {
      if (!metrics_path.empty()) WriteMetricsCsv(metrics_path, rows);
      log << "aborted: non-finite loss at step " << trainer.step() + 1
          << (last_good.empty() ? "" : "; last good checkpoint " + last_good) << "\n";
      throw;
    }
    const int64_t step = trainer.step();
    if (step % config.train.eval_interval == 0 || step == total) {
      const MetricRow& r = rows.back();
      char buf[200];
      std::snprintf(buf, sizeof(buf),
                    "step %lld/%lld total %.5f return %.5f action %.5f lambda %.4f entropy %.4f\n",
                    static_cast<long long>(step), static_cast<long long>(total),
                    r.total_loss, r.return_loss, r.action_loss, r.lambda, r.entropy);
      log << buf;
      if (!dir.empty()) {
        last_good = save("checkpoint_" + std::to_string(step) + ".rfmr");
        WriteMetricsCsv(metrics_path, rows);
      }
    }
  }
  if (!dir.empty()) {
    save("model.rfmr");
    WriteMetricsCsv(metrics_path, rows);
  }
  return {std::move(model), std::move(rows)};
}

int Train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  const Dataset raw = LoadDataset(args.data);
  const RunConfig config = Resolve(args.config, EnvForDataset(raw));
  const auto env = MakeEnv(config);
  const DatasetStats stats = StatsFor(args.data, args.stats, raw, config);
  if (raw.front().state_dim() != env->state_dim()) {
    throw DimensionError("dataset states have width " + std::to_string(raw.front().state_dim()) +
                         " but env " + config.env + " expects " +
                         std::to_string(env->state_dim()));
  }
  const Dataset normalized = NormalizeStates(raw, stats);
  EnsureDirectory(args.out);
  WriteText((fs::path(args.out) / "config.txt").string(), config.Serialize());
  WriteManifest((fs::path(args.out) / "manifest.json").string(), "train", config, args.data);
  TrainModel(config, normalized, stats, *env, args.out, args.resume, err);
  out << "wrote " << (fs::path(args.out) / "model.rfmr").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  ConfigArgs config;
  std::string ckpt;
  std::string stats;
  std::string trace;
  std::string out;
};

int Eval(const EvalArgs& args, std::ostream& out) {
  const Checkpoint ckpt = LoadCheckpoint(args.ckpt);
  const RunConfig config = Resolve(
      args.config,
      ckpt.config.action_head == ActionHeadKind::kCategorical ? "maze" : "lineworld");
  const auto env = MakeEnv(config);
  std::optional<DatasetStats> stats =
      args.stats.empty() ? GetStats(ckpt) : std::optional(LoadStats(args.stats));
  if (!stats) throw ConfigError("checkpoint carries no dataset stats; pass --stats");
  RolloutOptions opts;
  opts.mode = ParseRolloutMode(config.mode);
  opts.g0 = config.g0;
  if (opts.mode == RolloutMode::kDecisionTransformer && !opts.g0) {
    throw ConfigError("mode dt needs --g0 (the initial return-to-go)");
  }
  const ReinformerModel model = ModelFromCheckpoint(ckpt);
  const Evaluation ev = Evaluate(model, *env, *stats, opts, config.episodes, config.seed);
  const std::string report = ReportToJson(ev.report);
  out << report << "\n";
  if (!args.trace.empty()) WriteTraceCsv(args.trace, ev.records);
  if (!args.out.empty()) {
    EnsureDirectory(args.out);
    WriteText((fs::path(args.out) / "report.json").string(), report + "\n");
    WriteManifest((fs::path(args.out) / "manifest.json").string(), "eval", config, "");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate-m

struct AblateArgs {
  ConfigArgs config;
  std::string data;
  std::string stats;
  std::string m_list = "0.5,0.7,0.9,0.99,0.999";
  std::string out;
};

std::vector<double> ParseList(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--m-list entry '" + item + "' is not a number");
    }
  }
  if (values.empty()) throw ConfigError("--m-list is empty");
  return values;
}

int Ablate(const AblateArgs& args, std::ostream& out, std::ostream& err) {
  const Dataset raw = LoadDataset(args.data);
  const RunConfig base = Resolve(args.config, EnvForDataset(raw));
  const std::vector<double> ms = ParseList(args.m_list);
  for (double m : ms) ExpectileConfig{m}.Validate();
  const auto env = MakeEnv(base);
  const DatasetStats stats = StatsFor(args.data, args.stats, raw, base);
  const Dataset normalized = NormalizeStates(raw, stats);
  EnsureDirectory(args.out);
  WriteManifest((fs::path(args.out) / "manifest.json").string(), "ablate-m", base, args.data);

  const double range = stats.max_dataset_return - stats.min_dataset_return;
  std::string csv = "m,success,mean_return,final_return_loss,initial_predicted_g,"
                    "max_predicted_g,overshoot\n";
  for (double m : ms) {
    RunConfig config = base;
    config.train.m = m;
    err << "m = " << m << "\n";
    TrainedModel trained = TrainModel(config, normalized, stats, *env, "", "", err);
    WriteMetricsCsv((fs::path(args.out) / ("metrics_m" + Num(m) + ".csv")).string(),
                    trained.metrics);
    const Evaluation ev = Evaluate(trained.model, *env, stats, {}, config.episodes, config.seed);
    double initial = 0.0;
    for (const RolloutRecord& r : ev.records) {
      initial += *r.steps.front().predicted_g / static_cast<double>(ev.records.size());
    }
    const double max_g = ev.report.max_predicted_g.value_or(initial);
    const bool overshoot = max_g > stats.max_dataset_return + 0.1 * range;
    if (overshoot) {
      err << "warning: m = " << m << " predicts " << max_g
          << ", more than 10% of the return range above the dataset max\n";
    }
    csv += Num(m) + "," + Num(ev.report.success_rate) + "," + Num(ev.report.mean_return) + "," +
           Num(trained.metrics.back().return_loss) + "," + Num(initial) + "," + Num(max_g) +
           "," + (overshoot ? "1" : "0") + "\n";
  }
  const std::string path = (fs::path(args.out) / "ablation.csv").string();
  WriteText(path, csv);
  out << csv;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

int GradCheckCommand(uint64_t seed, int points, std::ostream& out, std::ostream& err) {
  const auto results = RunGradCheckSuite(StandardGradCheckCases(), seed, points);
  const GradCheckResult* worst = nullptr;
  std::vector<std::string> failing;
  char buf[160];
  for (const GradCheckResult& r : results) {
    std::snprintf(buf, sizeof(buf), "%-32s %.3e %s\n", r.name.c_str(), r.max_error,
                  r.passed ? "ok" : "FAIL");
    out << buf;
    if (!worst || r.max_error > worst->max_error) worst = &r;
    if (!r.passed) failing.push_back(r.name);
  }
  if (worst) {
    std::snprintf(buf, sizeof(buf), "worst relative error %.3e (%s)\n", worst->max_error,
                  worst->name.c_str());
    out << buf;
  }
  if (!failing.empty()) {
    err << "gradcheck failed for:";
    for (const std::string& name : failing) err << " " << name;
    err << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Max-return sequence modelling for offline RL"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate an offline dataset");
  AddConfigArgs(gen_cmd, gen.config);
  gen_cmd->add_option("--out", gen.out, "dataset path (.jsonl)")->required();
  AddFlag(gen_cmd, "--env", "env", gen.config, "maze or lineworld");
  AddFlag(gen_cmd, "--copies", "copies", gen.config, "maze: copies of each trajectory");
  AddFlag(gen_cmd, "--episodes", "episodes_data", gen.config, "lineworld: episodes");
  AddFlag(gen_cmd, "--seed", "seed", gen.config, "random seed");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  AddConfigArgs(train_cmd, train.config);
  train_cmd->add_option("--data", train.data, "dataset path")->required();
  train_cmd->add_option("--stats", train.stats, "stats sidecar (default: next to data)");
  train_cmd->add_option("--out", train.out, "run directory")->required();
  train_cmd->add_option("--resume", train.resume, "checkpoint to resume from");
  AddFlag(train_cmd, "--env", "env", train.config, "maze or lineworld");
  AddFlag(train_cmd, "--m", "m", train.config, "expectile level");
  AddFlag(train_cmd, "--steps", "steps", train.config, "training steps");
  AddFlag(train_cmd, "--lr", "lr", train.config, "learning rate");
  AddFlag(train_cmd, "--seed", "seed", train.config, "random seed");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  AddConfigArgs(eval_cmd, eval.config);
  eval_cmd->add_option("--ckpt", eval.ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--stats", eval.stats, "stats JSON (default: from checkpoint)");
  eval_cmd->add_option("--trace", eval.trace, "per-step trace CSV path");
  eval_cmd->add_option("--out", eval.out, "directory for report.json and manifest.json");
  AddFlag(eval_cmd, "--env", "env", eval.config, "maze or lineworld");
  AddFlag(eval_cmd, "--mode", "mode", eval.config, "reinformer, naive or dt");
  AddFlag(eval_cmd, "--episodes", "episodes", eval.config, "evaluation episodes");
  AddFlag(eval_cmd, "--g0", "g0", eval.config, "initial return for naive and dt modes");
  AddFlag(eval_cmd, "--seed", "seed", eval.config, "random seed");

  AblateArgs ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate-m", "sweep the expectile level m");
  AddConfigArgs(ablate_cmd, ablate.config);
  ablate_cmd->add_option("--data", ablate.data, "dataset path")->required();
  ablate_cmd->add_option("--stats", ablate.stats, "stats sidecar (default: next to data)");
  ablate_cmd->add_option("--m-list", ablate.m_list, "comma-separated m values");
  ablate_cmd->add_option("--out", ablate.out, "output directory")->required();
  AddFlag(ablate_cmd, "--steps", "steps", ablate.config, "training steps per model");
  AddFlag(ablate_cmd, "--episodes", "episodes", ablate.config, "evaluation episodes");
  AddFlag(ablate_cmd, "--seed", "seed", ablate.config, "random seed");

  uint64_t gc_seed = 0;
  int gc_points = 10;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc_cmd->add_option("--seed", gc_seed, "random seed");
  gc_cmd->add_option("--points", gc_points, "probe points per op")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return GenData(gen, out);
    if (*train_cmd) return Train(train, out, err);
    if (*eval_cmd) return Eval(eval, out);
    if (*ablate_cmd) return Ablate(ablate, out, err);
    if (*gc_cmd) return GradCheckCommand(gc_seed, gc_points, out, err);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace reinformer::cli
