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

#include "reinformer/rollout.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "reinformer/errors.h"

namespace reinformer {

std::string RolloutModeName(RolloutMode mode) {
  switch (mode) {
    case RolloutMode::kReinformer: return "reinformer";
    case RolloutMode::kNaiveMax: return "naive";
    case RolloutMode::kDecisionTransformer: return "dt";
  }
  return "unknown";
}

RolloutMode ParseRolloutMode(const std::string& name) {
  if (name == "reinformer") return RolloutMode::kReinformer;
  if (name == "naive") return RolloutMode::kNaiveMax;
  if (name == "dt") return RolloutMode::kDecisionTransformer;
  throw ConfigError("unknown mode '" + name + "' (reinformer, naive or dt)");
}

double RolloutRecord::RemainingReturn(int64_t t) const {
  double before = 0.0;
  for (int64_t i = 0; i < t; ++i) before += steps[i].reward;
  return episode_return - before;
}

RolloutRecord Rollout(const ReinformerModel& model, Environment& env,
                      const DatasetStats& stats, const RolloutOptions& options,
                      uint64_t env_seed, uint64_t action_seed) {
  const ModelConfig& mc = model.config();
  if (env.state_dim() != mc.state_dim || env.action_kind() != mc.action_kind() ||
      env.action_dim() != mc.action_dim) {
    throw DimensionError("model and environment shapes disagree");
  }
  if (static_cast<int64_t>(stats.state_mean.size()) != mc.state_dim) {
    throw DimensionError("dataset stats do not match the model's state width");
  }
  std::optional<double> g0 = options.g0;
  if (options.mode == RolloutMode::kDecisionTransformer && !g0) {
    throw ConfigError("dt mode needs an explicit initial return g0");
  }
  if (options.mode == RolloutMode::kNaiveMax && !g0) g0 = stats.max_dataset_return;

  std::mt19937_64 rng(action_seed);
  std::vector<ContextStep> context;
  const size_t keep = static_cast<size_t>(mc.context - 1);
  RolloutRecord record;
  std::vector<double> observation = env.Reset(env_seed);
  double running = g0.value_or(0.0);
  for (int64_t t = 0; !env.done(); ++t) {
    const std::vector<double> state = stats.Normalize(observation);
    RolloutStep step;
    step.state = observation;
    if (options.mode == RolloutMode::kReinformer) {
      const double g = options.return_override
                           ? options.return_override({t, context, state})
                           : model.PredictReturn(context, state, t);
      step.predicted_g = g;
      step.conditioned_g = g;
    } else {
      step.conditioned_g = running;
    }
    step.action = model.PredictAction(context, state, t, step.conditioned_g,
                                      options.action_mode, &rng);
    EnvStep result = env.Step(step.action);
    step.reward = stats.reward_scale * result.reward + stats.reward_shift;
    running -= step.reward;
    record.episode_return += step.reward;

    context.push_back({state, step.conditioned_g, step.action, t});
    if (context.size() > keep) context.erase(context.begin());
    record.steps.push_back(std::move(step));
    observation = std::move(result.next_state);
  }
  record.success = env.succeeded();
  return record;
}

Evaluation Evaluate(const ReinformerModel& model, const Environment& env,
                    const DatasetStats& stats, const RolloutOptions& options,
                    int64_t n_episodes, uint64_t seed) {
  if (n_episodes < 1) throw ContractError("n_episodes must be at least 1");
  Evaluation out;
  std::unique_ptr<Environment> instance = env.Clone();
  for (int64_t i = 0; i < n_episodes; ++i) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(i)};
    uint32_t seeds[4];
    seq.generate(seeds, seeds + 4);
    const uint64_t env_seed = (uint64_t{seeds[0]} << 32) | seeds[1];
    const uint64_t action_seed = (uint64_t{seeds[2]} << 32) | seeds[3];
    out.records.push_back(
        Rollout(model, *instance, stats, options, env_seed, action_seed));
  }
  out.report = Summarize(out.records, stats, RolloutModeName(options.mode));
  return out;
}

EvalReport Summarize(const std::vector<RolloutRecord>& records,
                     const DatasetStats& stats, const std::string& mode) {
  EvalReport r;
  r.mode = mode;
  r.n_episodes = static_cast<int64_t>(records.size());
  if (records.empty()) return r;
  const double n = static_cast<double>(records.size());
  double successes = 0.0, length = 0.0;
  for (const RolloutRecord& rec : records) {
    r.mean_return += rec.episode_return / n;
    successes += rec.success ? 1.0 : 0.0;
    length += static_cast<double>(rec.length());
    for (const RolloutStep& s : rec.steps) {
      if (!s.predicted_g) continue;
      r.min_predicted_g = std::min(r.min_predicted_g.value_or(*s.predicted_g), *s.predicted_g);
      r.max_predicted_g = std::max(r.max_predicted_g.value_or(*s.predicted_g), *s.predicted_g);
    }
  }
  double var = 0.0;
  for (const RolloutRecord& rec : records) {
    var += (rec.episode_return - r.mean_return) * (rec.episode_return - r.mean_return);
  }
  r.std_return = std::sqrt(var / n);
  r.success_rate = successes / n;
  r.success_std = std::sqrt(r.success_rate * (1.0 - r.success_rate) / n);
  r.mean_length = length / n;
  const double span = stats.ref_max - stats.ref_min;
  r.normalized_score = span != 0.0 ? 100.0 * (r.mean_return - stats.ref_min) / span : 0.0;
  return r;
}

std::string ReportToJson(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = report.mode;
  j["n_episodes"] = report.n_episodes;
  j["mean_return"] = report.mean_return;
  j["std_return"] = report.std_return;
  j["success_rate"] = report.success_rate;
  j["success_std"] = report.success_std;
  j["normalized_score"] = report.normalized_score;
  j["mean_length"] = report.mean_length;
  j["min_predicted_g"] = report.min_predicted_g ? nlohmann::ordered_json(*report.min_predicted_g)
                                                : nlohmann::ordered_json(nullptr);
  j["max_predicted_g"] = report.max_predicted_g ? nlohmann::ordered_json(*report.max_predicted_g)
                                                : nlohmann::ordered_json(nullptr);
  return j.dump(2);
}

std::string FormatTraceCsv(const std::vector<RolloutRecord>& records) {
  std::string out = std::string(kTraceCsvHeader) + "\n";
  char buf[160];
  for (size_t e = 0; e < records.size(); ++e) {
    const RolloutRecord& rec = records[e];
    double remaining = rec.episode_return;
    for (int64_t t = 0; t < rec.length(); ++t) {
      const RolloutStep& s = rec.steps[t];
      std::string predicted;
      if (s.predicted_g) {
        std::snprintf(buf, sizeof(buf), "%.17g", *s.predicted_g);
        predicted = buf;
      }
      std::snprintf(buf, sizeof(buf), "%zu,%lld,%s,%.17g,%.17g,%.17g\n", e,
                    static_cast<long long>(t), predicted.c_str(), s.conditioned_g,
                    s.reward, remaining);
      out += buf;
      remaining -= s.reward;
    }
  }
  return out;
}

void WriteTraceCsv(const std::string& path,
                   const std::vector<RolloutRecord>& records) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw ContractError("cannot write trace " + path);
  out << FormatTraceCsv(records);
}

}  // namespace reinformer
