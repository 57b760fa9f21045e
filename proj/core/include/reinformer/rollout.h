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


// Inference pipelines and evaluation.
//
// kReinformer predicts the maximum in-distribution return at every step and
// conditions the action on it; environment rewards never reach the model.
// kNaiveMax and kDecisionTransformer condition on a fixed initial return that
// is decremented by each observed reward. They differ only in where g0 comes
// from (the dataset maximum vs. a user value).

#ifndef REINFORMER_ROLLOUT_H_
#define REINFORMER_ROLLOUT_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reinformer/envs.h"
#include "reinformer/model.h"
#include "reinformer/seq_data.h"

namespace reinformer {

enum class RolloutMode { kReinformer, kNaiveMax, kDecisionTransformer };

std::string RolloutModeName(RolloutMode mode);
// "reinformer", "naive" or "dt". Throws ConfigError.
RolloutMode ParseRolloutMode(const std::string& name);

struct RolloutStep {
  std::vector<double> state;  // raw environment observation
  std::optional<double> predicted_g;  // return head output, reinformer mode
  double conditioned_g = 0.0;         // value fed to the action head
  Action action;
  double reward = 0.0;  // in dataset units (after the reward transform)
};

struct RolloutRecord {
  std::vector<RolloutStep> steps;
  double episode_return = 0.0;
  bool success = false;
  int64_t length() const { return static_cast<int64_t>(steps.size()); }
  // Episode return minus the rewards before step t.
  double RemainingReturn(int64_t t) const;
};

// What a return override sees before acting at step t.
struct ReturnQuery {
  int64_t t = 0;
  std::span<const ContextStep> context;
  std::span<const double> state;  // normalised
};
using ReturnOverride = std::function<double(const ReturnQuery&)>;

struct RolloutOptions {
  RolloutMode mode = RolloutMode::kReinformer;
  // Initial return for the decrementing modes. Defaults to the dataset's
  // maximum episode return in naive mode; required in dt mode.
  std::optional<double> g0;
  ActionMode action_mode = ActionMode::kGreedy;
  // Replaces the return head in reinformer mode (used for plumbing tests).
  ReturnOverride return_override;
};

// Runs one episode. `env_seed` seeds Reset, `action_seed` seeds sampling.
// Throws ConfigError for dt mode without g0 and DimensionError when the
// model and environment disagree.
RolloutRecord Rollout(const ReinformerModel& model, Environment& env,
                      const DatasetStats& stats, const RolloutOptions& options,
                      uint64_t env_seed = 0, uint64_t action_seed = 0);

struct EvalReport {
  std::string mode;
  int64_t n_episodes = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double success_rate = 0.0;
  double success_std = 0.0;  // binomial, sqrt(p (1 - p) / n)
  double normalized_score = 0.0;
  double mean_length = 0.0;
  // Range of the return head's predictions over all steps (reinformer mode).
  std::optional<double> min_predicted_g;
  std::optional<double> max_predicted_g;
};

struct Evaluation {
  EvalReport report;
  std::vector<RolloutRecord> records;
};

// Episode i uses seeds derived from (seed, i); records are in episode order.
Evaluation Evaluate(const ReinformerModel& model, const Environment& env,
                    const DatasetStats& stats, const RolloutOptions& options,
                    int64_t n_episodes, uint64_t seed);

EvalReport Summarize(const std::vector<RolloutRecord>& records,
                     const DatasetStats& stats, const std::string& mode);

std::string ReportToJson(const EvalReport& report);

inline constexpr const char* kTraceCsvHeader =
    "episode,t,predicted_g,conditioned_g,reward,remaining_true_return";
// predicted_g is left empty when the mode has no return prediction.
std::string FormatTraceCsv(const std::vector<RolloutRecord>& records);
void WriteTraceCsv(const std::string& path,
                   const std::vector<RolloutRecord>& records);

}  // namespace reinformer

#endif  // REINFORMER_ROLLOUT_H_
