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

// Trajectories, returns-to-go, reward transforms, state normalisation and
// K-step context windows in <state, return, action> token order.

#ifndef REINFORMER_SEQ_DATA_H_
#define REINFORMER_SEQ_DATA_H_

#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace reinformer {

// Discrete actions are integer ids; continuous actions are real vectors.
using Action = std::variant<int64_t, std::vector<double>>;

enum class ActionKind { kDiscrete, kContinuous };

ActionKind KindOf(const Action& action);

struct Trajectory {
  std::vector<std::vector<double>> states;  // T + 1, last is terminal obs
  std::vector<Action> actions;              // T
  std::vector<double> rewards;              // T
  bool terminated = false;

  int64_t length() const { return static_cast<int64_t>(rewards.size()); }
  ActionKind action_kind() const;
  int64_t state_dim() const;
  // Width of continuous actions; 1 for discrete ids.
  int64_t action_width() const;
  // Throws ContractError on length mismatch, ragged vectors, mixed action
  // kinds, empty trajectories or non-finite entries.
  void Validate() const;
  double EpisodeReturn() const;

  bool operator==(const Trajectory&) const = default;
};

struct ReturnAugmentedTrajectory {
  Trajectory trajectory;
  std::vector<double> returns_to_go;  // T, undiscounted
};

using Dataset = std::vector<Trajectory>;

// g_t = r_t + g_{t+1}, g_{T-1} = r_{T-1}.
ReturnAugmentedTrajectory ComputeReturnsToGo(Trajectory trajectory);
std::vector<ReturnAugmentedTrajectory> ComputeReturnsToGo(const Dataset& data);

// r <- scale * r + shift. Returns-to-go must be recomputed afterwards.
Trajectory ApplyRewardTransform(Trajectory trajectory, double scale,
                                double shift);
Dataset ApplyRewardTransform(Dataset data, double scale, double shift);

// A fixed-shape slice of K timesteps ending at t, left padded. Padded slots
// are zero filled and have valid == 0.
struct TokenWindow {
  int64_t context = 0;
  int64_t state_dim = 0;
  ActionKind action_kind = ActionKind::kContinuous;
  int64_t action_width = 0;  // 1 for discrete
  std::vector<double> states;      // context * state_dim
  std::vector<double> returns;     // context
  std::vector<double> actions;     // context * action_width (continuous)
  std::vector<int64_t> action_ids;  // context (discrete)
  std::vector<int64_t> timesteps;  // absolute indices, 0 when padded
  std::vector<uint8_t> valid;      // context

  static TokenWindow Empty(int64_t context, int64_t state_dim,
                           ActionKind kind, int64_t action_width);
  int64_t ValidCount() const;
  void SetAction(int64_t slot, const Action& action);
};

// Covers timesteps max(0, t - K + 1) .. t. Throws ContractError when t is
// outside [0, T) or K < 2.
TokenWindow SampleWindow(const ReturnAugmentedTrajectory& trajectory,
                         int64_t t, int64_t context);

struct DatasetStats {
  std::vector<double> state_mean;
  std::vector<double> state_std;  // floored at kStdFloor
  double max_dataset_return = 0.0;  // max episode return
  double min_dataset_return = 0.0;  // min episode return
  double max_return_to_go = 0.0;
  double min_return_to_go = 0.0;
  double ref_min = 0.0;  // normalised-score reference bounds
  double ref_max = 1.0;
  // Transform already applied to the dataset rewards; evaluation maps raw
  // environment rewards through it so everything shares one unit.
  double reward_scale = 1.0;
  double reward_shift = 0.0;

  static constexpr double kStdFloor = 1e-6;

  std::vector<double> Normalize(std::span<const double> state) const;
};

// Per-dimension mean/std over every state (terminal observations included)
// and return bounds. Throws ContractError on an empty dataset.
DatasetStats ComputeStats(const Dataset& data);

// States replaced by (s - mean) / std.
std::pair<Dataset, DatasetStats> NormalizeStates(const Dataset& data);
Dataset NormalizeStates(const Dataset& data, const DatasetStats& stats);

}  // namespace reinformer

#endif  // REINFORMER_SEQ_DATA_H_
