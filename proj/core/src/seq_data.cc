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

#include "reinformer/seq_data.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "reinformer/errors.h"

namespace reinformer {

ActionKind KindOf(const Action& action) {
  return std::holds_alternative<int64_t>(action) ? ActionKind::kDiscrete
                                                 : ActionKind::kContinuous;
}

ActionKind Trajectory::action_kind() const {
  if (actions.empty()) throw ContractError("empty trajectory has no actions");
  return KindOf(actions.front());
}

int64_t Trajectory::state_dim() const {
  if (states.empty()) throw ContractError("trajectory has no states");
  return static_cast<int64_t>(states.front().size());
}

int64_t Trajectory::action_width() const {
  if (action_kind() == ActionKind::kDiscrete) return 1;
  return static_cast<int64_t>(std::get<std::vector<double>>(actions.front()).size());
}

void Trajectory::Validate() const {
  if (rewards.empty()) throw ContractError("empty trajectory");
  if (actions.size() != rewards.size() || states.size() != rewards.size() + 1) {
    throw ContractError("trajectory lengths disagree: " +
                        std::to_string(states.size()) + " states, " +
                        std::to_string(actions.size()) + " actions, " +
                        std::to_string(rewards.size()) + " rewards");
  }
  const size_t sd = states.front().size();
  if (sd == 0) throw ContractError("trajectory states are empty vectors");
  for (const auto& s : states) {
    if (s.size() != sd) throw ContractError("ragged trajectory states");
    for (double v : s) {
      if (!std::isfinite(v)) throw ContractError("non-finite state entry");
    }
  }
  const ActionKind kind = KindOf(actions.front());
  size_t width = 0;
  if (kind == ActionKind::kContinuous) {
    width = std::get<std::vector<double>>(actions.front()).size();
    if (width == 0) throw ContractError("empty continuous action");
  }
  for (const Action& a : actions) {
    if (KindOf(a) != kind) throw ContractError("mixed discrete/continuous actions");
    if (kind == ActionKind::kDiscrete) {
      if (std::get<int64_t>(a) < 0) throw ContractError("negative action id");
    } else {
      const auto& v = std::get<std::vector<double>>(a);
      if (v.size() != width) throw ContractError("ragged continuous actions");
      for (double x : v) {
        if (!std::isfinite(x)) throw ContractError("non-finite action entry");
      }
    }
  }
  for (double r : rewards) {
    if (!std::isfinite(r)) throw ContractError("non-finite reward");
  }
}

double Trajectory::EpisodeReturn() const {
  double total = 0.0;
  for (double r : rewards) total += r;
  return total;
}

ReturnAugmentedTrajectory ComputeReturnsToGo(Trajectory trajectory) {
  trajectory.Validate();
  ReturnAugmentedTrajectory out;
  const size_t n = trajectory.rewards.size();
  out.returns_to_go.resize(n);
  double running = 0.0;
  for (size_t i = n; i-- > 0;) {
    running += trajectory.rewards[i];
    out.returns_to_go[i] = running;
  }
  out.trajectory = std::move(trajectory);
  return out;
}

std::vector<ReturnAugmentedTrajectory> ComputeReturnsToGo(const Dataset& data) {
  std::vector<ReturnAugmentedTrajectory> out;
  out.reserve(data.size());
  for (const Trajectory& t : data) out.push_back(ComputeReturnsToGo(t));
  return out;
}

Trajectory ApplyRewardTransform(Trajectory trajectory, double scale,
                                double shift) {
  if (scale == 0.0) throw ContractError("reward transform scale must be nonzero");
  for (double& r : trajectory.rewards) r = scale * r + shift;
  return trajectory;
}

Dataset ApplyRewardTransform(Dataset data, double scale, double shift) {
  for (Trajectory& t : data) t = ApplyRewardTransform(std::move(t), scale, shift);
  return data;
}

TokenWindow TokenWindow::Empty(int64_t context, int64_t state_dim,
                               ActionKind kind, int64_t action_width) {
  TokenWindow w;
  w.context = context;
  w.state_dim = state_dim;
  w.action_kind = kind;
  w.action_width = kind == ActionKind::kDiscrete ? 1 : action_width;
  w.states.assign(context * state_dim, 0.0);
  w.returns.assign(context, 0.0);
  if (kind == ActionKind::kContinuous) {
    w.actions.assign(context * action_width, 0.0);
  } else {
    w.action_ids.assign(context, 0);
  }
  w.timesteps.assign(context, 0);
  w.valid.assign(context, 0);
  return w;
}

int64_t TokenWindow::ValidCount() const {
  int64_t n = 0;
  for (uint8_t v : valid) n += v ? 1 : 0;
  return n;
}

void TokenWindow::SetAction(int64_t slot, const Action& action) {
  if (KindOf(action) != action_kind) {
    throw DimensionError("window action kind mismatch");
  }
  if (action_kind == ActionKind::kDiscrete) {
    action_ids[slot] = std::get<int64_t>(action);
    return;
  }
  const auto& v = std::get<std::vector<double>>(action);
  if (static_cast<int64_t>(v.size()) != action_width) {
    throw DimensionError("window action width " + std::to_string(v.size()) +
                         " != " + std::to_string(action_width));
  }
  std::copy(v.begin(), v.end(), actions.begin() + slot * action_width);
}

TokenWindow SampleWindow(const ReturnAugmentedTrajectory& trajectory,
                         int64_t t, int64_t context) {
  const Trajectory& traj = trajectory.trajectory;
  if (context < 2) throw ContractError("context length K must be >= 2");
  if (t < 0 || t >= traj.length()) {
    throw ContractError("window end t=" + std::to_string(t) +
                        " outside trajectory of length " +
                        std::to_string(traj.length()));
  }
  const int64_t sd = traj.state_dim();
  TokenWindow w =
      TokenWindow::Empty(context, sd, traj.action_kind(), traj.action_width());
  const int64_t first = std::max<int64_t>(0, t - context + 1);
  const int64_t pad = context - (t - first + 1);
  for (int64_t step = first; step <= t; ++step) {
    const int64_t slot = pad + (step - first);
    std::copy(traj.states[step].begin(), traj.states[step].end(),
              w.states.begin() + slot * sd);
    w.returns[slot] = trajectory.returns_to_go[step];
    w.SetAction(slot, traj.actions[step]);
    w.timesteps[slot] = step;
    w.valid[slot] = 1;
  }
  return w;
}

std::vector<double> DatasetStats::Normalize(std::span<const double> state) const {
  if (state.size() != state_mean.size()) {
    throw DimensionError("state of width " + std::to_string(state.size()) +
                         " vs normalisation stats of width " +
                         std::to_string(state_mean.size()));
  }
  std::vector<double> out(state.size());
  for (size_t i = 0; i < state.size(); ++i) {
    out[i] = (state[i] - state_mean[i]) / state_std[i];
  }
  return out;
}

DatasetStats ComputeStats(const Dataset& data) {
  if (data.empty()) throw ContractError("cannot compute stats of empty dataset");
  DatasetStats stats;
  const size_t sd = static_cast<size_t>(data.front().state_dim());
  std::vector<double> sum(sd, 0.0), sq(sd, 0.0);
  double count = 0.0;
  for (const Trajectory& t : data) {
    t.Validate();
    if (static_cast<size_t>(t.state_dim()) != sd) {
      throw ContractError("dataset mixes state widths");
    }
    for (const auto& s : t.states) {
      for (size_t i = 0; i < sd; ++i) sum[i] += s[i];
      count += 1.0;
    }
  }
  stats.state_mean.resize(sd);
  for (size_t i = 0; i < sd; ++i) stats.state_mean[i] = sum[i] / count;
  for (const Trajectory& t : data) {
    for (const auto& s : t.states) {
      for (size_t i = 0; i < sd; ++i) {
        const double d = s[i] - stats.state_mean[i];
        sq[i] += d * d;
      }
    }
  }
  stats.state_std.resize(sd);
  for (size_t i = 0; i < sd; ++i) {
    stats.state_std[i] =
        std::max(std::sqrt(sq[i] / count), DatasetStats::kStdFloor);
  }

  stats.max_dataset_return = -std::numeric_limits<double>::infinity();
  stats.min_dataset_return = std::numeric_limits<double>::infinity();
  stats.max_return_to_go = -std::numeric_limits<double>::infinity();
  stats.min_return_to_go = std::numeric_limits<double>::infinity();
  for (const Trajectory& t : data) {
    const double ret = t.EpisodeReturn();
    stats.max_dataset_return = std::max(stats.max_dataset_return, ret);
    stats.min_dataset_return = std::min(stats.min_dataset_return, ret);
    double running = 0.0;
    for (size_t i = t.rewards.size(); i-- > 0;) {
      running += t.rewards[i];
      stats.max_return_to_go = std::max(stats.max_return_to_go, running);
      stats.min_return_to_go = std::min(stats.min_return_to_go, running);
    }
  }
  stats.ref_min = stats.min_dataset_return;
  stats.ref_max = stats.max_dataset_return;
  return stats;
}

Dataset NormalizeStates(const Dataset& data, const DatasetStats& stats) {
  Dataset out = data;
  for (Trajectory& t : out) {
    for (auto& s : t.states) s = stats.Normalize(s);
  }
  return out;
}

std::pair<Dataset, DatasetStats> NormalizeStates(const Dataset& data) {
  DatasetStats stats = ComputeStats(data);
  return {NormalizeStates(data, stats), stats};
}

}  // namespace reinformer
