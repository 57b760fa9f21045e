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


// Deterministic toy environments and their offline dataset generators.
//
// GridMaze is the stitching maze: one corridor leads from the start to an
// intersection, from which one branch ends at a decoy terminal and another at
// the goal. A boom cell sits next to the start corridor. LineWorld is a 1-D
// continuous control task with a dense distance penalty.

#ifndef REINFORMER_ENVS_H_
#define REINFORMER_ENVS_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reinformer/seq_data.h"

namespace reinformer {

struct EnvStep {
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  // Starts an episode. Deterministic environments ignore the seed.
  virtual std::vector<double> Reset(uint64_t seed) = 0;
  // Throws ContractError after the episode is done or on a wrong action kind.
  virtual EnvStep Step(const Action& action) = 0;

  virtual int64_t state_dim() const = 0;
  virtual ActionKind action_kind() const = 0;
  // Discrete action count or continuous action width.
  virtual int64_t action_dim() const = 0;
  virtual int64_t step_limit() const = 0;
  virtual bool done() const = 0;
  // Whether the finished episode counts as a success.
  virtual bool succeeded() const = 0;
  virtual std::unique_ptr<Environment> Clone() const = 0;
};

// ---------------------------------------------------------------------------
// Maze

struct Cell {
  int x = 0;
  int y = 0;  // grows downward
  bool operator==(const Cell&) const = default;
};

enum MazeAction : int64_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int64_t kMazeActionCount = 4;

struct MazeLayout {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> walls;  // width * height, row-major
  Cell start, boom, goal, decoy;
  Cell intersection;  // branch point of the start->decoy and start->goal routes
  int step_limit = 30;

  bool IsWall(Cell c) const;
  bool InBounds(Cell c) const;
  int Index(Cell c) const { return c.y * width + c.x; }
  int cell_count() const { return width * height; }
};

// The built-in 5x5 layout:
//   ##X#.
//   ##.#.
//   S....
//   #B.##
//   ##..G
MazeLayout DefaultMazeLayout();

// Rows of '#', '.', 'S', 'B', 'G', 'X'; exactly one of each letter. The
// intersection is derived from the shortest routes. Throws ParseError.
MazeLayout ParseMazeLayout(std::string_view text);
std::string FormatMazeLayout(const MazeLayout& layout);

// Shortest route between two cells avoiding walls and terminal cells other
// than `to`; empty when unreachable.
std::vector<Cell> ShortestRoute(const MazeLayout& layout, Cell from, Cell to);

class GridMaze : public Environment {
 public:
  explicit GridMaze(MazeLayout layout = DefaultMazeLayout());

  std::vector<double> Reset(uint64_t seed = 0) override;
  // Starts from an arbitrary floor cell (used by the dataset generator).
  std::vector<double> ResetAt(Cell cell);
  EnvStep Step(const Action& action) override;

  int64_t state_dim() const override { return layout_.cell_count(); }
  ActionKind action_kind() const override { return ActionKind::kDiscrete; }
  int64_t action_dim() const override { return kMazeActionCount; }
  int64_t step_limit() const override { return layout_.step_limit; }
  bool done() const override { return done_; }
  bool succeeded() const override { return done_ && position_ == layout_.goal; }
  std::unique_ptr<Environment> Clone() const override;

  const MazeLayout& layout() const { return layout_; }
  Cell position() const { return position_; }
  std::vector<double> Encode(Cell cell) const;  // one-hot
  // Inverse of Encode on raw (unnormalised) states.
  Cell Decode(std::span<const double> state) const;

 private:
  MazeLayout layout_;
  Cell position_;
  int steps_ = 0;
  bool done_ = true;
};

Cell Move(Cell c, int64_t action);

struct StitchOptions {
  // Additionally emit n_copies of each goal-trajectory suffix that starts
  // after its first cell and no later than the intersection.
  bool suffix_variants = false;
  // Probability per copy of inserting one wall bump (a no-op move) at a
  // random step. Returns and routes are unchanged.
  double noise = 0.0;
  uint64_t seed = 0;
};

// The two trajectories of the stitching example: tau_1 runs from the start
// through the intersection to the decoy (return 0); tau_2 starts elsewhere,
// passes the intersection and reaches the goal (return 1).
Trajectory MazeDecoyTrajectory(const MazeLayout& layout);
Trajectory MazeGoalTrajectory(const MazeLayout& layout);
// n_copies of each, decoy trajectories first. Throws ContractError when
// n_copies < 1.
Dataset GenStitchDataset(const MazeLayout& layout, int64_t n_copies,
                         const StitchOptions& options = {});

// Returns-to-go observed at time steps whose state equals `state`.
std::vector<double> ReturnsToGoAtState(const Dataset& data,
                                       std::span<const double> state);

// ---------------------------------------------------------------------------
// Line world

struct LineWorldConfig {
  double bound = 1.0;        // positions live in [-bound, bound]
  double max_action = 0.2;
  int horizon = 40;
};

class LineWorld : public Environment {
 public:
  explicit LineWorld(LineWorldConfig config = {});

  // Position and target drawn uniformly from [-bound, bound].
  std::vector<double> Reset(uint64_t seed) override;
  std::vector<double> ResetAt(double position, double target);
  EnvStep Step(const Action& action) override;

  int64_t state_dim() const override { return 2; }
  ActionKind action_kind() const override { return ActionKind::kContinuous; }
  int64_t action_dim() const override { return 1; }
  int64_t step_limit() const override { return config_.horizon; }
  bool done() const override { return done_; }
  // Within 0.05 of the target when the horizon ends.
  bool succeeded() const override;
  std::unique_ptr<Environment> Clone() const override;

  const LineWorldConfig& config() const { return config_; }
  double position() const { return position_; }
  double target() const { return target_; }

 private:
  LineWorldConfig config_;
  double position_ = 0.0;
  double target_ = 0.0;
  int steps_ = 0;
  bool done_ = true;
};

struct LineWorldDataOptions {
  int64_t episodes = 200;
  // Share of episodes driven by the strong controller.
  double strong_fraction = 0.5;
  // Gaussian action noise of the strong and weak controllers.
  double strong_noise = 0.06;
  double weak_noise = 0.1;
  uint64_t seed = 0;
};

// Strong controller: proportional step toward the target. Weak controller:
// drifts with a random constant bias. Recorded actions are the clipped
// actions actually executed, rewards are raw.
Dataset GenLineWorldDataset(const LineWorldConfig& config,
                            const LineWorldDataOptions& options);

// Re-runs the trajectory's actions from its first state and checks that
// states and rewards match exactly.
bool ReplayMatches(const Trajectory& trajectory, GridMaze& maze);
bool ReplayMatches(const Trajectory& trajectory, LineWorld& world);

}  // namespace reinformer

#endif  // REINFORMER_ENVS_H_
