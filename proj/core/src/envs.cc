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

#include "reinformer/envs.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>

#include "reinformer/errors.h"

namespace reinformer {

bool MazeLayout::InBounds(Cell c) const {
  return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
}

bool MazeLayout::IsWall(Cell c) const { return !InBounds(c) || walls[Index(c)]; }

Cell Move(Cell c, int64_t action) {
  switch (action) {
    case kUp: return {c.x, c.y - 1};
    case kDown: return {c.x, c.y + 1};
    case kLeft: return {c.x - 1, c.y};
    case kRight: return {c.x + 1, c.y};
  }
  throw ContractError("maze action " + std::to_string(action) +
                      " outside [0, 4)");
}

namespace {

int64_t ActionBetween(Cell from, Cell to) {
  for (int64_t a = 0; a < kMazeActionCount; ++a) {
    if (Move(from, a) == to) return a;
  }
  throw ContractError("cells are not adjacent");
}

bool IsTerminal(const MazeLayout& l, Cell c) {
  return c == l.boom || c == l.goal || c == l.decoy;
}

void DeriveIntersection(MazeLayout& layout) {
  const std::vector<Cell> to_decoy = ShortestRoute(layout, layout.start, layout.decoy);
  const std::vector<Cell> to_goal = ShortestRoute(layout, layout.start, layout.goal);
  if (to_decoy.empty() || to_goal.empty()) {
    throw ParseError("maze: start must reach both the decoy and the goal", 0);
  }
  size_t common = 0;
  while (common < to_decoy.size() && common < to_goal.size() &&
         to_decoy[common] == to_goal[common]) {
    ++common;
  }
  layout.intersection = to_decoy[common - 1];
}

}  // namespace

std::vector<Cell> ShortestRoute(const MazeLayout& layout, Cell from, Cell to) {
  std::vector<int> parent(layout.cell_count(), -1);
  std::vector<uint8_t> seen(layout.cell_count(), 0);
  std::deque<Cell> queue{from};
  seen[layout.Index(from)] = 1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == to) break;
    if (!(c == from) && IsTerminal(layout, c)) continue;
    for (int64_t a = 0; a < kMazeActionCount; ++a) {
      const Cell n = Move(c, a);
      if (layout.IsWall(n) || seen[layout.Index(n)]) continue;
      seen[layout.Index(n)] = 1;
      parent[layout.Index(n)] = layout.Index(c);
      queue.push_back(n);
    }
  }
  if (!seen[layout.Index(to)]) return {};
  std::vector<Cell> route;
  for (int i = layout.Index(to); i != -1; i = parent[i]) {
    route.push_back({i % layout.width, i / layout.width});
    if (i == layout.Index(from)) break;
  }
  std::reverse(route.begin(), route.end());
  return route;
}

MazeLayout DefaultMazeLayout() {
  return ParseMazeLayout(
      "##X#.\n"
      "##.#.\n"
      "S....\n"
      "#B.##\n"
      "##..G\n");
}

MazeLayout ParseMazeLayout(std::string_view text) {
  MazeLayout layout;
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw ParseError("maze layout is empty", 0);
  layout.height = static_cast<int>(rows.size());
  layout.width = static_cast<int>(rows[0].size());
  layout.walls.assign(layout.width * layout.height, 0);
  int seen_s = 0, seen_b = 0, seen_g = 0, seen_x = 0;
  for (int y = 0; y < layout.height; ++y) {
    if (static_cast<int>(rows[y].size()) != layout.width) {
      throw ParseError("maze rows have unequal width", y + 1);
    }
    for (int x = 0; x < layout.width; ++x) {
      const Cell c{x, y};
      switch (rows[y][x]) {
        case '#': layout.walls[layout.Index(c)] = 1; break;
        case '.': break;
        case 'S': layout.start = c; ++seen_s; break;
        case 'B': layout.boom = c; ++seen_b; break;
        case 'G': layout.goal = c; ++seen_g; break;
        case 'X': layout.decoy = c; ++seen_x; break;
        default:
          throw ParseError(std::string("unknown maze character '") + rows[y][x] + "'",
                           y + 1);
      }
    }
  }
  if (seen_s != 1 || seen_b != 1 || seen_g != 1 || seen_x != 1) {
    throw ParseError("maze needs exactly one each of S, B, G and X", 0);
  }
  DeriveIntersection(layout);
  return layout;
}

std::string FormatMazeLayout(const MazeLayout& layout) {
  std::string out;
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const Cell c{x, y};
      char ch = layout.IsWall(c) ? '#' : '.';
      if (c == layout.start) ch = 'S';
      if (c == layout.boom) ch = 'B';
      if (c == layout.goal) ch = 'G';
      if (c == layout.decoy) ch = 'X';
      out += ch;
    }
    out += '\n';
  }
  return out;
}

GridMaze::GridMaze(MazeLayout layout) : layout_(std::move(layout)) {}

std::vector<double> GridMaze::Reset(uint64_t) { return ResetAt(layout_.start); }

std::vector<double> GridMaze::ResetAt(Cell cell) {
  if (layout_.IsWall(cell)) throw ContractError("maze reset onto a wall");
  position_ = cell;
  steps_ = 0;
  done_ = false;
  return Encode(position_);
}

EnvStep GridMaze::Step(const Action& action) {
  if (done_) throw ContractError("maze step after the episode ended");
  if (KindOf(action) != ActionKind::kDiscrete) {
    throw ContractError("maze expects a discrete action id");
  }
  const Cell next = Move(position_, std::get<int64_t>(action));
  if (!layout_.IsWall(next)) position_ = next;
  ++steps_;
  EnvStep out;
  if (position_ == layout_.boom) {
    out.reward = -1.0;
    done_ = true;
  } else if (position_ == layout_.goal) {
    out.reward = 1.0;
    done_ = true;
  } else if (position_ == layout_.decoy) {
    done_ = true;
  }
  if (steps_ >= layout_.step_limit) done_ = true;
  out.done = done_;
  out.next_state = Encode(position_);
  return out;
}

std::unique_ptr<Environment> GridMaze::Clone() const {
  return std::make_unique<GridMaze>(*this);
}

std::vector<double> GridMaze::Encode(Cell cell) const {
  std::vector<double> s(layout_.cell_count(), 0.0);
  s[layout_.Index(cell)] = 1.0;
  return s;
}

Cell GridMaze::Decode(std::span<const double> state) const {
  if (static_cast<int>(state.size()) != layout_.cell_count()) {
    throw DimensionError("maze state has the wrong width");
  }
  const auto it = std::max_element(state.begin(), state.end());
  const int i = static_cast<int>(it - state.begin());
  return {i % layout_.width, i / layout_.width};
}

namespace {

Trajectory FollowRoute(const MazeLayout& layout, const std::vector<Cell>& route) {
  GridMaze maze(layout);
  Trajectory t;
  t.states.push_back(maze.ResetAt(route.front()));
  for (size_t i = 1; i < route.size(); ++i) {
    const int64_t a = ActionBetween(route[i - 1], route[i]);
    EnvStep s = maze.Step(Action{a});
    t.actions.push_back(a);
    t.rewards.push_back(s.reward);
    t.states.push_back(std::move(s.next_state));
    t.terminated = s.done;
  }
  return t;
}

// Longest-route floor cell off both branches that reaches the intersection.
Cell GoalTrajectoryStart(const MazeLayout& l) {
  const std::vector<Cell> decoy_route = ShortestRoute(l, l.start, l.decoy);
  const std::vector<Cell> goal_branch = ShortestRoute(l, l.intersection, l.goal);
  auto on = [](const std::vector<Cell>& r, Cell c) {
    return std::find(r.begin(), r.end(), c) != r.end();
  };
  Cell best = l.start;
  size_t best_len = 0;
  for (int y = 0; y < l.height; ++y) {
    for (int x = 0; x < l.width; ++x) {
      const Cell c{x, y};
      if (l.IsWall(c) || IsTerminal(l, c) || on(decoy_route, c) || on(goal_branch, c)) {
        continue;
      }
      const std::vector<Cell> r = ShortestRoute(l, c, l.intersection);
      if (r.size() > best_len && !on(r, l.start)) {
        best = c;
        best_len = r.size();
      }
    }
  }
  if (best_len == 0) throw ContractError("maze has no separate goal-trajectory start");
  return best;
}

}  // namespace

Trajectory MazeDecoyTrajectory(const MazeLayout& layout) {
  return FollowRoute(layout, ShortestRoute(layout, layout.start, layout.decoy));
}

Trajectory MazeGoalTrajectory(const MazeLayout& layout) {
  std::vector<Cell> route =
      ShortestRoute(layout, GoalTrajectoryStart(layout), layout.intersection);
  const std::vector<Cell> tail = ShortestRoute(layout, layout.intersection, layout.goal);
  route.insert(route.end(), tail.begin() + 1, tail.end());
  return FollowRoute(layout, route);
}

namespace {

// Inserts a move into a wall at step `at`, leaving the route intact.
bool InsertBump(const MazeLayout& layout, Trajectory& t, size_t at) {
  GridMaze maze(layout);
  const Cell here = maze.Decode(t.states[at]);
  for (int64_t a = 0; a < kMazeActionCount; ++a) {
    if (layout.IsWall(Move(here, a))) {
      t.actions.insert(t.actions.begin() + at, Action{a});
      t.rewards.insert(t.rewards.begin() + at, 0.0);
      t.states.insert(t.states.begin() + at, t.states[at]);
      return true;
    }
  }
  return false;
}

Trajectory Suffix(const Trajectory& t, size_t from) {
  Trajectory out;
  out.states.assign(t.states.begin() + from, t.states.end());
  out.actions.assign(t.actions.begin() + from, t.actions.end());
  out.rewards.assign(t.rewards.begin() + from, t.rewards.end());
  out.terminated = t.terminated;
  return out;
}

}  // namespace

Dataset GenStitchDataset(const MazeLayout& layout, int64_t n_copies,
                         const StitchOptions& options) {
  if (n_copies < 1) throw ContractError("n_copies must be at least 1");
  if (options.noise < 0.0 || options.noise > 1.0) {
    throw ContractError("stitch noise must lie in [0, 1]");
  }
  const Trajectory decoy = MazeDecoyTrajectory(layout);
  const Trajectory goal = MazeGoalTrajectory(layout);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto maybe_bump = [&](Trajectory t) {
    if (options.noise > 0.0 && unit(rng) < options.noise) {
      std::uniform_int_distribution<size_t> at(0, t.actions.size() - 1);
      InsertBump(layout, t, at(rng));
    }
    return t;
  };
  Dataset data;
  for (int64_t i = 0; i < n_copies; ++i) data.push_back(maybe_bump(decoy));
  for (int64_t i = 0; i < n_copies; ++i) data.push_back(maybe_bump(goal));
  if (options.suffix_variants) {
    // Every suffix of tau_2 that still passes the intersection, so the goal
    // branch is seen from s_4 at several absolute timesteps.
    GridMaze probe(layout);
    for (size_t from = 1; from < goal.states.size(); ++from) {
      const Trajectory suffix = Suffix(goal, from);
      for (int64_t i = 0; i < n_copies; ++i) data.push_back(maybe_bump(suffix));
      if (probe.Decode(goal.states[from]) == layout.intersection) break;
    }
  }
  return data;
}

std::vector<double> ReturnsToGoAtState(const Dataset& data,
                                       std::span<const double> state) {
  std::vector<double> out;
  for (const Trajectory& t : data) {
    const ReturnAugmentedTrajectory r = ComputeReturnsToGo(t);
    for (int64_t i = 0; i < t.length(); ++i) {
      if (std::equal(state.begin(), state.end(), t.states[i].begin(),
                     t.states[i].end())) {
        out.push_back(r.returns_to_go[i]);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

LineWorld::LineWorld(LineWorldConfig config) : config_(config) {
  if (!(config_.bound > 0.0) || !(config_.max_action > 0.0) || config_.horizon < 1) {
    throw ConfigError("line world needs positive bound, max_action and horizon");
  }
}

std::vector<double> LineWorld::Reset(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-config_.bound, config_.bound);
  const double position = u(rng);
  const double target = u(rng);
  return ResetAt(position, target);
}

std::vector<double> LineWorld::ResetAt(double position, double target) {
  position_ = std::clamp(position, -config_.bound, config_.bound);
  target_ = target;
  steps_ = 0;
  done_ = false;
  return {position_, target_};
}

EnvStep LineWorld::Step(const Action& action) {
  if (done_) throw ContractError("line world step after the episode ended");
  if (KindOf(action) != ActionKind::kContinuous ||
      std::get<std::vector<double>>(action).size() != 1) {
    throw ContractError("line world expects a single real action");
  }
  const double raw = std::get<std::vector<double>>(action)[0];
  if (!std::isfinite(raw)) throw ContractError("line world action is not finite");
  const double a = std::clamp(raw, -config_.max_action, config_.max_action);
  position_ = std::clamp(position_ + a, -config_.bound, config_.bound);
  ++steps_;
  done_ = steps_ >= config_.horizon;
  return {{position_, target_}, -std::abs(position_ - target_), done_};
}

bool LineWorld::succeeded() const {
  return done_ && std::abs(position_ - target_) < 0.05;
}

std::unique_ptr<Environment> LineWorld::Clone() const {
  return std::make_unique<LineWorld>(*this);
}

Dataset GenLineWorldDataset(const LineWorldConfig& config,
                            const LineWorldDataOptions& options) {
  if (options.episodes < 1) throw ContractError("episodes must be at least 1");
  Dataset data;
  LineWorld world(config);
  for (int64_t e = 0; e < options.episodes; ++e) {
    std::seed_seq seq{static_cast<uint32_t>(options.seed),
                      static_cast<uint32_t>(options.seed >> 32),
                      static_cast<uint32_t>(e)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const bool strong = unit(rng) < options.strong_fraction;
    const double bias = (2.0 * unit(rng) - 1.0) * config.max_action;
    Trajectory t;
    t.states.push_back(world.Reset(rng()));
    while (!world.done()) {
      double a;
      if (strong) {
        a = std::clamp(world.target() - world.position(), -config.max_action,
                       config.max_action) +
            options.strong_noise * gauss(rng);
      } else {
        a = bias + options.weak_noise * gauss(rng);
      }
      a = std::clamp(a, -config.max_action, config.max_action);
      EnvStep s = world.Step(Action{std::vector<double>{a}});
      t.actions.push_back(std::vector<double>{a});
      t.rewards.push_back(s.reward);
      t.states.push_back(std::move(s.next_state));
    }
    data.push_back(std::move(t));
  }
  return data;
}

bool ReplayMatches(const Trajectory& trajectory, GridMaze& maze) {
  maze.ResetAt(maze.Decode(trajectory.states.front()));
  for (int64_t i = 0; i < trajectory.length(); ++i) {
    if (maze.done()) return false;
    const EnvStep s = maze.Step(trajectory.actions[i]);
    if (s.next_state != trajectory.states[i + 1] || s.reward != trajectory.rewards[i]) {
      return false;
    }
  }
  return true;
}

bool ReplayMatches(const Trajectory& trajectory, LineWorld& world) {
  const std::vector<double>& s0 = trajectory.states.front();
  if (s0.size() != 2) return false;
  world.ResetAt(s0[0], s0[1]);
  for (int64_t i = 0; i < trajectory.length(); ++i) {
    if (world.done()) return false;
    const EnvStep s = world.Step(trajectory.actions[i]);
    if (s.next_state != trajectory.states[i + 1] || s.reward != trajectory.rewards[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace reinformer
