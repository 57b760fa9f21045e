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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "reinformer/dataset_io.h"
#include "reinformer/envs.h"
#include "reinformer/errors.h"
#include "reinformer/seq_data.h"

namespace reinformer {
namespace {

Trajectory Discrete(std::vector<double> rewards) {
  Trajectory t;
  for (size_t i = 0; i <= rewards.size(); ++i) t.states.push_back({static_cast<double>(i)});
  for (size_t i = 0; i < rewards.size(); ++i) t.actions.emplace_back(int64_t{0});
  t.rewards = std::move(rewards);
  t.terminated = true;
  return t;
}

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("reinformer_" + name)).string();
}

TEST(ReturnsToGoTest, Examples) {
  EXPECT_EQ(ComputeReturnsToGo(Discrete({0, 0, 1})).returns_to_go,
            (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(ComputeReturnsToGo(Discrete({1, -1})).returns_to_go, (std::vector<double>{0, -1}));
  const Trajectory goal = MazeGoalTrajectory(DefaultMazeLayout());
  for (double g : ComputeReturnsToGo(goal).returns_to_go) EXPECT_EQ(g, 1.0);
}

TEST(ReturnsToGoTest, FirstEqualsEpisodeReturnAndEmptyRejected) {
  const auto aug = ComputeReturnsToGo(Discrete({0.5, -2, 3, 0.25}));
  EXPECT_DOUBLE_EQ(aug.returns_to_go.front(), 1.75);
  EXPECT_DOUBLE_EQ(aug.returns_to_go.back(), 0.25);
  Trajectory empty;
  empty.states.push_back({0.0});
  EXPECT_THROW(ComputeReturnsToGo(empty), ContractError);
}

TEST(RewardTransformTest, Examples) {
  Trajectory t = ApplyRewardTransform(Discrete({1, 0}), 100, 1);
  EXPECT_EQ(t.rewards, (std::vector<double>{101, 1}));
  const Trajectory base = Discrete({0.3, -0.7});
  EXPECT_EQ(ApplyRewardTransform(base, 1, 0), base);
}

TEST(TrajectoryTest, ValidateCatchesMismatch) {
  Trajectory t = Discrete({0, 1});
  t.states.pop_back();
  EXPECT_THROW(t.Validate(), ContractError);
  Trajectory mixed = Discrete({0, 1});
  mixed.actions[1] = std::vector<double>{0.5};
  EXPECT_THROW(mixed.Validate(), ContractError);
}

TEST(SampleWindowTest, Boundaries) {
  std::vector<double> rewards(10, 0.0);
  const auto aug = ComputeReturnsToGo(Discrete(rewards));
  TokenWindow w0 = SampleWindow(aug, 0, 5);
  EXPECT_EQ(w0.ValidCount(), 1);
  EXPECT_EQ(w0.valid, (std::vector<uint8_t>{0, 0, 0, 0, 1}));
  TokenWindow w9 = SampleWindow(aug, 9, 5);
  EXPECT_EQ(w9.ValidCount(), 5);
  EXPECT_EQ(w9.timesteps, (std::vector<int64_t>{5, 6, 7, 8, 9}));
  EXPECT_EQ(w9.states.back(), 9.0);
  EXPECT_THROW(SampleWindow(aug, 10, 5), ContractError);
  EXPECT_THROW(SampleWindow(aug, -1, 5), ContractError);
}

TEST(SampleWindowTest, LongContextOnShortTrajectory) {
  std::vector<double> rewards(8, 0.0);
  rewards.back() = 1.0;
  TokenWindow w = SampleWindow(ComputeReturnsToGo(Discrete(rewards)), 3, 20);
  EXPECT_EQ(w.context, 20);
  EXPECT_EQ(w.ValidCount(), 4);
  EXPECT_EQ(w.returns.back(), 1.0);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(w.timesteps[i], 0);
}

TEST(NormalizeStatesTest, DegenerateAndUnit) {
  Dataset same = {Discrete({0})};
  same[0].states = {{2.0}, {2.0}};
  auto [norm, stats] = NormalizeStates(same);
  EXPECT_EQ(norm[0].states[0][0], 0.0);
  EXPECT_EQ(stats.state_std[0], DatasetStats::kStdFloor);

  Dataset pm = {Discrete({0})};
  pm[0].states = {{-1.0}, {1.0}};
  auto [norm2, stats2] = NormalizeStates(pm);
  EXPECT_DOUBLE_EQ(norm2[0].states[0][0], -1.0);
  EXPECT_DOUBLE_EQ(norm2[0].states[1][0], 1.0);
}

TEST(NormalizeStatesTest, MazeMeanIsVisitFrequency) {
  const MazeLayout layout = DefaultMazeLayout();
  const Dataset data = GenStitchDataset(layout, 3);
  const DatasetStats stats = ComputeStats(data);
  const int cell = layout.Index(layout.intersection);
  int visits = 0, total = 0;
  for (const Trajectory& t : data) {
    for (const auto& s : t.states) {
      ++total;
      if (s[cell] == 1.0) ++visits;
    }
  }
  EXPECT_NEAR(stats.state_mean[cell], static_cast<double>(visits) / total, 1e-15);
}

TEST(DatasetIoTest, RoundTrip) {
  Dataset data = GenStitchDataset(DefaultMazeLayout(), 1);
  data.push_back(Discrete({0.125, -3}));
  const std::string path = TempPath("roundtrip.jsonl");
  SaveDataset(path, data);
  EXPECT_EQ(LoadDataset(path), data);
  std::filesystem::remove(path);
}

TEST(DatasetIoTest, ContinuousRoundTripIsExact) {
  LineWorldDataOptions opts;
  opts.episodes = 3;
  const Dataset data = GenLineWorldDataset({}, opts);
  const std::string path = TempPath("line.jsonl");
  SaveDataset(path, data);
  EXPECT_EQ(LoadDataset(path), data);
  std::filesystem::remove(path);
}

TEST(DatasetIoTest, TruncatedRecordReportsLine) {
  const std::string path = TempPath("truncated.jsonl");
  const Dataset data = GenStitchDataset(DefaultMazeLayout(), 1);
  {
    std::ofstream out(path);
    out << SerializeTrajectory(data[0]) << "\n";
    const std::string second = SerializeTrajectory(data[1]);
    out << second.substr(0, second.size() / 2) << "\n";
  }
  try {
    LoadDataset(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  std::filesystem::remove(path);
}

TEST(DatasetIoTest, MissingFieldAndBadAction) {
  EXPECT_THROW(ParseTrajectory(R"({"states":[[0],[1]],"actions":[0]})", 1), ParseError);
  EXPECT_THROW(
      ParseTrajectory(R"({"states":[[0],[1]],"actions":["x"],"rewards":[0],"terminated":true})",
                      1),
      ParseError);
}

TEST(DatasetIoTest, GeneratedMazeReturns) {
  const std::string path = TempPath("maze.jsonl");
  SaveDataset(path, GenStitchDataset(DefaultMazeLayout(), 4));
  int zeros = 0, ones = 0;
  for (const Trajectory& t : LoadDataset(path)) {
    if (t.EpisodeReturn() == 0.0) ++zeros;
    if (t.EpisodeReturn() == 1.0) ++ones;
  }
  EXPECT_EQ(zeros, 4);
  EXPECT_EQ(ones, 4);
  std::filesystem::remove(path);
}

TEST(DatasetIoTest, StatsRoundTrip) {
  auto [norm, stats] = NormalizeStates(GenStitchDataset(DefaultMazeLayout(), 2));
  stats.reward_scale = 100;
  stats.reward_shift = 1;
  const DatasetStats back = ParseStats(SerializeStats(stats));
  EXPECT_EQ(back.state_mean, stats.state_mean);
  EXPECT_EQ(back.state_std, stats.state_std);
  EXPECT_EQ(back.max_dataset_return, stats.max_dataset_return);
  EXPECT_EQ(back.reward_scale, 100);
  EXPECT_EQ(back.reward_shift, 1);
}

TEST(FingerprintTest, StableAndSensitive) {
  EXPECT_EQ(Fingerprint("abc"), Fingerprint("abc"));
  EXPECT_NE(Fingerprint("abc"), Fingerprint("abd"));
  EXPECT_EQ(HexDigest(0xabc).size(), 16u);
}

}  // namespace
}  // namespace reinformer
