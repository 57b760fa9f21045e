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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.h"
#include "reinformer/dataset_io.h"
#include "reinformer/training.h"

namespace reinformer::cli {
namespace {

namespace fs = std::filesystem;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("reinformer_cli_" + std::string(::testing::UnitTest::GetInstance()
                                                ->current_test_info()
                                                ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int Run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return RunCli(args, out_, err_);
  }
  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  // Small model so that CLI tests stay fast.
  std::vector<std::string> Small(std::vector<std::string> args) const {
    for (const char* s : {"hidden_dim=16", "n_layers=1", "n_heads=2", "batch_size=8"}) {
      args.push_back("--set");
      args.push_back(s);
    }
    return args;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, GenDataMaze) {
  ASSERT_EQ(Run({"gen-data", "--env", "maze", "--copies", "50", "--out", P("maze.jsonl")}), 0)
      << err_.str();
  const Dataset data = LoadDataset(P("maze.jsonl"));
  ASSERT_EQ(data.size(), 100u);
  int ones = 0;
  for (const Trajectory& t : data) ones += t.EpisodeReturn() == 1.0;
  EXPECT_EQ(ones, 50);
  EXPECT_TRUE(fs::exists(P("maze.stats.json")));
  EXPECT_TRUE(fs::exists(P("maze.manifest.json")));
  const std::string manifest = Slurp(P("maze.manifest.json"));
  for (const char* key : {"config_hash", "dataset_hash", "seed", "version"}) {
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
  }
}

TEST_F(CliTest, GenDataIsByteIdenticalPerSeed) {
  ASSERT_EQ(Run({"gen-data", "--env", "lineworld", "--seed", "4", "--out", P("a.jsonl")}), 0);
  ASSERT_EQ(Run({"gen-data", "--env", "lineworld", "--seed", "4", "--out", P("b.jsonl")}), 0);
  EXPECT_EQ(Slurp(P("a.jsonl")), Slurp(P("b.jsonl")));
  EXPECT_EQ(Slurp(P("a.stats.json")), Slurp(P("b.stats.json")));
  EXPECT_EQ(LoadDataset(P("a.jsonl")).size(), 200u);
  ASSERT_EQ(Run({"gen-data", "--env", "lineworld", "--seed", "5", "--out", P("c.jsonl")}), 0);
  EXPECT_NE(Slurp(P("a.jsonl")), Slurp(P("c.jsonl")));
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(Run({"gen-data", "--out", "/nonexistent-dir/x/data.jsonl"}), 2);
  EXPECT_EQ(Run({"train", "--data", P("missing.jsonl"), "--out", P("run")}), 2);
  EXPECT_EQ(Run({"frobnicate"}), 2);
  EXPECT_EQ(Run({"gen-data", "--out", P("d.jsonl"), "--set", "bogus=1"}), 2);
  EXPECT_EQ(Run({}), 2);
}

TEST_F(CliTest, TrainEvalAndResume) {
  ASSERT_EQ(Run({"gen-data", "--copies", "5", "--out", P("maze.jsonl")}), 0);
  ASSERT_EQ(Run(Small({"train", "--data", P("maze.jsonl"), "--out", P("full"), "--steps", "20",
                       "--set", "eval_interval=10"})),
            0)
      << err_.str();
  EXPECT_TRUE(fs::exists(P("full/model.rfmr")));
  EXPECT_TRUE(fs::exists(P("full/checkpoint_10.rfmr")));
  EXPECT_TRUE(fs::exists(P("full/manifest.json")));
  const auto full = ReadMetricsCsv(P("full/metrics.csv"));
  ASSERT_EQ(full.size(), 20u);

  // Same run stopped at 10 steps, then resumed to 20.
  ASSERT_EQ(Run(Small({"train", "--data", P("maze.jsonl"), "--out", P("part"), "--steps", "10",
                       "--set", "eval_interval=10"})),
            0);
  ASSERT_EQ(Run(Small({"train", "--data", P("maze.jsonl"), "--out", P("part"), "--steps", "20",
                       "--set", "eval_interval=10", "--resume", P("part/checkpoint_10.rfmr")})),
            0)
      << err_.str();
  EXPECT_EQ(ReadMetricsCsv(P("part/metrics.csv")), full);
  EXPECT_EQ(Slurp(P("part/model.rfmr")), Slurp(P("full/model.rfmr")));

  ASSERT_EQ(Run({"eval", "--ckpt", P("full/model.rfmr"), "--episodes", "3", "--trace",
                 P("trace.csv"), "--out", P("eval")}),
            0)
      << err_.str();
  EXPECT_NE(out_.str().find("\"success_rate\""), std::string::npos);
  EXPECT_TRUE(fs::exists(P("eval/report.json")));
  EXPECT_EQ(Slurp(P("trace.csv")).rfind(
                "episode,t,predicted_g,conditioned_g,reward,remaining_true_return\n", 0),
            0u);
  const std::string first = out_.str();
  ASSERT_EQ(Run({"eval", "--ckpt", P("full/model.rfmr"), "--episodes", "3"}), 0);
  EXPECT_EQ(out_.str(), first);

  EXPECT_EQ(Run({"eval", "--ckpt", P("full/model.rfmr"), "--mode", "dt"}), 2);
  EXPECT_EQ(Run({"eval", "--ckpt", P("full/model.rfmr"), "--mode", "dt", "--g0", "0",
                 "--episodes", "2"}),
            0);
  EXPECT_EQ(Run({"eval", "--ckpt", P("full/model.rfmr"), "--mode", "naive", "--episodes", "2"}),
            0);
}

TEST_F(CliTest, NonFiniteTrainingExitsThreeAndKeepsCheckpoint) {
  ASSERT_EQ(Run({"gen-data", "--copies", "2", "--out", P("maze.jsonl")}), 0);
  const int code = Run(Small({"train", "--data", P("maze.jsonl"), "--out", P("run"), "--steps",
                              "50", "--lr", "1e300", "--set", "eval_interval=1", "--set",
                              "grad_clip=none"}));
  EXPECT_EQ(code, 3) << err_.str();
  EXPECT_TRUE(fs::exists(P("run/checkpoint_1.rfmr")));
  EXPECT_FALSE(fs::exists(P("run/model.rfmr")));
  EXPECT_NE(err_.str().find("last good checkpoint"), std::string::npos);
}

TEST_F(CliTest, FlagBeatsFileBeatsDefault) {
  ASSERT_EQ(Run({"gen-data", "--copies", "2", "--out", P("maze.jsonl")}), 0);
  {
    std::ofstream cfg(P("run.cfg"));
    cfg << "m = 0.7\nn_layers = 1\n";
  }
  ASSERT_EQ(Run(Small({"train", "--data", P("maze.jsonl"), "--out", P("run"), "--config",
                       P("run.cfg"), "--m", "0.5", "--steps", "1"})),
            0);
  const std::string cfg = Slurp(P("run/config.txt"));
  EXPECT_NE(cfg.find("m = 0.5\n"), std::string::npos);
  EXPECT_NE(cfg.find("n_layers = 1\n"), std::string::npos);
  EXPECT_NE(cfg.find("context = 5\n"), std::string::npos);
}

TEST_F(CliTest, AblationSummary) {
  ASSERT_EQ(Run({"gen-data", "--copies", "2", "--out", P("maze.jsonl")}), 0);
  ASSERT_EQ(Run(Small({"ablate-m", "--data", P("maze.jsonl"), "--out", P("abl"), "--m-list",
                       "0.5,0.99", "--steps", "3", "--episodes", "1"})),
            0)
      << err_.str();
  std::istringstream csv(Slurp(P("abl/ablation.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("m,success,mean_return,final_return_loss", 0), 0u);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(Run({"ablate-m", "--data", P("maze.jsonl"), "--out", P("abl2"), "--m-list", "1.5"}),
            2);
}

TEST_F(CliTest, GradCheckPasses) {
  EXPECT_EQ(Run({"gradcheck", "--points", "2"}), 0) << err_.str();
  EXPECT_NE(out_.str().find("worst relative error"), std::string::npos);
}

}  // namespace
}  // namespace reinformer::cli
