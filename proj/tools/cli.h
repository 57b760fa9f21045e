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

// `reinformer` command-line driver.
//
//   gen-data   write a JSONL dataset plus stats and manifest sidecars
//   train      train a model, write metrics CSV and checkpoints
//   eval       roll out a checkpoint and report
//   ablate-m   train and evaluate one model per expectile level
//   gradcheck  finite-difference check of every differentiable op

#ifndef REINFORMER_TOOLS_CLI_H_
#define REINFORMER_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace reinformer::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // diagnostic failed
inline constexpr int kExitUsage = 2;    // bad arguments or inputs
inline constexpr int kExitNumeric = 3;  // training hit a non-finite loss

// `args` excludes the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace reinformer::cli

#endif  // REINFORMER_TOOLS_CLI_H_
