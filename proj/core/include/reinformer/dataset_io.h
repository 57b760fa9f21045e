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

// JSONL dataset files and JSON stats sidecars.
//
// One trajectory per line:
//   {"actions":[[0.1],[-0.2]],"rewards":[0.0,1.0],
//    "states":[[0.0,1.0],[0.5,1.0],[0.7,1.0]],"terminated":true}
// Discrete actions are written as a flat integer array, e.g. "actions":[3,1].

#ifndef REINFORMER_DATASET_IO_H_
#define REINFORMER_DATASET_IO_H_

#include <cstdint>
#include <string>
#include <string_view>

#include "reinformer/seq_data.h"

namespace reinformer {

std::string SerializeTrajectory(const Trajectory& trajectory);
// Throws ParseError carrying `line_number` on malformed input.
Trajectory ParseTrajectory(std::string_view line, int line_number = 0);

void SaveDataset(const std::string& path, const Dataset& data);
Dataset LoadDataset(const std::string& path);

std::string SerializeStats(const DatasetStats& stats);
DatasetStats ParseStats(std::string_view json);
void SaveStats(const std::string& path, const DatasetStats& stats);
DatasetStats LoadStats(const std::string& path);

// 64-bit FNV-1a, used for manifest fingerprints.
uint64_t Fingerprint(std::string_view bytes);
uint64_t FingerprintFile(const std::string& path);
std::string HexDigest(uint64_t value);

}  // namespace reinformer

#endif  // REINFORMER_DATASET_IO_H_
