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

// Binary checkpoint files.
//
// Layout (all integers and floats little-endian):
//   "RFMR"                        4 bytes magic
//   u32 version                   currently 1
//   model config                  i64 state_dim, i64 action_dim,
//                                 u8 head (0 gaussian, 1 categorical),
//                                 i64 hidden_dim, i64 n_layers, i64 n_heads,
//                                 i64 context, f64 log_std_min,
//                                 f64 log_std_max, i64 max_timestep,
//                                 f64 return_scale, f64 dropout
//   u64 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, i64 dims[rank],
//               f64 values[product(dims)]
//
// Besides model parameters a checkpoint may carry dataset statistics
// ("stats.*") and optimiser/trainer state ("train.*", "opt.*").

#ifndef REINFORMER_CHECKPOINT_H_
#define REINFORMER_CHECKPOINT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reinformer/model.h"
#include "reinformer/seq_data.h"
#include "reinformer/tensor.h"

namespace reinformer {

inline constexpr std::string_view kCheckpointMagic = "RFMR";
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* Find(std::string_view name) const;
  // Replaces an existing entry of the same name.
  void Put(const std::string& name, Tensor tensor);
};

std::string SerializeCheckpoint(const Checkpoint& checkpoint);
// Throws ParseError on bad magic, unknown version or truncation.
Checkpoint ParseCheckpoint(std::string_view bytes);

// Writes through a temporary file and renames, so an existing checkpoint at
// `path` is only replaced by a complete one.
void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::string& path);

Checkpoint MakeCheckpoint(const ReinformerModel& model);
ReinformerModel ModelFromCheckpoint(const Checkpoint& checkpoint);

void PutStats(Checkpoint& checkpoint, const DatasetStats& stats);
std::optional<DatasetStats> GetStats(const Checkpoint& checkpoint);

}  // namespace reinformer

#endif  // REINFORMER_CHECKPOINT_H_
