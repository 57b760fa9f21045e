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


// Flat key=value run configuration shared by every command.
//
//   # comment
//   m = 0.99
//   steps = 2000
//
// Values are layered: built-in defaults, then a config file, then command
// line overrides.

#ifndef REINFORMER_CONFIG_H_
#define REINFORMER_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "reinformer/envs.h"
#include "reinformer/model.h"
#include "reinformer/training.h"

namespace reinformer {

using KeyValues = std::map<std::string, std::string>;

// Throws ParseError with the offending line number.
KeyValues ParseKeyValues(std::string_view text);
KeyValues LoadKeyValues(const std::string& path);

struct RunConfig {
  std::string env = "maze";  // maze | lineworld
  std::string layout;        // optional maze layout file
  uint64_t seed = 0;

  // Dataset generation.
  int64_t copies = 50;
  int64_t episodes_data = 200;
  double reward_scale = 1.0;
  double reward_shift = 0.0;
  double noise = 0.0;             // maze wall-bump probability
  bool suffix_variants = false;   // extra tau_2 suffixes, see StitchOptions

  ModelConfig model;  // state_dim / action_dim / head come from the env
  TrainConfig train;

  // Evaluation.
  int64_t episodes = 100;
  std::string mode = "reinformer";
  std::optional<double> g0;

  // Applies known keys; throws ConfigError on unknown keys or bad values.
  void Apply(const KeyValues& values);
  KeyValues ToKeyValues() const;
  // Canonical sorted key=value text, the basis of the config fingerprint.
  std::string Serialize() const;
  void Validate() const;
};

// Per-environment settings layered over the built-in defaults.
KeyValues EnvPreset(const std::string& env);

// defaults < env preset < file < cli.
RunConfig ResolveRunConfig(const KeyValues& file, const KeyValues& cli);

// Model config for the selected environment with the configured sizes.
ModelConfig ModelConfigFor(const RunConfig& config, const Environment& env);

}  // namespace reinformer

#endif  // REINFORMER_CONFIG_H_
