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

#include "reinformer/dataset_io.h"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "reinformer/errors.h"

namespace reinformer {
namespace {

using nlohmann::json;

std::vector<double> NumberArray(const json& j, const char* what, int line) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array", line);
  std::vector<double> out;
  out.reserve(j.size());
  for (const json& v : j) {
    if (!v.is_number()) {
      throw ParseError(std::string(what) + " must contain numbers", line);
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ParseError(std::string(what) + " is not finite", line);
    out.push_back(x);
  }
  return out;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("cannot write " + path);
  out << contents;
  if (!out) throw ContractError("failed writing " + path);
}

}  // namespace

std::string SerializeTrajectory(const Trajectory& trajectory) {
  trajectory.Validate();
  json j;
  j["states"] = trajectory.states;
  if (trajectory.action_kind() == ActionKind::kDiscrete) {
    std::vector<int64_t> ids;
    for (const Action& a : trajectory.actions) ids.push_back(std::get<int64_t>(a));
    j["actions"] = ids;
  } else {
    std::vector<std::vector<double>> vals;
    for (const Action& a : trajectory.actions) {
      vals.push_back(std::get<std::vector<double>>(a));
    }
    j["actions"] = vals;
  }
  j["rewards"] = trajectory.rewards;
  j["terminated"] = trajectory.terminated;
  return j.dump();
}

Trajectory ParseTrajectory(std::string_view line, int line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  if (!j.is_object()) throw ParseError("record must be a JSON object", line_number);
  for (const char* key : {"states", "actions", "rewards", "terminated"}) {
    if (!j.contains(key)) {
      throw ParseError(std::string("missing field '") + key + "'", line_number);
    }
  }
  Trajectory t;
  if (!j["states"].is_array()) throw ParseError("states must be an array", line_number);
  for (const json& s : j["states"]) {
    t.states.push_back(NumberArray(s, "state", line_number));
  }
  const json& actions = j["actions"];
  if (!actions.is_array()) throw ParseError("actions must be an array", line_number);
  for (const json& a : actions) {
    if (a.is_number_integer()) {
      t.actions.emplace_back(a.get<int64_t>());
    } else if (a.is_array()) {
      t.actions.emplace_back(NumberArray(a, "action", line_number));
    } else {
      throw ParseError("action must be an integer id or an array", line_number);
    }
  }
  t.rewards = NumberArray(j["rewards"], "rewards", line_number);
  if (!j["terminated"].is_boolean()) {
    throw ParseError("terminated must be a boolean", line_number);
  }
  t.terminated = j["terminated"].get<bool>();
  try {
    t.Validate();
  } catch (const ContractError& e) {
    throw ParseError(e.what(), line_number);
  }
  return t;
}

void SaveDataset(const std::string& path, const Dataset& data) {
  std::string out;
  for (const Trajectory& t : data) {
    out += SerializeTrajectory(t);
    out += '\n';
  }
  WriteFile(path, out);
}

Dataset LoadDataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path, 0);
  Dataset data;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    data.push_back(ParseTrajectory(line, line_number));
  }
  if (data.empty()) throw ParseError("dataset " + path + " is empty", 0);
  return data;
}

std::string SerializeStats(const DatasetStats& stats) {
  json j;
  j["state_mean"] = stats.state_mean;
  j["state_std"] = stats.state_std;
  j["max_dataset_return"] = stats.max_dataset_return;
  j["min_dataset_return"] = stats.min_dataset_return;
  j["max_return_to_go"] = stats.max_return_to_go;
  j["min_return_to_go"] = stats.min_return_to_go;
  j["ref_min"] = stats.ref_min;
  j["ref_max"] = stats.ref_max;
  j["reward_scale"] = stats.reward_scale;
  j["reward_shift"] = stats.reward_shift;
  return j.dump(2);
}

DatasetStats ParseStats(std::string_view text) {
  try {
    const json j = json::parse(text);
    DatasetStats s;
    s.state_mean = j.at("state_mean").get<std::vector<double>>();
    s.state_std = j.at("state_std").get<std::vector<double>>();
    s.max_dataset_return = j.at("max_dataset_return").get<double>();
    s.min_dataset_return = j.at("min_dataset_return").get<double>();
    s.max_return_to_go = j.at("max_return_to_go").get<double>();
    s.min_return_to_go = j.at("min_return_to_go").get<double>();
    s.ref_min = j.at("ref_min").get<double>();
    s.ref_max = j.at("ref_max").get<double>();
    s.reward_scale = j.value("reward_scale", 1.0);
    s.reward_shift = j.value("reward_shift", 0.0);
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid stats JSON: ") + e.what(), 0);
  }
}

void SaveStats(const std::string& path, const DatasetStats& stats) {
  WriteFile(path, SerializeStats(stats) + "\n");
}

DatasetStats LoadStats(const std::string& path) {
  return ParseStats(ReadFile(path));
}

uint64_t Fingerprint(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t FingerprintFile(const std::string& path) {
  return Fingerprint(ReadFile(path));
}

std::string HexDigest(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace reinformer
