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

#include "reinformer/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "reinformer/errors.h"

namespace reinformer {
namespace {

std::string Trim(std::string_view s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double ToDouble(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

int64_t ToInt(const std::string& key, const std::string& v) {
  int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

KeyValues ParseKeyValues(std::string_view text) {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = Trim(line);
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", n);
    const std::string key = Trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ParseError("empty key", n);
    out[key] = Trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

KeyValues LoadKeyValues(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseKeyValues(ss.str());
}

void RunConfig::Apply(const KeyValues& values) {
  for (const auto& [key, v] : values) {
    if (key == "env") env = v;
    else if (key == "layout") layout = v;
    else if (key == "seed") {
      seed = static_cast<uint64_t>(ToInt(key, v));
      train.seed = seed;
    }
    else if (key == "copies") copies = ToInt(key, v);
    else if (key == "episodes_data") episodes_data = ToInt(key, v);
    else if (key == "reward_scale") reward_scale = ToDouble(key, v);
    else if (key == "reward_shift") reward_shift = ToDouble(key, v);
    else if (key == "noise") noise = ToDouble(key, v);
    else if (key == "suffix_variants") suffix_variants = ToBool(key, v);
    else if (key == "hidden_dim") model.hidden_dim = ToInt(key, v);
    else if (key == "n_layers") model.n_layers = ToInt(key, v);
    else if (key == "n_heads") model.n_heads = ToInt(key, v);
    else if (key == "context") model.context = ToInt(key, v);
    else if (key == "max_timestep") model.max_timestep = ToInt(key, v);
    else if (key == "log_std_min") model.log_std_min = ToDouble(key, v);
    else if (key == "log_std_max") model.log_std_max = ToDouble(key, v);
    else if (key == "return_scale") model.return_scale = ToDouble(key, v);
    else if (key == "dropout") model.dropout = ToDouble(key, v);
    else if (key == "m") train.m = ToDouble(key, v);
    else if (key == "lr") train.learning_rate = ToDouble(key, v);
    else if (key == "steps") train.steps = ToInt(key, v);
    else if (key == "batch_size") train.batch_size = ToInt(key, v);
    else if (key == "grad_clip") {
      if (v == "none") train.grad_clip.reset();
      else train.grad_clip = ToDouble(key, v);
    }
    else if (key == "eval_interval") train.eval_interval = ToInt(key, v);
    else if (key == "initial_lambda") train.initial_lambda = ToDouble(key, v);
    else if (key == "weight_decay") train.weight_decay = ToDouble(key, v);
    else if (key == "discrete_entropy_fraction") train.discrete_entropy_fraction = ToDouble(key, v);
    else if (key == "episodes") episodes = ToInt(key, v);
    else if (key == "mode") mode = v;
    else if (key == "g0") {
      if (v == "none") g0.reset();
      else g0 = ToDouble(key, v);
    }
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

KeyValues RunConfig::ToKeyValues() const {
  KeyValues kv;
  kv["env"] = env;
  kv["layout"] = layout;
  kv["seed"] = std::to_string(seed);
  kv["copies"] = std::to_string(copies);
  kv["episodes_data"] = std::to_string(episodes_data);
  kv["reward_scale"] = Num(reward_scale);
  kv["reward_shift"] = Num(reward_shift);
  kv["noise"] = Num(noise);
  kv["suffix_variants"] = suffix_variants ? "true" : "false";
  kv["hidden_dim"] = std::to_string(model.hidden_dim);
  kv["n_layers"] = std::to_string(model.n_layers);
  kv["n_heads"] = std::to_string(model.n_heads);
  kv["context"] = std::to_string(model.context);
  kv["max_timestep"] = std::to_string(model.max_timestep);
  kv["log_std_min"] = Num(model.log_std_min);
  kv["log_std_max"] = Num(model.log_std_max);
  kv["return_scale"] = Num(model.return_scale);
  kv["dropout"] = Num(model.dropout);
  kv["m"] = Num(train.m);
  kv["lr"] = Num(train.learning_rate);
  kv["steps"] = std::to_string(train.steps);
  kv["batch_size"] = std::to_string(train.batch_size);
  kv["grad_clip"] = train.grad_clip ? Num(*train.grad_clip) : "none";
  kv["eval_interval"] = std::to_string(train.eval_interval);
  kv["initial_lambda"] = Num(train.initial_lambda);
  kv["weight_decay"] = Num(train.weight_decay);
  kv["discrete_entropy_fraction"] = Num(train.discrete_entropy_fraction);
  kv["episodes"] = std::to_string(episodes);
  kv["mode"] = mode;
  kv["g0"] = g0 ? Num(*g0) : "none";
  return kv;
}

std::string RunConfig::Serialize() const {
  std::string out;
  for (const auto& [k, v] : ToKeyValues()) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::Validate() const {
  if (env != "maze" && env != "lineworld") {
    throw ConfigError("env must be maze or lineworld, got '" + env + "'");
  }
  if (copies < 1) throw ConfigError("copies must be at least 1");
  if (episodes_data < 1) throw ConfigError("episodes_data must be at least 1");
  if (episodes < 1) throw ConfigError("episodes must be at least 1");
  if (reward_scale == 0.0) throw ConfigError("reward_scale must be nonzero");
  if (noise < 0.0 || noise > 1.0) throw ConfigError("noise must lie in [0, 1]");
  train.Validate();
  ModelConfig probe = model;
  probe.Validate();
}

KeyValues EnvPreset(const std::string& env) {
  if (env == "maze") {
    return {{"lr", "1e-4"}};
  }
  if (env == "lineworld") {
    return {{"reward_shift", "2"}, {"return_scale", "40"}};
  }
  return {};
}

RunConfig ResolveRunConfig(const KeyValues& file, const KeyValues& cli) {
  RunConfig config;
  std::string env = config.env;
  if (auto it = file.find("env"); it != file.end()) env = it->second;
  if (auto it = cli.find("env"); it != cli.end()) env = it->second;
  config.Apply(EnvPreset(env));
  config.Apply(file);
  config.Apply(cli);
  return config;
}

ModelConfig ModelConfigFor(const RunConfig& config, const Environment& env) {
  ModelConfig mc = config.model;
  mc.state_dim = env.state_dim();
  mc.action_dim = env.action_dim();
  mc.action_head = env.action_kind() == ActionKind::kDiscrete
                       ? ActionHeadKind::kCategorical
                       : ActionHeadKind::kGaussian;
  mc.Validate();
  return mc;
}

}  // namespace reinformer
