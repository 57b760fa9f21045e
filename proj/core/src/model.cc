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

#include "reinformer/model.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "reinformer/errors.h"

namespace reinformer {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kLayerNormEps = 1e-5;

Tensor TruncatedNormal(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, kInitStd);
  std::vector<double> values(NumElements(shape));
  for (double& v : values) {
    do {
      v = normal(rng);
    } while (std::abs(v) > 2.0 * kInitStd);
  }
  return Tensor::FromData(std::move(shape), std::move(values), true);
}

Tensor ZerosParam(Shape shape) { return Tensor::Zeros(std::move(shape), true); }
Tensor OnesParam(Shape shape) { return Tensor::Full(std::move(shape), 1.0, true); }

}  // namespace

void ModelConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (state_dim < 1) fail("state_dim must be >= 1");
  if (action_dim < 1) fail("action_dim must be >= 1");
  if (hidden_dim < 1 || n_layers < 1 || n_heads < 1) fail("sizes must be >= 1");
  if (hidden_dim % n_heads != 0) {
    fail("hidden_dim " + std::to_string(hidden_dim) + " not divisible by " +
         std::to_string(n_heads) + " heads");
  }
  if (context < 2) fail("context K must be >= 2");
  if (!(log_std_min < log_std_max)) fail("log_std bounds must satisfy lower < upper");
  if (max_timestep < 1) fail("max_timestep must be >= 1");
  if (!(return_scale > 0.0)) fail("return_scale must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
}

double ActionDistribution::Entropy() const {
  if (kind == ActionHeadKind::kCategorical) {
    double h = 0.0;
    for (double p : probs) {
      if (p > 0.0) h -= p * std::log(p);
    }
    return h;
  }
  const double half_log_2pie = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double h = 0.0;
  for (double s : std) h += half_log_2pie + std::log(s);
  return h;
}

void ReinformerModel::Register(std::string name, Tensor* slot) {
  named_.emplace_back(std::move(name), *slot);
}

ReinformerModel::ReinformerModel(const ModelConfig& config, uint64_t seed)
    : config_(config) {
  config_.Validate();
  std::mt19937_64 rng(seed);
  const int64_t d = config_.hidden_dim;
  const int64_t a = config_.action_dim;

  state_weight_ = TruncatedNormal({config_.state_dim, d}, rng);
  state_bias_ = ZerosParam({d});
  return_weight_ = TruncatedNormal({1, d}, rng);
  return_bias_ = ZerosParam({d});
  action_weight_ = TruncatedNormal({a, d}, rng);
  if (config_.action_head == ActionHeadKind::kGaussian) action_bias_ = ZerosParam({d});
  timestep_table_ = TruncatedNormal({config_.max_timestep, d}, rng);
  embed_ln_gain_ = OnesParam({d});
  embed_ln_bias_ = ZerosParam({d});

  Register("embed.state.weight", &state_weight_);
  Register("embed.state.bias", &state_bias_);
  Register("embed.return.weight", &return_weight_);
  Register("embed.return.bias", &return_bias_);
  if (config_.action_head == ActionHeadKind::kGaussian) {
    Register("embed.action.weight", &action_weight_);
    Register("embed.action.bias", &action_bias_);
  } else {
    Register("embed.action.table", &action_weight_);
  }
  Register("embed.timestep.table", &timestep_table_);
  Register("embed.ln.gain", &embed_ln_gain_);
  Register("embed.ln.bias", &embed_ln_bias_);

  blocks_.resize(config_.n_layers);
  for (int64_t i = 0; i < config_.n_layers; ++i) {
    DecoderBlockParams& b = blocks_[i];
    b.attention.qkv_weight = TruncatedNormal({d, 3 * d}, rng);
    b.attention.qkv_bias = ZerosParam({3 * d});
    b.attention.out_weight = TruncatedNormal({d, d}, rng);
    b.attention.out_bias = ZerosParam({d});
    b.ln1_gain = OnesParam({d});
    b.ln1_bias = ZerosParam({d});
    b.fc1_weight = TruncatedNormal({d, 4 * d}, rng);
    b.fc1_bias = ZerosParam({4 * d});
    b.fc2_weight = TruncatedNormal({4 * d, d}, rng);
    b.fc2_bias = ZerosParam({d});
    b.ln2_gain = OnesParam({d});
    b.ln2_bias = ZerosParam({d});
    const std::string p = "blocks." + std::to_string(i) + ".";
    Register(p + "attn.qkv.weight", &b.attention.qkv_weight);
    Register(p + "attn.qkv.bias", &b.attention.qkv_bias);
    Register(p + "attn.out.weight", &b.attention.out_weight);
    Register(p + "attn.out.bias", &b.attention.out_bias);
    Register(p + "ln1.gain", &b.ln1_gain);
    Register(p + "ln1.bias", &b.ln1_bias);
    Register(p + "mlp.fc1.weight", &b.fc1_weight);
    Register(p + "mlp.fc1.bias", &b.fc1_bias);
    Register(p + "mlp.fc2.weight", &b.fc2_weight);
    Register(p + "mlp.fc2.bias", &b.fc2_bias);
    Register(p + "ln2.gain", &b.ln2_gain);
    Register(p + "ln2.bias", &b.ln2_bias);
  }

  return_head_weight_ = ZerosParam({d, 1});
  return_head_bias_ = ZerosParam({1});
  Register("head.return.weight", &return_head_weight_);
  Register("head.return.bias", &return_head_bias_);
  if (config_.action_head == ActionHeadKind::kGaussian) {
    mean_head_weight_ = TruncatedNormal({d, a}, rng);
    mean_head_bias_ = ZerosParam({a});
    log_std_head_weight_ = TruncatedNormal({d, a}, rng);
    log_std_head_bias_ = ZerosParam({a});
    Register("head.action.mean.weight", &mean_head_weight_);
    Register("head.action.mean.bias", &mean_head_bias_);
    Register("head.action.log_std.weight", &log_std_head_weight_);
    Register("head.action.log_std.bias", &log_std_head_bias_);
  } else {
    logits_head_weight_ = TruncatedNormal({d, a}, rng);
    logits_head_bias_ = ZerosParam({a});
    Register("head.action.logits.weight", &logits_head_weight_);
    Register("head.action.logits.bias", &logits_head_bias_);
  }
}

std::vector<Tensor> ReinformerModel::Parameters() const {
  std::vector<Tensor> out;
  out.reserve(named_.size());
  for (const auto& [name, t] : named_) out.push_back(t);
  return out;
}

int64_t ReinformerModel::ParameterCount() const {
  int64_t n = 0;
  for (const auto& [name, t] : named_) n += t.size();
  return n;
}

ReinformerModel ReinformerModel::Clone() const {
  ReinformerModel copy(config_, 0);
  copy.LoadParameters(named_);
  return copy;
}

void ReinformerModel::LoadParameters(
    const std::vector<std::pair<std::string, Tensor>>& tensors) {
  for (auto& [name, param] : named_) {
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [&](const auto& e) { return e.first == name; });
    if (it == tensors.end()) throw DimensionError("missing parameter " + name);
    if (it->second.shape() != param.shape()) {
      throw DimensionError("parameter " + name + " has shape " +
                           ShapeToString(it->second.shape()) + ", expected " +
                           ShapeToString(param.shape()));
    }
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), param.mutable_data().begin());
  }
}

void ReinformerModel::CheckWindow(const TokenWindow& w) const {
  if (w.context != config_.context || w.state_dim != config_.state_dim ||
      w.action_kind != config_.action_kind() ||
      w.action_width != config_.action_width()) {
    throw DimensionError(
        "window (K=" + std::to_string(w.context) +
        ", state_dim=" + std::to_string(w.state_dim) +
        ", action_width=" + std::to_string(w.action_width) +
        ") does not match model config (K=" + std::to_string(config_.context) +
        ", state_dim=" + std::to_string(config_.state_dim) +
        ", action_width=" + std::to_string(config_.action_width()) + ")");
  }
  for (int64_t t : w.timesteps) {
    if (t < 0 || t >= config_.max_timestep) {
      throw DimensionError("timestep " + std::to_string(t) +
                           " outside embedding table of size " +
                           std::to_string(config_.max_timestep));
    }
  }
  if (w.action_kind == ActionKind::kDiscrete) {
    for (int64_t id : w.action_ids) {
      if (id < 0 || id >= config_.action_dim) {
        throw DimensionError("action id " + std::to_string(id) +
                             " outside [0, " + std::to_string(config_.action_dim) + ")");
      }
    }
  }
}

Tensor ReinformerModel::EmbedTokens(std::span<const TokenWindow> windows) const {
  if (windows.empty()) throw ContractError("forward on an empty batch");
  for (const TokenWindow& w : windows) CheckWindow(w);
  const int64_t k = config_.context;
  const int64_t n = static_cast<int64_t>(windows.size()) * k;
  const int64_t d = config_.hidden_dim;
  const int64_t sd = config_.state_dim;

  std::vector<double> states, returns, actions;
  std::vector<int64_t> ids, timesteps;
  states.reserve(n * sd);
  returns.reserve(n);
  timesteps.reserve(n);
  for (const TokenWindow& w : windows) {
    states.insert(states.end(), w.states.begin(), w.states.end());
    for (double g : w.returns) returns.push_back(g / config_.return_scale);
    actions.insert(actions.end(), w.actions.begin(), w.actions.end());
    ids.insert(ids.end(), w.action_ids.begin(), w.action_ids.end());
    timesteps.insert(timesteps.end(), w.timesteps.begin(), w.timesteps.end());
  }

  Tensor time = EmbeddingLookup(timestep_table_, timesteps);
  Tensor s = Add(Linear(Tensor::FromData({n, sd}, std::move(states)),
                        state_weight_, state_bias_),
                 time);
  Tensor g = Add(Linear(Tensor::FromData({n, 1}, std::move(returns)),
                        return_weight_, return_bias_),
                 time);
  Tensor a;
  if (config_.action_head == ActionHeadKind::kGaussian) {
    a = Linear(Tensor::FromData({n, config_.action_dim}, std::move(actions)),
               action_weight_, action_bias_);
  } else {
    a = EmbeddingLookup(action_weight_, ids);
  }
  a = Add(a, time);
  Tensor stacked = Concatenate(
      {Reshape(s, {n, 1, d}), Reshape(g, {n, 1, d}), Reshape(a, {n, 1, d})}, 1);
  return Reshape(stacked, {3 * n, d});
}

ModelOutput ReinformerModel::Forward(std::span<const TokenWindow> windows,
                                     std::mt19937_64* dropout_rng) const {
  const int64_t b = static_cast<int64_t>(windows.size());
  const int64_t k = config_.context;
  const int64_t n = b * k;
  const int64_t d = config_.hidden_dim;

  ModelOutput out;
  out.batch = b;
  out.context = k;
  out.valid.reserve(n);
  std::vector<uint8_t> token_valid;
  token_valid.reserve(3 * n);
  for (const TokenWindow& w : windows) {
    for (uint8_t v : w.valid) {
      out.valid.push_back(v);
      token_valid.insert(token_valid.end(), 3, v);
    }
  }

  Tensor x = LayerNorm(EmbedTokens(windows), embed_ln_gain_, embed_ln_bias_,
                       kLayerNormEps);
  const int heads = static_cast<int>(config_.n_heads);
  for (const DecoderBlockParams& block : blocks_) {
    Tensor attn = Dropout(CausalSelfAttention(x, block.attention, heads, b,
                                              3 * k, token_valid),
                          config_.dropout, dropout_rng);
    x = LayerNorm(Add(x, attn), block.ln1_gain, block.ln1_bias, kLayerNormEps);
    Tensor hidden = Gelu(Linear(x, block.fc1_weight, block.fc1_bias));
    Tensor mlp = Dropout(Linear(hidden, block.fc2_weight, block.fc2_bias),
                         config_.dropout, dropout_rng);
    x = LayerNorm(Add(x, mlp), block.ln2_gain, block.ln2_bias, kLayerNormEps);
  }

  Tensor per_step = Reshape(x, {n, 3, d});
  Tensor at_state = Reshape(Slice(per_step, 1, 0, 1), {n, d});
  Tensor at_return = Reshape(Slice(per_step, 1, 1, 1), {n, d});

  out.returns =
      Reshape(Linear(at_state, return_head_weight_, return_head_bias_), {n});
  if (config_.action_head == ActionHeadKind::kGaussian) {
    out.action_mean = Linear(at_return, mean_head_weight_, mean_head_bias_);
    out.action_log_std =
        Clamp(Linear(at_return, log_std_head_weight_, log_std_head_bias_),
              config_.log_std_min, config_.log_std_max);
  } else {
    out.action_logits = Linear(at_return, logits_head_weight_, logits_head_bias_);
  }
  return out;
}

ActionDistribution DistributionAt(const ModelOutput& output, int64_t row) {
  ActionDistribution dist;
  if (output.action_logits.defined()) {
    dist.kind = ActionHeadKind::kCategorical;
    const int64_t c = output.action_logits.dim(1);
    auto logits = output.action_logits.data().subspan(row * c, c);
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    dist.probs.resize(c);
    for (int64_t j = 0; j < c; ++j) total += (dist.probs[j] = std::exp(logits[j] - mx));
    for (double& p : dist.probs) p /= total;
    return dist;
  }
  dist.kind = ActionHeadKind::kGaussian;
  const int64_t a = output.action_mean.dim(1);
  auto mean = output.action_mean.data().subspan(row * a, a);
  auto log_std = output.action_log_std.data().subspan(row * a, a);
  dist.mean.assign(mean.begin(), mean.end());
  for (double ls : log_std) dist.std.push_back(std::exp(ls));
  return dist;
}

WindowPrediction ReinformerModel::Forward(const TokenWindow& window) const {
  ModelOutput out = Forward(std::span<const TokenWindow>(&window, 1));
  WindowPrediction pred;
  for (int64_t i = 0; i < config_.context; ++i) {
    pred.returns.push_back(out.returns.at(i) * config_.return_scale);
    pred.actions.push_back(DistributionAt(out, i));
  }
  return pred;
}

TokenWindow ReinformerModel::BuildInferenceWindow(
    std::span<const ContextStep> context, std::span<const double> state,
    int64_t timestep, double current_return) const {
  const int64_t k = config_.context;
  if (static_cast<int64_t>(context.size()) > k - 1) {
    throw ContractError("inference context holds " +
                        std::to_string(context.size()) +
                        " steps; at most K-1 = " + std::to_string(k - 1) +
                        " allowed");
  }
  if (static_cast<int64_t>(state.size()) != config_.state_dim) {
    throw DimensionError("state width " + std::to_string(state.size()) +
                         " != model state_dim " + std::to_string(config_.state_dim));
  }
  TokenWindow w = TokenWindow::Empty(k, config_.state_dim, config_.action_kind(),
                                     config_.action_width());
  const int64_t pad = k - 1 - static_cast<int64_t>(context.size());
  const int64_t sd = config_.state_dim;
  for (size_t i = 0; i < context.size(); ++i) {
    const int64_t slot = pad + static_cast<int64_t>(i);
    const ContextStep& step = context[i];
    if (static_cast<int64_t>(step.state.size()) != sd) {
      throw DimensionError("context state width mismatch");
    }
    std::copy(step.state.begin(), step.state.end(), w.states.begin() + slot * sd);
    w.returns[slot] = step.conditioned_return;
    w.SetAction(slot, step.action);
    w.timesteps[slot] = step.timestep;
    w.valid[slot] = 1;
  }
  const int64_t last = k - 1;
  std::copy(state.begin(), state.end(), w.states.begin() + last * sd);
  w.returns[last] = current_return;
  w.timesteps[last] = timestep;
  w.valid[last] = 1;
  return w;
}

double ReinformerModel::PredictReturn(std::span<const ContextStep> context,
                                      std::span<const double> state,
                                      int64_t timestep) const {
  NoGradGuard no_grad;
  TokenWindow w = BuildInferenceWindow(context, state, timestep, 0.0);
  ModelOutput out = Forward(std::span<const TokenWindow>(&w, 1));
  return out.returns.at(config_.context - 1) * config_.return_scale;
}

ActionDistribution ReinformerModel::PredictActionDistribution(
    std::span<const ContextStep> context, std::span<const double> state,
    int64_t timestep, double conditioned_return) const {
  NoGradGuard no_grad;
  TokenWindow w =
      BuildInferenceWindow(context, state, timestep, conditioned_return);
  ModelOutput out = Forward(std::span<const TokenWindow>(&w, 1));
  return DistributionAt(out, config_.context - 1);
}

Action ReinformerModel::PredictAction(std::span<const ContextStep> context,
                                      std::span<const double> state,
                                      int64_t timestep,
                                      double conditioned_return,
                                      ActionMode mode,
                                      std::mt19937_64* rng) const {
  ActionDistribution dist =
      PredictActionDistribution(context, state, timestep, conditioned_return);
  if (mode == ActionMode::kSample && rng == nullptr) {
    throw ContractError("sampling actions requires an rng");
  }
  if (dist.kind == ActionHeadKind::kCategorical) {
    if (mode == ActionMode::kGreedy) {
      return static_cast<int64_t>(
          std::max_element(dist.probs.begin(), dist.probs.end()) -
          dist.probs.begin());
    }
    std::discrete_distribution<int64_t> pick(dist.probs.begin(), dist.probs.end());
    return pick(*rng);
  }
  if (mode == ActionMode::kGreedy) return dist.mean;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(dist.mean.size());
  for (size_t i = 0; i < a.size(); ++i) a[i] = dist.mean[i] + dist.std[i] * normal(*rng);
  return a;
}

}  // namespace reinformer
