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

// The max-return sequence model.
//
// Each timestep contributes three tokens in the order state, return, action.
// Every token is embedded by its own projection, summed with a learned
// absolute timestep embedding and fed through a stack of causal decoder
// blocks. The return head reads the output at the state token (so g_hat_t
// sees the history and s_t only) and the action head reads the output at the
// return token (history, s_t and g_t). The output at the action token is
// computed and ignored.

#ifndef REINFORMER_MODEL_H_
#define REINFORMER_MODEL_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reinformer/ops.h"
#include "reinformer/seq_data.h"
#include "reinformer/tensor.h"

namespace reinformer {

enum class ActionHeadKind { kGaussian, kCategorical };

struct ModelConfig {
  int64_t state_dim = 1;
  // Continuous action width for the Gaussian head, number of discrete
  // actions for the categorical head.
  int64_t action_dim = 1;
  ActionHeadKind action_head = ActionHeadKind::kGaussian;
  int64_t hidden_dim = 64;
  int64_t n_layers = 2;
  int64_t n_heads = 4;
  int64_t context = 5;  // K
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  int64_t max_timestep = 64;
  // Returns are divided by this before embedding; the return head predicts
  // in the same scaled units.
  double return_scale = 1.0;
  // Residual dropout after the attention projection and the MLP, active only
  // when Forward is given a random stream.
  double dropout = 0.1;

  // Throws ConfigError.
  void Validate() const;
  ActionKind action_kind() const {
    return action_head == ActionHeadKind::kCategorical ? ActionKind::kDiscrete
                                                       : ActionKind::kContinuous;
  }
  int64_t action_width() const {
    return action_head == ActionHeadKind::kCategorical ? 1 : action_dim;
  }

  bool operator==(const ModelConfig&) const = default;
};

struct ActionDistribution {
  ActionHeadKind kind = ActionHeadKind::kGaussian;
  std::vector<double> mean;   // Gaussian
  std::vector<double> std;    // Gaussian, diagonal
  std::vector<double> probs;  // categorical

  double Entropy() const;
};

// Batched forward result. N = batch * context rows, window-major.
struct ModelOutput {
  int64_t batch = 0;
  int64_t context = 0;
  Tensor returns;         // [N], scaled units
  Tensor action_mean;     // [N, A] (Gaussian)
  Tensor action_log_std;  // [N, A] (Gaussian, clamped)
  Tensor action_logits;   // [N, C] (categorical)
  std::vector<uint8_t> valid;  // N
};

// Single-window result in dataset units.
struct WindowPrediction {
  std::vector<double> returns;                 // K
  std::vector<ActionDistribution> actions;     // K
};

// A completed timestep kept as inference context.
struct ContextStep {
  std::vector<double> state;  // normalised
  double conditioned_return = 0.0;
  Action action;
  int64_t timestep = 0;
};

enum class ActionMode { kGreedy, kSample };

struct DecoderBlockParams {
  AttentionParams attention;
  Tensor ln1_gain, ln1_bias;
  Tensor fc1_weight, fc1_bias;  // [D, 4D], [4D]
  Tensor fc2_weight, fc2_bias;  // [4D, D], [D]
  Tensor ln2_gain, ln2_bias;
};

class ReinformerModel {
 public:
  // Truncated-normal (sigma 0.02) projections and embedding tables, zero
  // biases, unit layer-norm gains and an all-zero return head.
  ReinformerModel(const ModelConfig& config, uint64_t seed);

  // Copies would alias parameter storage; use Clone().
  ReinformerModel(const ReinformerModel&) = delete;
  ReinformerModel& operator=(const ReinformerModel&) = delete;
  ReinformerModel(ReinformerModel&&) = default;
  ReinformerModel& operator=(ReinformerModel&&) = default;

  const ModelConfig& config() const { return config_; }

  // Stable names, fixed order.
  const std::vector<std::pair<std::string, Tensor>>& NamedParameters() const {
    return named_;
  }
  std::vector<Tensor> Parameters() const;
  int64_t ParameterCount() const;

  // Deep copy with independent parameter storage.
  ReinformerModel Clone() const;
  // Copies values by name; throws DimensionError on missing or misshaped
  // tensors.
  void LoadParameters(
      const std::vector<std::pair<std::string, Tensor>>& tensors);

  // Pre-decoder token matrix [B * 3K, D] in s, g, a order per step, each row
  // the type embedding plus the timestep embedding.
  Tensor EmbedTokens(std::span<const TokenWindow> windows) const;

  // Training passes `dropout_rng`; inference leaves it null.
  ModelOutput Forward(std::span<const TokenWindow> windows,
                      std::mt19937_64* dropout_rng = nullptr) const;
  WindowPrediction Forward(const TokenWindow& window) const;

  // Return-head prediction at the current state, in dataset units.
  // `context` holds at most K - 1 completed steps, oldest first.
  double PredictReturn(std::span<const ContextStep> context,
                       std::span<const double> state, int64_t timestep) const;

  ActionDistribution PredictActionDistribution(
      std::span<const ContextStep> context, std::span<const double> state,
      int64_t timestep, double conditioned_return) const;

  // Greedy = Gaussian mean or categorical argmax; kSample draws from rng.
  Action PredictAction(std::span<const ContextStep> context,
                       std::span<const double> state, int64_t timestep,
                       double conditioned_return, ActionMode mode,
                       std::mt19937_64* rng) const;

  // Inference window: context steps followed by the current state with its
  // return slot set to `current_return` and a zeroed action slot.
  TokenWindow BuildInferenceWindow(std::span<const ContextStep> context,
                                   std::span<const double> state,
                                   int64_t timestep,
                                   double current_return) const;

 private:
  void Register(std::string name, Tensor* slot);
  void CheckWindow(const TokenWindow& window) const;

  ModelConfig config_;

  Tensor state_weight_, state_bias_;
  Tensor return_weight_, return_bias_;
  Tensor action_weight_, action_bias_;  // [A, D] linear or [C, D] table
  Tensor timestep_table_;
  Tensor embed_ln_gain_, embed_ln_bias_;
  std::vector<DecoderBlockParams> blocks_;
  Tensor return_head_weight_, return_head_bias_;
  Tensor mean_head_weight_, mean_head_bias_;
  Tensor log_std_head_weight_, log_std_head_bias_;
  Tensor logits_head_weight_, logits_head_bias_;

  std::vector<std::pair<std::string, Tensor>> named_;
};

// Distribution for one row of a batched output.
ActionDistribution DistributionAt(const ModelOutput& output, int64_t row);

}  // namespace reinformer

#endif  // REINFORMER_MODEL_H_
