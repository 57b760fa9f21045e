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

// Loss terms: entropy-regularised action likelihood, expectile return loss
// and the adaptive entropy temperature.

#ifndef REINFORMER_LOSSES_H_
#define REINFORMER_LOSSES_H_

#include <cstdint>
#include <span>

#include "reinformer/model.h"
#include "reinformer/seq_data.h"
#include "reinformer/tensor.h"

namespace reinformer {

// Per-row negative log-likelihood of the taken action and policy entropy.
struct PolicyTerms {
  Tensor nll;      // [N]
  Tensor entropy;  // [N]
};

// Diagonal Gaussian with mean/log_std [N, A] evaluated at actions [N, A].
PolicyTerms GaussianPolicyTerms(const Tensor& mean, const Tensor& log_std,
                                const Tensor& actions);
// Softmax over logits [N, C] evaluated at integer actions.
PolicyTerms CategoricalPolicyTerms(const Tensor& logits,
                                   std::span<const int64_t> actions);
// Dispatches on the head kind using the actions stored in the windows.
PolicyTerms PolicyTermsFor(const ModelOutput& output,
                           std::span<const TokenWindow> windows);

struct ActionLossResult {
  Tensor loss;              // scalar
  double mean_entropy = 0;  // over valid rows
  double mean_nll = 0;
};

// Masked mean of nll - lambda * entropy. lambda is a constant here.
ActionLossResult ActionLoss(const PolicyTerms& terms,
                            std::span<const uint8_t> valid, double lambda);

// Expectile loss of the return head against the windows' returns-to-go,
// both in the model's scaled units.
Tensor ReturnLoss(const ModelOutput& output,
                  std::span<const TokenWindow> windows, double m,
                  double return_scale);

struct TemperatureState {
  Tensor log_lambda;  // scalar leaf
  double beta = 0.0;  // target entropy

  static TemperatureState Create(double initial_lambda, double beta);
  double lambda() const;
};

// lambda * (entropy - beta) with entropy held constant; gradient reaches
// log_lambda only. Descent raises lambda while entropy is below beta.
Tensor TemperatureLoss(double entropy, const TemperatureState& temperature);

// -action_dim for Gaussian heads; fraction * log(action_count) for
// categorical heads.
double TargetEntropy(const ModelConfig& config, double discrete_fraction);

}  // namespace reinformer

#endif  // REINFORMER_LOSSES_H_
