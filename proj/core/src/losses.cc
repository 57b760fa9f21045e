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

#include "reinformer/losses.h"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "reinformer/errors.h"
#include "reinformer/expectile.h"
#include "reinformer/ops.h"

namespace reinformer {

PolicyTerms GaussianPolicyTerms(const Tensor& mean, const Tensor& log_std,
                                const Tensor& actions) {
  if (mean.shape() != log_std.shape() || mean.shape() != actions.shape() ||
      mean.rank() != 2) {
    throw DimensionError("gaussian policy: mean " + ShapeToString(mean.shape()) +
                         ", log_std " + ShapeToString(log_std.shape()) +
                         ", actions " + ShapeToString(actions.shape()));
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const double half_log_2pie =
      0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  const double width = static_cast<double>(mean.dim(1));
  Tensor z = Mul(Sub(actions, mean), Exp(Scale(log_std, -1.0)));
  Tensor per_dim = Add(Scale(Square(z), 0.5), log_std);
  PolicyTerms terms;
  terms.nll = AddScalar(SumLastAxis(per_dim), width * half_log_2pi);
  terms.entropy = AddScalar(SumLastAxis(log_std), width * half_log_2pie);
  return terms;
}

PolicyTerms CategoricalPolicyTerms(const Tensor& logits,
                                   std::span<const int64_t> actions) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<int64_t>(actions.size())) {
    throw DimensionError("categorical policy: logits " +
                         ShapeToString(logits.shape()) + " vs " +
                         std::to_string(actions.size()) + " actions");
  }
  const int64_t n = logits.dim(0), c = logits.dim(1);
  std::vector<double> one_hot(n * c, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    if (actions[i] < 0 || actions[i] >= c) {
      throw DimensionError("action id " + std::to_string(actions[i]) +
                           " outside [0, " + std::to_string(c) + ")");
    }
    one_hot[i * c + actions[i]] = 1.0;
  }
  Tensor log_probs = LogSoftmax(logits);
  PolicyTerms terms;
  terms.nll = Scale(
      SumLastAxis(Mul(log_probs, Tensor::FromData({n, c}, std::move(one_hot)))),
      -1.0);
  terms.entropy = Scale(SumLastAxis(Mul(Softmax(logits), log_probs)), -1.0);
  return terms;
}

PolicyTerms PolicyTermsFor(const ModelOutput& output,
                           std::span<const TokenWindow> windows) {
  const int64_t n = output.batch * output.context;
  if (output.action_logits.defined()) {
    std::vector<int64_t> ids;
    ids.reserve(n);
    for (const TokenWindow& w : windows) {
      ids.insert(ids.end(), w.action_ids.begin(), w.action_ids.end());
    }
    return CategoricalPolicyTerms(output.action_logits, ids);
  }
  const int64_t a = output.action_mean.dim(1);
  std::vector<double> acts;
  acts.reserve(n * a);
  for (const TokenWindow& w : windows) {
    acts.insert(acts.end(), w.actions.begin(), w.actions.end());
  }
  return GaussianPolicyTerms(output.action_mean, output.action_log_std,
                             Tensor::FromData({n, a}, std::move(acts)));
}

ActionLossResult ActionLoss(const PolicyTerms& terms,
                            std::span<const uint8_t> valid, double lambda) {
  ActionLossResult result;
  result.loss = MaskedMean(Sub(terms.nll, Scale(terms.entropy, lambda)), valid);
  NoGradGuard no_grad;
  result.mean_entropy = MaskedMean(terms.entropy.Detach(), valid).item();
  result.mean_nll = MaskedMean(terms.nll.Detach(), valid).item();
  return result;
}

Tensor ReturnLoss(const ModelOutput& output,
                  std::span<const TokenWindow> windows, double m,
                  double return_scale) {
  std::vector<double> targets;
  targets.reserve(output.batch * output.context);
  for (const TokenWindow& w : windows) {
    for (double g : w.returns) targets.push_back(g / return_scale);
  }
  const int64_t n = static_cast<int64_t>(targets.size());
  return ExpectileLoss(output.returns, Tensor::FromData({n}, std::move(targets)),
                       output.valid, m);
}

TemperatureState TemperatureState::Create(double initial_lambda, double beta) {
  if (!(initial_lambda > 0.0)) {
    throw ConfigError("initial temperature must be positive");
  }
  TemperatureState t;
  t.log_lambda = Tensor::Scalar(std::log(initial_lambda), true);
  t.beta = beta;
  return t;
}

double TemperatureState::lambda() const { return std::exp(log_lambda.item()); }

Tensor TemperatureLoss(double entropy, const TemperatureState& temperature) {
  return Scale(Exp(temperature.log_lambda), entropy - temperature.beta);
}

double TargetEntropy(const ModelConfig& config, double discrete_fraction) {
  if (config.action_head == ActionHeadKind::kGaussian) {
    return -static_cast<double>(config.action_dim);
  }
  return discrete_fraction * std::log(static_cast<double>(config.action_dim));
}

}  // namespace reinformer
