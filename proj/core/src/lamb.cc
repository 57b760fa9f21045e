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

#include "reinformer/lamb.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "reinformer/errors.h"

namespace reinformer {

void LambState::Init(std::span<const Tensor> params) {
  first_moment.clear();
  second_moment.clear();
  for (const Tensor& p : params) {
    first_moment.emplace_back(p.size(), 0.0);
    second_moment.emplace_back(p.size(), 0.0);
  }
  step = 0;
}

void LambStep(std::span<Tensor> params, LambState& state, double lr,
              std::span<const uint8_t> plain) {
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("LAMB state tracks " +
                         std::to_string(state.first_moment.size()) +
                         " tensors but " + std::to_string(params.size()) +
                         " were given");
  }
  if (!plain.empty() && plain.size() != params.size()) {
    throw DimensionError("LAMB plain-flag count mismatch");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (static_cast<int64_t>(state.first_moment[i].size()) != params[i].size()) {
      throw DimensionError("LAMB moment shape mismatch for tensor " + std::to_string(i));
    }
    if (!params[i].has_grad()) continue;
    for (double g : params[i].node()->grad) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in tensor " + std::to_string(i) +
                           "; optimiser step aborted");
      }
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  std::vector<double> update;
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto w = p.mutable_data();
    const auto& grad = p.node()->grad;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const bool adaptive = plain.empty() || !plain[i];
    const double wd = adaptive ? state.weight_decay : 0.0;
    update.assign(w.size(), 0.0);
    double w_norm = 0.0, u_norm = 0.0;
    for (size_t j = 0; j < w.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      update[j] = m_hat / (std::sqrt(v_hat) + state.eps) + wd * w[j];
      w_norm += w[j] * w[j];
      u_norm += update[j] * update[j];
    }
    w_norm = std::sqrt(w_norm);
    u_norm = std::sqrt(u_norm);
    double ratio = 1.0;
    if (adaptive && w_norm > 0.0 && u_norm > 0.0) {
      ratio = std::clamp(w_norm / u_norm, 0.0, state.max_trust_ratio);
    }
    for (size_t j = 0; j < w.size(); ++j) w[j] -= lr * ratio * update[j];
  }
}

double ClipGradNorm(std::span<Tensor> params, double max_norm) {
  double total = 0.0;
  for (const Tensor& p : params) {
    for (double g : p.node()->grad) total += g * g;
  }
  total = std::sqrt(total);
  if (total > max_norm && total > 0.0) {
    const double scale = max_norm / total;
    for (Tensor& p : params) {
      for (double& g : p.node()->grad) g *= scale;
    }
  }
  return total;
}

}  // namespace reinformer
