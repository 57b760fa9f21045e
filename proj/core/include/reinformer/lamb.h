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

// Layer-wise adaptive moments (LAMB).

#ifndef REINFORMER_LAMB_H_
#define REINFORMER_LAMB_H_

#include <cstdint>
#include <span>
#include <vector>

#include "reinformer/tensor.h"

namespace reinformer {

struct LambState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double max_trust_ratio = 10.0;
  int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  // Sizes the moment buffers for `params`, zero filled.
  void Init(std::span<const Tensor> params);
};

// One update on every tensor in `params` from its accumulated gradient:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   u  = m_hat / (sqrt(v_hat) + eps) + wd * w
//   w <- w - lr * ratio * u,  ratio = clamp(|w| / |u|, 0, max_trust_ratio)
// with ratio = 1 when either norm is zero. Tensors flagged in `plain` (if
// given) skip both the trust ratio and weight decay, which reduces to Adam.
// Throws NumericError before touching anything if a gradient is non-finite.
void LambStep(std::span<Tensor> params, LambState& state, double lr,
              std::span<const uint8_t> plain = {});

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
double ClipGradNorm(std::span<Tensor> params, double max_norm);

}  // namespace reinformer

#endif  // REINFORMER_LAMB_H_
