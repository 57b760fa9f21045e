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

// Expectile regression loss and a scalar expectile oracle.

#ifndef REINFORMER_EXPECTILE_H_
#define REINFORMER_EXPECTILE_H_

#include <cstdint>
#include <span>

#include "reinformer/tensor.h"

namespace reinformer {

struct ExpectileConfig {
  double m = 0.99;

  // Throws ConfigError unless 0 < m < 1.
  void Validate() const;
};

// |m - 1(delta < 0)| * delta^2 for a single residual delta = g - g_hat.
double ExpectileWeightedSquare(double delta, double m);

// Masked mean over valid entries of |m - 1(g - g_hat < 0)| (g - g_hat)^2.
// Differentiable in `predicted`; the gradient at g == g_hat is zero.
// `target` is treated as a constant. Throws ContractError when every entry is
// masked and DimensionError on size mismatch.
Tensor ExpectileLoss(const Tensor& predicted, const Tensor& target,
                     std::span<const uint8_t> mask, double m);

// The constant g_hat minimising the expectile loss over `values`, found by
// bisection on the first-order condition
//   m * sum_{g > g_hat} (g - g_hat) = (1 - m) * sum_{g <= g_hat} (g_hat - g)
// inside [min(values), max(values)] until the bracket is narrower than tol.
double ScalarExpectileFit(std::span<const double> values, double m,
                          double tol);

}  // namespace reinformer

#endif  // REINFORMER_EXPECTILE_H_
