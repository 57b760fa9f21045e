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

#ifndef REINFORMER_GRAD_CHECK_H_
#define REINFORMER_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reinformer/tensor.h"

namespace reinformer {

using ScalarFunction = std::function<Tensor(const Tensor&)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for the gradient of scalar-valued f at x. x is not modified.
// Throws ContractError for h <= 0 and NumericError when f is non-finite at a
// probe point.
double GradCheck(const ScalarFunction& f, const Tensor& x, double h = 1e-5);

struct GradCheckCase {
  std::string name;
  // Builds (f, x) for one random probe point.
  std::function<std::pair<ScalarFunction, Tensor>(uint64_t seed)> make;
};

struct GradCheckResult {
  std::string name;
  double max_error = 0.0;
  bool passed = false;
};

// One case per differentiable op and per loss term.
std::vector<GradCheckCase> StandardGradCheckCases();

// Runs every case at `points` random probe points each.
std::vector<GradCheckResult> RunGradCheckSuite(
    const std::vector<GradCheckCase>& cases, uint64_t seed, int points = 10,
    double h = 1e-5, double tolerance = 1e-4);

}  // namespace reinformer

#endif  // REINFORMER_GRAD_CHECK_H_
