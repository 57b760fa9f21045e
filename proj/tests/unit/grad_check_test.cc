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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "reinformer/errors.h"
#include "reinformer/grad_check.h"
#include "reinformer/ops.h"

namespace reinformer {
namespace {

// Square with a backward rule that forgets the factor 2.
Tensor BrokenSquare(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= v;
  return internal::MakeResult("broken_square", x.shape(), std::move(out), {x},
                              [](internal::Node& self) {
                                internal::Node& in = *self.inputs[0];
                                auto& g = in.MutableGrad();
                                for (size_t i = 0; i < g.size(); ++i) {
                                  g[i] += self.grad[i] * in.value[i];
                                }
                              });
}

TEST(GradCheckTest, SumOfSquares) {
  auto f = [](const Tensor& x) { return Sum(Mul(x, x)); };
  EXPECT_LT(GradCheck(f, Tensor::FromData({3}, {1, 2, 3}), 1e-5), 1e-6);
}

TEST(GradCheckTest, NonFiniteIsNumericError) {
  auto f = [](const Tensor& x) { return Sum(Log(x)); };
  EXPECT_THROW(GradCheck(f, Tensor::FromData({2}, {-1.0, 1.0})), NumericError);
  EXPECT_THROW(GradCheck(f, Tensor::FromData({1}, {1.0}), 0.0), ContractError);
}

TEST(GradCheckTest, StandardSuitePasses) {
  const auto results = RunGradCheckSuite(StandardGradCheckCases(), 0, 3);
  ASSERT_GE(results.size(), 30u);
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.name << " error " << r.max_error;
    EXPECT_LT(r.max_error, 1e-4) << r.name;
  }
}

TEST(GradCheckTest, SuiteCoversRequiredOps) {
  std::vector<std::string> names;
  for (const auto& c : StandardGradCheckCases()) names.push_back(c.name);
  for (const char* required :
       {"add", "mul", "gelu", "relu", "softmax", "embedding_lookup", "concatenate", "slice",
        "mean", "tanh", "matmul_lhs", "layer_norm_input", "causal_self_attention",
        "expectile_loss_m0.99", "gaussian_nll_entropy_mean", "categorical_nll_entropy"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), required), names.end()) << required;
  }
}

TEST(GradCheckTest, WrongBackwardIsCaughtByName) {
  std::vector<GradCheckCase> cases = StandardGradCheckCases();
  cases.push_back({"broken_square", [](uint64_t seed) {
                     Tensor x = Tensor::FromData({3}, {0.5 + static_cast<double>(seed % 3), -1.0,
                                                       2.0});
                     return std::make_pair(ScalarFunction([](const Tensor& v) {
                                             return Sum(BrokenSquare(v));
                                           }),
                                           x);
                   }});
  const auto results = RunGradCheckSuite(cases, 0, 2);
  int failed = 0;
  for (const auto& r : results) {
    if (!r.passed) {
      ++failed;
      EXPECT_EQ(r.name, "broken_square");
    }
  }
  EXPECT_EQ(failed, 1);
}

}  // namespace
}  // namespace reinformer
