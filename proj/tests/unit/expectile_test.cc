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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "reinformer/errors.h"
#include "reinformer/expectile.h"
#include "reinformer/grad_check.h"
#include "reinformer/ops.h"

namespace reinformer {
namespace {

TEST(ExpectileLossTest, HandEvaluatedExample) {
  Tensor pred = Tensor::FromData({2}, {0.5, 0.5});
  Tensor target = Tensor::FromData({2}, {1.0, 0.0});
  const uint8_t mask[] = {1, 1};
  EXPECT_NEAR(ExpectileLoss(pred, target, mask, 0.9).item(), 0.125, 1e-15);
}

TEST(ExpectileLossTest, ZeroResidualIsZero) {
  Tensor v = Tensor::FromData({3}, {0.3, -2.0, 7.0});
  const uint8_t mask[] = {1, 1, 1};
  EXPECT_EQ(ExpectileLoss(v, v, mask, 0.99).item(), 0.0);
}

TEST(ExpectileLossTest, SymmetricCaseIsHalfMse) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<double> p(50), g(50);
  double mse = 0.0;
  for (int i = 0; i < 50; ++i) {
    p[i] = n(rng);
    g[i] = n(rng);
    mse += (g[i] - p[i]) * (g[i] - p[i]) / 50.0;
  }
  std::vector<uint8_t> mask(50, 1);
  const double loss =
      ExpectileLoss(Tensor::FromData({50}, p), Tensor::FromData({50}, g), mask, 0.5).item();
  EXPECT_NEAR(loss, 0.5 * mse, 1e-14);
}

TEST(ExpectileLossTest, MaskedEntriesIgnoredAndEmptyMaskRejected) {
  Tensor pred = Tensor::FromData({3}, {0.5, 100.0, 0.5});
  Tensor target = Tensor::FromData({3}, {1.0, -100.0, 0.0});
  const uint8_t mask[] = {1, 0, 1};
  EXPECT_NEAR(ExpectileLoss(pred, target, mask, 0.9).item(), 0.125, 1e-15);
  const uint8_t none[] = {0, 0, 0};
  EXPECT_THROW(ExpectileLoss(pred, target, none, 0.9), ContractError);
}

TEST(ExpectileLossTest, InvalidMRejected) {
  EXPECT_THROW(ExpectileConfig{0.0}.Validate(), ConfigError);
  EXPECT_THROW(ExpectileConfig{1.0}.Validate(), ConfigError);
  EXPECT_NO_THROW(ExpectileConfig{0.99}.Validate());
}

TEST(ExpectileLossTest, UnderestimationWeightedByM) {
  // Target above prediction (delta > 0) carries weight m, below carries 1 - m.
  EXPECT_DOUBLE_EQ(ExpectileWeightedSquare(2.0, 0.9), 0.9 * 4.0);
  EXPECT_DOUBLE_EQ(ExpectileWeightedSquare(-2.0, 0.9), (1.0 - 0.9) * 4.0);
}

TEST(ExpectileLossTest, GradientAwayFromKink) {
  const std::vector<double> g = {1.0, -0.3, 0.7, 2.0};
  const std::vector<uint8_t> mask = {1, 1, 0, 1};
  for (double m : {0.5, 0.9, 0.99}) {
    auto f = [&](const Tensor& p) {
      return ExpectileLoss(p, Tensor::FromData({4}, g), mask, m);
    };
    EXPECT_LT(GradCheck(f, Tensor::FromData({4}, {0.2, 0.4, 0.1, 1.1})), 1e-6) << m;
  }
}

TEST(ScalarExpectileFitTest, Examples) {
  const std::vector<double> v = {0.0, 1.0};
  EXPECT_NEAR(ScalarExpectileFit(v, 0.5, 1e-12), 0.5, 1e-10);
  EXPECT_NEAR(ScalarExpectileFit(v, 0.9, 1e-12), 0.9, 1e-10);
  EXPECT_NEAR(ScalarExpectileFit(v, 0.999, 1e-12), 0.999, 1e-10);
}

TEST(ScalarExpectileFitTest, HalfIsMean) {
  const std::vector<double> v = {3.0, -1.0, 4.0, 1.5, 9.0};
  EXPECT_NEAR(ScalarExpectileFit(v, 0.5, 1e-12), 16.5 / 5.0, 1e-10);
}

TEST(ScalarExpectileFitTest, FirstOrderConditionHolds) {
  const std::vector<double> v = {0.1, 0.2, 0.9, 1.7, -0.4};
  for (double m : {0.2, 0.7, 0.95}) {
    const double e = ScalarExpectileFit(v, m, 1e-13);
    double grad = 0.0;
    for (double x : v) grad += (x > e ? m : 1.0 - m) * (x - e);
    EXPECT_NEAR(grad, 0.0, 1e-10) << m;
  }
}

TEST(ScalarExpectileFitTest, PropertiesOnRandomSets) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> count(1, 30);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(count(rng));
    for (double& x : v) x = u(rng);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double range = *hi - *lo;
    double prev = -1e300;
    for (double m : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999}) {
      const double e = ScalarExpectileFit(v, m, 1e-12);
      EXPECT_GE(e, *lo - 1e-9);
      EXPECT_LE(e, *hi + 1e-9);
      EXPECT_GE(e, prev - 1e-9);
      prev = e;
    }
    EXPECT_NEAR(ScalarExpectileFit(v, 1.0 - 1e-6, 1e-12), *hi, 1e-9 + 1e-3 * range);
  }
}

TEST(ScalarExpectileFitTest, RejectsBadInput) {
  EXPECT_THROW(ScalarExpectileFit({}, 0.5, 1e-9), ContractError);
  const std::vector<double> v = {1.0};
  EXPECT_THROW(ScalarExpectileFit(v, 1.0, 1e-9), ConfigError);
  EXPECT_DOUBLE_EQ(ScalarExpectileFit(v, 0.7, 1e-12), 1.0);
}

}  // namespace
}  // namespace reinformer
