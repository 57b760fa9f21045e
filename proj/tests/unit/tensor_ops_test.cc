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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "reinformer/errors.h"
#include "reinformer/ops.h"
#include "reinformer/tensor.h"

namespace reinformer {
namespace {

std::vector<double> Values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor RandomTensor(Shape shape, uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = n(rng);
  return Tensor::FromData(std::move(shape), std::move(v));
}

TEST(TensorTest, ShapeAndDataInvariant) {
  Tensor t = Tensor::Zeros({2, 3});
  EXPECT_EQ(t.size(), 6);
  EXPECT_EQ(t.rank(), 2);
  EXPECT_EQ(t.dim(-1), 3);
  EXPECT_THROW(Tensor::FromData({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor::Zeros({0, 2}), DimensionError);
}

TEST(MatMulTest, IdentityLeavesMatrixUnchanged) {
  Tensor eye = Tensor::FromData({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::FromData({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(Values(MatMul(eye, m)), (std::vector<double>{1, 2, 3, 4}));
}

TEST(MatMulTest, ProjectorSelectsRow) {
  Tensor p = Tensor::FromData({2, 2}, {1, 0, 0, 0});
  Tensor m = Tensor::FromData({2, 2}, {5, 6, 7, 8});
  EXPECT_EQ(Values(MatMul(p, m)), (std::vector<double>{5, 6, 0, 0}));
}

TEST(MatMulTest, HandEvaluatedProduct) {
  Tensor a = Tensor::FromData({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::FromData({2, 1}, {2, 1});
  Tensor c = MatMul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(Values(c), (std::vector<double>{4, 10}));
}

TEST(MatMulTest, MismatchNamesBothShapes) {
  try {
    MatMul(Tensor::Zeros({2, 3}), Tensor::Zeros({2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2, 3]"), std::string::npos) << e.what();
  }
}

TEST(LayerNormTest, ConstantInputGivesBias) {
  Tensor y = LayerNorm(Tensor::FromData({3}, {1, 1, 1}), Tensor::Full({3}, 1.0),
                       Tensor::Zeros({3}), 1e-5);
  for (double v : y.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(LayerNormTest, SymmetricPair) {
  Tensor y = LayerNorm(Tensor::FromData({2}, {0, 2}), Tensor::Full({2}, 1.0),
                       Tensor::Zeros({2}), 1e-12);
  EXPECT_NEAR(y.at(0), -1.0, 1e-9);
  EXPECT_NEAR(y.at(1), 1.0, 1e-9);
}

TEST(LayerNormTest, HandEvaluatedAffine) {
  Tensor y = LayerNorm(Tensor::FromData({3}, {1, 2, 3}), Tensor::Full({3}, 2.0),
                       Tensor::Full({3}, 1.0), 1e-5);
  // sigma = sqrt(2/3 + eps)
  const double sigma = std::sqrt(2.0 / 3.0 + 1e-5);
  EXPECT_NEAR(y.at(0), 1.0 - 2.0 / sigma, 1e-12);
  EXPECT_NEAR(y.at(1), 1.0, 1e-12);
  EXPECT_NEAR(y.at(2), 1.0 + 2.0 / sigma, 1e-12);
  EXPECT_NEAR(y.at(0), -1.449, 1e-3);
  EXPECT_NEAR(y.at(2), 3.449, 1e-3);
}

TEST(LayerNormTest, RowMeansVanish) {
  Tensor x = RandomTensor({20, 16}, 3, 5.0);
  Tensor y = LayerNorm(x, Tensor::Full({16}, 1.0), Tensor::Zeros({16}), 1e-5);
  for (int r = 0; r < 20; ++r) {
    double mean = 0.0;
    for (int c = 0; c < 16; ++c) mean += y.at(r * 16 + c) / 16.0;
    EXPECT_LT(std::abs(mean), 1e-10);
  }
}

TEST(SoftmaxTest, RowsSumToOne) {
  Tensor p = Softmax(RandomTensor({30, 7}, 4, 10.0));
  for (int r = 0; r < 30; ++r) {
    double s = 0.0;
    for (int c = 0; c < 7; ++c) s += p.at(r * 7 + c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SoftmaxTest, Examples) {
  Tensor u = Softmax(Tensor::FromData({4}, {3, 3, 3, 3}));
  for (double v : u.data()) EXPECT_DOUBLE_EQ(v, 0.25);
  Tensor two = Softmax(Tensor::FromData({2}, {0, std::log(3.0)}));
  EXPECT_NEAR(two.at(0), 0.25, 1e-15);
  EXPECT_NEAR(two.at(1), 0.75, 1e-15);
  Tensor big = Softmax(Tensor::FromData({2}, {1000, 0}));
  EXPECT_DOUBLE_EQ(big.at(0), 1.0);
}

TEST(ElementwiseTest, AddExamples) {
  EXPECT_EQ(Values(Add(Tensor::FromData({2}, {1, 2}), Tensor::FromData({2}, {3, 4}))),
            (std::vector<double>{4, 6}));
  EXPECT_EQ(Values(Add(Tensor::FromData({2, 2}, {1, 2, 3, 4}), Tensor::FromData({2}, {10, 20}))),
            (std::vector<double>{11, 22, 13, 24}));
  EXPECT_EQ(Values(Add(Tensor::FromData({3}, {1, 2, 3}), Tensor::Scalar(1))),
            (std::vector<double>{2, 3, 4}));
  EXPECT_THROW(Add(Tensor::Zeros({2, 3}), Tensor::Zeros({2})), DimensionError);
}

TEST(ElementwiseTest, MulExamples) {
  EXPECT_EQ(Values(Mul(Tensor::FromData({2}, {2, 3}), Tensor::FromData({2}, {4, 5}))),
            (std::vector<double>{8, 15}));
  EXPECT_EQ(Values(Mul(Tensor::FromData({2}, {2, 3}), Tensor::Zeros({2}))),
            (std::vector<double>{0, 0}));
  EXPECT_EQ(Values(Mul(Tensor::Scalar(-1), Tensor::FromData({2}, {2, 3}))),
            (std::vector<double>{-2, -3}));
}

TEST(ElementwiseTest, GeluExamples) {
  Tensor y = Gelu(Tensor::FromData({3}, {0.0, 1.0, -1.0}));
  EXPECT_EQ(y.at(0), 0.0);
  EXPECT_NEAR(y.at(1), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(y.at(2), -0.15865525393145707, 1e-15);
}

TEST(ElementwiseTest, ReluExamples) {
  EXPECT_EQ(Values(Relu(Tensor::FromData({3}, {-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
  Tensor x = Tensor::FromData({2}, {-3, 4}, true);
  Backward(Sum(Relu(x)));
  EXPECT_EQ(x.grad(), (std::vector<double>{0, 1}));
}

TEST(ElementwiseTest, TanhExamples) {
  Tensor y = Tanh(Tensor::FromData({3}, {0, 100, -100}));
  EXPECT_EQ(y.at(0), 0.0);
  EXPECT_DOUBLE_EQ(y.at(1), 1.0);
  EXPECT_DOUBLE_EQ(y.at(2), -1.0);
}

TEST(ElementwiseTest, ClampZeroGradientOutside) {
  Tensor x = Tensor::FromData({3}, {-10, 0.5, 10}, true);
  Tensor y = Clamp(x, -1, 1);
  EXPECT_EQ(Values(y), (std::vector<double>{-1, 0.5, 1}));
  Backward(Sum(y));
  EXPECT_EQ(x.grad(), (std::vector<double>{0, 1, 0}));
}

TEST(EmbeddingTest, Examples) {
  Tensor table = Tensor::FromData({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  const int64_t ids[] = {2, 0, 2};
  Tensor e = EmbeddingLookup(table, ids);
  EXPECT_EQ(Values(e), (std::vector<double>{5, 6, 1, 2, 5, 6}));
  Backward(Sum(e));
  EXPECT_EQ(table.grad(), (std::vector<double>{1, 1, 0, 0, 2, 2}));
  const int64_t bad[] = {3};
  EXPECT_THROW(EmbeddingLookup(table, bad), DimensionError);
}

TEST(ConcatSliceTest, Examples) {
  Tensor a = Tensor::FromData({2, 1}, {1, 2});
  Tensor b = Tensor::FromData({2, 2}, {3, 4, 5, 6});
  EXPECT_EQ(Values(Concatenate({a, b}, 1)), (std::vector<double>{1, 3, 4, 2, 5, 6}));
  EXPECT_EQ(Values(Concatenate({a, a}, 0)), (std::vector<double>{1, 2, 1, 2}));
  Tensor m = Tensor::FromData({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(Values(Slice(m, 1, 1, 2)), (std::vector<double>{2, 3, 5, 6}));
  EXPECT_EQ(Values(Slice(m, 0, 1, 1)), (std::vector<double>{4, 5, 6}));
  EXPECT_THROW(Slice(m, 1, 2, 2), DimensionError);
}

TEST(ReductionTest, MeanExamples) {
  EXPECT_DOUBLE_EQ(Mean(Tensor::FromData({4}, {1, 2, 3, 4})).item(), 2.5);
  EXPECT_DOUBLE_EQ(Mean(Tensor::Scalar(7)).item(), 7.0);
  Tensor x = Tensor::FromData({4}, {1, 2, 3, 4}, true);
  Backward(Mean(x));
  EXPECT_EQ(x.grad(), (std::vector<double>(4, 0.25)));
}

TEST(ReductionTest, MaskedMeanSkipsMaskedAndRejectsEmpty) {
  const uint8_t mask[] = {1, 0, 1};
  EXPECT_DOUBLE_EQ(MaskedMean(Tensor::FromData({3}, {1, 100, 3}), mask).item(), 2.0);
  const uint8_t none[] = {0, 0, 0};
  EXPECT_THROW(MaskedMean(Tensor::Zeros({3}), none), ContractError);
}

TEST(BackwardTest, SumGivesOnes) {
  Tensor x = Tensor::FromData({3}, {1, 2, 3}, true);
  Backward(Sum(x));
  EXPECT_EQ(x.grad(), (std::vector<double>{1, 1, 1}));
}

TEST(BackwardTest, SumOfSquares) {
  Tensor x = Tensor::FromData({2}, {1, -2}, true);
  Backward(Sum(Mul(x, x)));
  EXPECT_EQ(x.grad(), (std::vector<double>{2, -4}));
}

TEST(BackwardTest, AccumulatesAcrossCallsUntilZeroed) {
  Tensor x = Tensor::FromData({2}, {1, 2}, true);
  Backward(Sum(x));
  Backward(Sum(Scale(x, 2.0)));
  EXPECT_EQ(x.grad(), (std::vector<double>{3, 3}));
  x.ZeroGrad();
  EXPECT_EQ(x.grad(), (std::vector<double>{0, 0}));
}

TEST(BackwardTest, NonScalarLossIsContractError) {
  Tensor x = Tensor::FromData({2}, {1, 2}, true);
  EXPECT_THROW(Backward(Scale(x, 2.0)), ContractError);
}

TEST(BackwardTest, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::FromData({2}, {1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = Sum(Mul(x, x));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(GradRecordingEnabled());
}

TEST(TapeTest, TopologicalOrder) {
  Tensor x = RandomTensor({4, 3}, 1);
  x.set_requires_grad(true);
  Tensor w = RandomTensor({3, 3}, 2);
  w.set_requires_grad(true);
  Tensor h = Tanh(MatMul(x, w));
  Tensor loss = Sum(Add(Mul(h, h), MatMul(h, w)));
  Tape tape = Tape::Record(loss);
  EXPECT_TRUE(tape.IsTopologicallyOrdered());
  EXPECT_GE(tape.entries().size(), 5u);
  EXPECT_EQ(tape.entries().back().output_id, loss.node()->id);
}

AttentionParams RandomAttention(int64_t d, uint64_t seed) {
  return {RandomTensor({d, 3 * d}, seed, 0.3), RandomTensor({3 * d}, seed + 1, 0.1),
          RandomTensor({d, d}, seed + 2, 0.3), RandomTensor({d}, seed + 3, 0.1)};
}

TEST(AttentionTest, SingleTokenReturnsValueProjection) {
  const int64_t d = 4;
  AttentionParams p = RandomAttention(d, 10);
  Tensor x = RandomTensor({1, d}, 11);
  Tensor y = CausalSelfAttention(x, p, 2, 1, 1);
  // With one position the attention weight is 1: y = (x Wv + bv) Wo + bo.
  Tensor qkv = Linear(x, p.qkv_weight, p.qkv_bias);
  Tensor v = Slice(qkv, 1, 2 * d, d);
  Tensor expected = Linear(v, p.out_weight, p.out_bias);
  for (int i = 0; i < d; ++i) EXPECT_NEAR(y.at(i), expected.at(i), 1e-14);
}

TEST(AttentionTest, FutureChangesLeavePastBitwiseEqual) {
  const int64_t d = 8, t = 6;
  AttentionParams p = RandomAttention(d, 20);
  Tensor x = RandomTensor({t, d}, 21);
  Tensor y = CausalSelfAttention(x, p, 2, 1, t);
  for (int pos = 0; pos < t - 1; ++pos) {
    std::vector<double> changed = Values(x);
    for (int64_t j = (pos + 1) * d; j < t * d; ++j) changed[j] += 3.0;
    Tensor y2 = CausalSelfAttention(Tensor::FromData({t, d}, changed), p, 2, 1, t);
    for (int64_t j = 0; j < (pos + 1) * d; ++j) ASSERT_EQ(y.at(j), y2.at(j));
  }
}

TEST(AttentionTest, IdenticalTokensGiveUniformWeights) {
  // Identical keys give equal scores, so query t averages t + 1 values.
  const int64_t t = 5, d = 2;
  std::vector<double> q(t * d, 0.7), k(t * d, -0.2), v(t * d);
  for (int i = 0; i < t * d; ++i) v[i] = static_cast<double>(i);
  Tensor out = CausalAttention(Tensor::FromData({t, d}, q), Tensor::FromData({t, d}, k),
                               Tensor::FromData({t, d}, v), 1, t, 1);
  for (int64_t row = 0; row < t; ++row) {
    for (int64_t c = 0; c < d; ++c) {
      double mean = 0.0;
      for (int64_t j = 0; j <= row; ++j) mean += v[j * d + c] / static_cast<double>(row + 1);
      EXPECT_NEAR(out.at(row * d + c), mean, 1e-12);
    }
  }
}

TEST(AttentionTest, HeadsMustDivideWidth) {
  AttentionParams p = RandomAttention(6, 30);
  EXPECT_THROW(CausalSelfAttention(RandomTensor({2, 6}, 31), p, 4, 1, 2), ConfigError);
}

TEST(AttentionTest, MaskedKeysAreIgnored) {
  const int64_t t = 4, d = 4;
  AttentionParams p = RandomAttention(d, 40);
  Tensor x = RandomTensor({t, d}, 41);
  const uint8_t valid[] = {0, 0, 1, 1};
  Tensor y = CausalSelfAttention(x, p, 2, 1, t, valid);
  std::vector<double> changed = Values(x);
  for (int j = 0; j < 2 * d; ++j) changed[j] = -5.0 + j;
  Tensor y2 = CausalSelfAttention(Tensor::FromData({t, d}, changed), p, 2, 1, t, valid);
  for (int64_t j = 2 * d; j < t * d; ++j) EXPECT_EQ(y.at(j), y2.at(j));
}

TEST(DropoutTest, IdentityWithoutRngAndScaledWithIt) {
  Tensor x = Tensor::Full({1000}, 1.0);
  EXPECT_EQ(Dropout(x, 0.5, nullptr).node(), x.node());
  std::mt19937_64 rng(1);
  Tensor y = Dropout(x, 0.25, &rng);
  int zeros = 0;
  for (double v : y.data()) {
    if (v == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
  }
  EXPECT_GT(zeros, 180);
  EXPECT_LT(zeros, 320);
}

TEST(DeterminismTest, SameInputsSameBits) {
  AttentionParams p = RandomAttention(8, 50);
  Tensor x = RandomTensor({6, 8}, 51);
  EXPECT_EQ(Values(CausalSelfAttention(x, p, 2, 2, 3)),
            Values(CausalSelfAttention(x, p, 2, 2, 3)));
}

}  // namespace
}  // namespace reinformer
