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

// Differentiable tensor operations. Every function records a backward rule
// when an input requires grad (see tensor.h).
//
// Elementwise binary operations broadcast the smaller operand when its shape
// is a trailing suffix of the larger one (e.g. [D] against [N, D]) or when it
// holds a single element.

#ifndef REINFORMER_OPS_H_
#define REINFORMER_OPS_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "reinformer/tensor.h"

namespace reinformer {

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor AddScalar(const Tensor& x, double c);
Tensor Scale(const Tensor& x, double c);

// [M, K] x [K, N] -> [M, N].
Tensor MatMul(const Tensor& a, const Tensor& b);
// x [..., in] * weight [in, out] + bias [out] -> [..., out].
Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor Reshape(const Tensor& x, Shape shape);

Tensor Relu(const Tensor& x);
// Exact (erf-based) GELU.
Tensor Gelu(const Tensor& x);
Tensor Tanh(const Tensor& x);
Tensor Exp(const Tensor& x);
Tensor Log(const Tensor& x);
Tensor Square(const Tensor& x);
// Values outside [lo, hi] are clamped and receive zero gradient.
Tensor Clamp(const Tensor& x, double lo, double hi);

// Inverted dropout: zeroes entries with probability p and scales survivors by
// 1 / (1 - p). Identity when rng is null or p == 0.
Tensor Dropout(const Tensor& x, double p, std::mt19937_64* rng);

// Along the last axis.
Tensor Softmax(const Tensor& x);
Tensor LogSoftmax(const Tensor& x);

// Normalises over the last axis of x ([..., D]) then applies gain and bias.
Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps);

// Rows of table [V, D] selected by ids -> [ids.size(), D].
Tensor EmbeddingLookup(const Tensor& table, std::span<const int64_t> ids);

Tensor Concatenate(const std::vector<Tensor>& parts, int axis);
Tensor Slice(const Tensor& x, int axis, int64_t start, int64_t length);

Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);
// [..., D] -> [...].
Tensor SumLastAxis(const Tensor& x);
// Mean over entries whose mask value is nonzero. x and mask have equal size.
// Throws ContractError when no entry is valid.
Tensor MaskedMean(const Tensor& x, std::span<const uint8_t> mask);

// Fused multi-head attention core over `batch` sequences of length `seq`.
// q, k, v are [batch * seq, D]. Query i attends to keys j <= i; keys whose
// key_valid entry is zero are skipped except on the diagonal. An empty
// key_valid means every key is valid.
Tensor CausalAttention(const Tensor& q, const Tensor& k, const Tensor& v,
                       int64_t batch, int64_t seq, int heads,
                       std::span<const uint8_t> key_valid = {});

struct AttentionParams {
  Tensor qkv_weight;  // [D, 3D]
  Tensor qkv_bias;    // [3D]
  Tensor out_weight;  // [D, D]
  Tensor out_bias;    // [D]
};

// Projection to queries/keys/values, CausalAttention, output projection.
// x is [batch * seq, D]. Throws ConfigError when D % heads != 0.
Tensor CausalSelfAttention(const Tensor& x, const AttentionParams& params,
                           int heads, int64_t batch, int64_t seq,
                           std::span<const uint8_t> key_valid = {});

}  // namespace reinformer

#endif  // REINFORMER_OPS_H_
