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

#include "reinformer/grad_check.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "reinformer/errors.h"
#include "reinformer/expectile.h"
#include "reinformer/losses.h"
#include "reinformer/ops.h"

namespace reinformer {

double GradCheck(const ScalarFunction& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ContractError("grad_check: h must be positive");
  Tensor leaf = Tensor::FromData(x.shape(), {x.data().begin(), x.data().end()},
                                 /*requires_grad=*/true);
  Tensor y = f(leaf);
  if (y.size() != 1) throw ContractError("grad_check: f must be scalar valued");
  if (!std::isfinite(y.item())) throw NumericError("grad_check: f is non-finite");
  Backward(y);
  const std::vector<double> analytic = leaf.grad();

  NoGradGuard no_grad;
  std::vector<double> probe(x.data().begin(), x.data().end());
  double worst = 0.0;
  for (size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(Tensor::FromData(x.shape(), probe)).item();
    probe[i] = saved - h;
    const double down = f(Tensor::FromData(x.shape(), probe)).item();
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: f is non-finite at a probe point");
    }
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) /
                                std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

namespace {

using Rng = std::mt19937_64;

std::vector<double> Normal(Rng& rng, int64_t n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Normal draws pushed at least `gap` away from every point in `kinks`.
std::vector<double> AwayFrom(Rng& rng, int64_t n, std::vector<double> kinks,
                             double gap) {
  std::vector<double> v = Normal(rng, n);
  for (double& x : v) {
    for (double k : kinks) {
      if (std::abs(x - k) < gap) x = k + (x < k ? -gap : gap);
    }
  }
  return v;
}

Tensor Random(Rng& rng, Shape shape, double scale = 1.0) {
  const int64_t n = NumElements(shape);
  return Tensor::FromData(std::move(shape), Normal(rng, n, scale));
}

// Reduces any output to a scalar with fixed random weights so every output
// coordinate reaches the gradient.
Tensor Project(const Tensor& y, const Tensor& weights) {
  return Sum(Mul(y, weights));
}

using Make = std::function<std::pair<ScalarFunction, Tensor>(uint64_t)>;

// Case for a unary op y = op(x) with x ~ N(0, 1).
GradCheckCase Unary(std::string name, Shape shape,
                    std::function<Tensor(const Tensor&)> op,
                    std::vector<double> kinks = {}) {
  Make make = [shape, op, kinks](uint64_t seed) {
    Rng rng(seed);
    const int64_t n = NumElements(shape);
    Tensor x = Tensor::FromData(shape, kinks.empty() ? Normal(rng, n)
                                                     : AwayFrom(rng, n, kinks, 0.05));
    Tensor probe = op(x);
    Tensor w = Random(rng, probe.shape());
    ScalarFunction f = [op, w](const Tensor& t) { return Project(op(t), w); };
    return std::make_pair(f, x);
  };
  return {std::move(name), std::move(make)};
}

// Case for a binary op with the probed operand first or second.
GradCheckCase Binary(std::string name, Shape probed, Shape other,
                     std::function<Tensor(const Tensor&, const Tensor&)> op,
                     bool probe_first) {
  Make make = [probed, other, op, probe_first](uint64_t seed) {
    Rng rng(seed);
    Tensor x = Random(rng, probed);
    Tensor y = Random(rng, other);
    auto apply = [op, y, probe_first](const Tensor& t) {
      return probe_first ? op(t, y) : op(y, t);
    };
    Tensor w = Random(rng, apply(x).shape());
    ScalarFunction f = [apply, w](const Tensor& t) { return Project(apply(t), w); };
    return std::make_pair(f, x);
  };
  return {std::move(name), std::move(make)};
}

}  // namespace

std::vector<GradCheckCase> StandardGradCheckCases() {
  std::vector<GradCheckCase> cases;
  cases.push_back(Binary("add", {3, 4}, {3, 4}, Add, true));
  cases.push_back(Binary("add_broadcast", {4}, {3, 4}, Add, false));
  cases.push_back(Binary("sub", {3, 4}, {3, 4}, Sub, false));
  cases.push_back(Binary("mul", {3, 4}, {3, 4}, Mul, true));
  cases.push_back(Binary("mul_broadcast", {4}, {3, 4}, Mul, false));
  cases.push_back(Unary("add_scalar", {5}, [](const Tensor& x) { return AddScalar(x, 0.7); }));
  cases.push_back(Unary("scale", {5}, [](const Tensor& x) { return Scale(x, -1.3); }));
  cases.push_back(Binary("matmul_lhs", {3, 4}, {4, 2}, MatMul, true));
  cases.push_back(Binary("matmul_rhs", {4, 2}, {3, 4}, MatMul, false));
  {
    Make make = [](uint64_t seed) {
      Rng rng(seed);
      Tensor x = Random(rng, {2, 3, 4});
      Tensor w = Random(rng, {4, 5});
      Tensor b = Random(rng, {5});
      Tensor p = Random(rng, {2, 3, 5});
      // Probe the weight; x and b enter through the same rule.
      ScalarFunction f = [x, b, p](const Tensor& t) { return Project(Linear(x, t, b), p); };
      return std::make_pair(f, w);
    };
    cases.push_back({"linear_weight", make});
    Make make_x = [](uint64_t seed) {
      Rng rng(seed);
      Tensor x = Random(rng, {2, 3, 4});
      Tensor w = Random(rng, {4, 5});
      Tensor b = Random(rng, {5});
      Tensor p = Random(rng, {2, 3, 5});
      ScalarFunction f = [w, b, p](const Tensor& t) { return Project(Linear(t, w, b), p); };
      return std::make_pair(f, x);
    };
    cases.push_back({"linear_input", make_x});
    Make make_b = [](uint64_t seed) {
      Rng rng(seed);
      Tensor x = Random(rng, {2, 3, 4});
      Tensor w = Random(rng, {4, 5});
      Tensor b = Random(rng, {5});
      Tensor p = Random(rng, {2, 3, 5});
      ScalarFunction f = [x, w, p](const Tensor& t) { return Project(Linear(x, w, t), p); };
      return std::make_pair(f, b);
    };
    cases.push_back({"linear_bias", make_b});
  }
  cases.push_back(Unary("reshape", {2, 6}, [](const Tensor& x) { return Reshape(x, {3, 4}); }));
  cases.push_back(Unary("relu", {8}, Relu, {0.0}));
  cases.push_back(Unary("gelu", {8}, Gelu));
  cases.push_back(Unary("tanh", {8}, Tanh));
  cases.push_back(Unary("exp", {8}, Exp));
  cases.push_back(Unary("log", {8}, [](const Tensor& x) { return Log(AddScalar(Square(x), 0.5)); }));
  cases.push_back(Unary("square", {8}, Square));
  cases.push_back(Unary("clamp", {8}, [](const Tensor& x) { return Clamp(x, -0.8, 0.9); },
                        {-0.8, 0.9}));
  cases.push_back(Unary("softmax", {3, 5}, Softmax));
  cases.push_back(Unary("log_softmax", {3, 5}, LogSoftmax));
  cases.push_back(Unary("sum", {2, 3}, Sum));
  cases.push_back(Unary("mean", {2, 3}, Mean));
  cases.push_back(Unary("sum_last_axis", {2, 3}, SumLastAxis));
  cases.push_back(Unary("masked_mean", {6}, [](const Tensor& x) {
    static const uint8_t mask[6] = {1, 0, 1, 1, 0, 1};
    return MaskedMean(x, mask);
  }));
  cases.push_back(Unary("slice", {4, 5}, [](const Tensor& x) { return Slice(x, 1, 1, 3); }));
  cases.push_back(Binary("concatenate", {2, 3}, {2, 4},
                         [](const Tensor& a, const Tensor& b) { return Concatenate({a, b}, 1); },
                         true));
  cases.push_back(Binary("concatenate_rows", {3, 4}, {2, 4},
                         [](const Tensor& a, const Tensor& b) { return Concatenate({b, a}, 0); },
                         true));
  cases.push_back(Unary("embedding_lookup", {5, 3}, [](const Tensor& table) {
    static const int64_t ids[4] = {2, 0, 2, 4};
    return EmbeddingLookup(table, ids);
  }));
  {
    Make make = [](uint64_t seed) {
      Rng rng(seed);
      Tensor x = Random(rng, {3, 6}, 2.0);
      Tensor gain = Random(rng, {6});
      Tensor bias = Random(rng, {6});
      Tensor p = Random(rng, {3, 6});
      ScalarFunction f = [gain, bias, p](const Tensor& t) {
        return Project(LayerNorm(t, gain, bias, 1e-5), p);
      };
      return std::make_pair(f, x);
    };
    cases.push_back({"layer_norm_input", make});
    Make make_gain = [](uint64_t seed) {
      Rng rng(seed);
      Tensor x = Random(rng, {3, 6}, 2.0);
      Tensor gain = Random(rng, {6});
      Tensor bias = Random(rng, {6});
      Tensor p = Random(rng, {3, 6});
      ScalarFunction f = [x, p, bias](const Tensor& t) {
        return Project(LayerNorm(x, t, bias, 1e-5), p);
      };
      return std::make_pair(f, gain);
    };
    cases.push_back({"layer_norm_gain", make_gain});
    Make make_bias = [](uint64_t seed) {
      Rng rng(seed);
      Tensor x = Random(rng, {3, 6}, 2.0);
      Tensor gain = Random(rng, {6});
      Tensor bias = Random(rng, {6});
      Tensor p = Random(rng, {3, 6});
      ScalarFunction f = [x, gain, p](const Tensor& t) {
        return Project(LayerNorm(x, gain, t, 1e-5), p);
      };
      return std::make_pair(f, bias);
    };
    cases.push_back({"layer_norm_bias", make_bias});
  }
  // Attention core: two sequences of length 4, D = 6, 2 heads, one padded key.
  for (int which = 0; which < 3; ++which) {
    static const char* names[3] = {"causal_attention_q", "causal_attention_k",
                                   "causal_attention_v"};
    Make make = [which](uint64_t seed) {
      Rng rng(seed);
      std::vector<Tensor> qkv = {Random(rng, {8, 6}), Random(rng, {8, 6}),
                                 Random(rng, {8, 6})};
      Tensor p = Random(rng, {8, 6});
      Tensor probe = qkv[which];
      ScalarFunction f = [qkv, p, which](const Tensor& t) {
        static const uint8_t key_valid[8] = {0, 1, 1, 1, 1, 1, 1, 1};
        std::vector<Tensor> in = qkv;
        in[which] = t;
        return Project(CausalAttention(in[0], in[1], in[2], 2, 4, 2, key_valid), p);
      };
      return std::make_pair(f, probe);
    };
    cases.push_back({names[which], make});
  }
  {
    Make make = [](uint64_t seed) {
      Rng rng(seed);
      AttentionParams params{Random(rng, {6, 18}, 0.5), Random(rng, {18}, 0.1),
                             Random(rng, {6, 6}, 0.5), Random(rng, {6}, 0.1)};
      Tensor x = Random(rng, {6, 6});
      Tensor p = Random(rng, {6, 6});
      ScalarFunction f = [params, p](const Tensor& t) {
        return Project(CausalSelfAttention(t, params, 3, 2, 3), p);
      };
      return std::make_pair(f, x);
    };
    cases.push_back({"causal_self_attention", make});
  }
  for (double m : {0.5, 0.9, 0.99}) {
    Make make = [m](uint64_t seed) {
      Rng rng(seed);
      std::vector<double> target = Normal(rng, 12);
      std::vector<double> delta = AwayFrom(rng, 12, {0.0}, 0.05);
      std::vector<double> predicted(12);
      for (int i = 0; i < 12; ++i) predicted[i] = target[i] - delta[i];
      Tensor g = Tensor::FromData({12}, target);
      ScalarFunction f = [g, m](const Tensor& t) {
        static const uint8_t mask[12] = {1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1};
        return ExpectileLoss(t, g, mask, m);
      };
      return std::make_pair(f, Tensor::FromData({12}, predicted));
    };
    cases.push_back({"expectile_loss_m" + std::to_string(m).substr(0, 4), make});
  }
  for (int which = 0; which < 2; ++which) {
    Make make = [which](uint64_t seed) {
      Rng rng(seed);
      Tensor mean = Random(rng, {4, 2});
      Tensor log_std = Random(rng, {4, 2}, 0.5);
      Tensor actions = Random(rng, {4, 2});
      Tensor probe = which == 0 ? mean : log_std;
      ScalarFunction f = [mean, log_std, actions, which](const Tensor& t) {
        PolicyTerms terms = which == 0 ? GaussianPolicyTerms(t, log_std, actions)
                                       : GaussianPolicyTerms(mean, t, actions);
        return Add(Sum(terms.nll), Scale(Sum(terms.entropy), -0.3));
      };
      return std::make_pair(f, probe);
    };
    cases.push_back({which == 0 ? "gaussian_nll_entropy_mean"
                                : "gaussian_nll_entropy_log_std",
                     make});
  }
  {
    Make make = [](uint64_t seed) {
      Rng rng(seed);
      Tensor logits = Random(rng, {4, 5});
      ScalarFunction f = [](const Tensor& t) {
        static const int64_t ids[4] = {0, 3, 4, 1};
        PolicyTerms terms = CategoricalPolicyTerms(t, ids);
        return Add(Sum(terms.nll), Scale(Sum(terms.entropy), -0.3));
      };
      return std::make_pair(f, logits);
    };
    cases.push_back({"categorical_nll_entropy", make});
  }
  return cases;
}

std::vector<GradCheckResult> RunGradCheckSuite(
    const std::vector<GradCheckCase>& cases, uint64_t seed, int points,
    double h, double tolerance) {
  std::vector<GradCheckResult> results;
  std::seed_seq root{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
  std::vector<uint32_t> seeds(cases.size() * static_cast<size_t>(points));
  root.generate(seeds.begin(), seeds.end());
  for (size_t c = 0; c < cases.size(); ++c) {
    GradCheckResult r;
    r.name = cases[c].name;
    for (int p = 0; p < points; ++p) {
      auto [f, x] = cases[c].make(seeds[c * points + p]);
      r.max_error = std::max(r.max_error, GradCheck(f, x, h));
    }
    r.passed = r.max_error < tolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace reinformer
