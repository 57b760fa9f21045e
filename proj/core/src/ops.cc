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

#include "reinformer/ops.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>

#include "reinformer/errors.h"

namespace reinformer {
namespace {

using internal::MakeResult;
using internal::Node;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

// Eigen's vectorised kernels pick their summation order from the alignment
// of both operands and destination, so products and reductions are evaluated
// on owned (aligned) buffers and only then copied or accumulated into tensor
// storage. Keeps training bitwise reproducible from run to run.
RowMatrix Owned(const double* p, int64_t rows, int64_t cols) {
  return ConstMap(p, rows, cols);
}

void Store(const RowMatrix& m, double* out) {
  std::copy(m.data(), m.data() + m.size(), out);
}

bool IsSuffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Output shape of a suffix-broadcast binary op.
Shape BroadcastShape(const char* op, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return sa;
  if (a.size() >= b.size() && (b.size() == 1 || IsSuffix(sb, sa))) return sa;
  if (b.size() > a.size() && (a.size() == 1 || IsSuffix(sa, sb))) return sb;
  throw DimensionError(std::string(op) + ": cannot broadcast " +
                       ShapeToString(sa) + " with " + ShapeToString(sb));
}

// Applies fn(i, ia, ib) over the output, where ia and ib index the (possibly
// broadcast) operands. Same-size and row-broadcast layouts avoid modulo.
template <typename Fn>
void ForEachBroadcast(size_t n, size_t na, size_t nb, Fn fn) {
  if (na == n && nb == n) {
    for (size_t i = 0; i < n; ++i) fn(i, i, i);
  } else if (na == n) {
    for (size_t r = 0; r < n; r += nb) {
      for (size_t j = 0; j < nb; ++j) fn(r + j, r + j, j);
    }
  } else {
    for (size_t r = 0; r < n; r += na) {
      for (size_t j = 0; j < na; ++j) fn(r + j, j, r + j);
    }
  }
}

template <typename Forward, typename DerivA, typename DerivB>
Tensor Binary(const char* name, const Tensor& a, const Tensor& b, Forward f,
              DerivA da, DerivB db) {
  Shape shape = BroadcastShape(name, a, b);
  const size_t n = static_cast<size_t>(NumElements(shape));
  const double* av = a.data().data();
  const double* bv = b.data().data();
  std::vector<double> out(n);
  ForEachBroadcast(n, a.data().size(), b.data().size(),
                   [&](size_t i, size_t ia, size_t ib) { out[i] = f(av[ia], bv[ib]); });
  return MakeResult(name, std::move(shape), std::move(out), {a, b},
                    [da, db](Node& self) {
                      Node& an = *self.inputs[0];
                      Node& bn = *self.inputs[1];
                      const double* go = self.grad.data();
                      const double* x = an.value.data();
                      const double* y = bn.value.data();
                      const size_t n = self.grad.size();
                      if (an.requires_grad) {
                        double* g = an.MutableGrad().data();
                        ForEachBroadcast(n, an.value.size(), bn.value.size(),
                                         [&](size_t i, size_t ia, size_t ib) {
                                           g[ia] += go[i] * da(x[ia], y[ib]);
                                         });
                      }
                      if (bn.requires_grad) {
                        double* g = bn.MutableGrad().data();
                        ForEachBroadcast(n, an.value.size(), bn.value.size(),
                                         [&](size_t i, size_t ia, size_t ib) {
                                           g[ib] += go[i] * db(x[ia], y[ib]);
                                         });
                      }
                    });
}

// Elementwise unary op whose derivative is expressed through the input x and
// the output y.
template <typename Forward, typename Deriv>
Tensor Unary(const char* name, const Tensor& x, Forward f, Deriv d) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return MakeResult(name, x.shape(), std::move(out), {x}, [d](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.MutableGrad();
    for (size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * d(in.value[i], self.value[i]);
    }
  });
}

int NormalizeAxis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError(std::string(op) + ": axis out of range");
  }
  return axis;
}

int64_t Product(const Shape& s, size_t begin, size_t end) {
  int64_t p = 1;
  for (size_t i = begin; i < end; ++i) p *= s[i];
  return p;
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  return Binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return Binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return Binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor AddScalar(const Tensor& x, double c) {
  return Unary(
      "add_scalar", x, [c](double v) { return v + c; },
      [](double, double) { return 1.0; });
}

Tensor Scale(const Tensor& x, double c) {
  return Unary(
      "scale", x, [c](double v) { return v * c; },
      [c](double, double) { return c; });
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: shapes " + ShapeToString(a.shape()) +
                         " and " + ShapeToString(b.shape()) +
                         " are incompatible");
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  Store(Owned(a.data().data(), m, k) * Owned(b.data().data(), k, n), out.data());
  return MakeResult("matmul", {m, n}, std::move(out), {a, b},
                    [m, k, n](Node& self) {
                      Node& an = *self.inputs[0];
                      Node& bn = *self.inputs[1];
                      const RowMatrix go = Owned(self.grad.data(), m, n);
                      if (an.requires_grad) {
                        const RowMatrix ga = go * Owned(bn.value.data(), k, n).transpose();
                        MutMap(an.MutableGrad().data(), m, k) += ga;
                      }
                      if (bn.requires_grad) {
                        const RowMatrix gb = Owned(an.value.data(), m, k).transpose() * go;
                        MutMap(bn.MutableGrad().data(), k, n) += gb;
                      }
                    });
}

Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.dim(-1) != weight.dim(0)) {
    throw DimensionError("linear: input " + ShapeToString(x.shape()) +
                         " does not match weight " +
                         ShapeToString(weight.shape()));
  }
  const int64_t in = weight.dim(0), out_dim = weight.dim(1);
  if (bias.size() != out_dim) {
    throw DimensionError("linear: bias " + ShapeToString(bias.shape()) +
                         " does not match weight " + ShapeToString(weight.shape()));
  }
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  const int64_t rows = x.size() / in;
  std::vector<double> out(rows * out_dim);
  RowMatrix y = Owned(x.data().data(), rows, in) * Owned(weight.data().data(), in, out_dim);
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), out_dim);
  Store(y, out.data());
  return MakeResult(
      "linear", std::move(out_shape), std::move(out), {x, weight, bias},
      [rows, in, out_dim](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        Node& bn = *self.inputs[2];
        const RowMatrix go = Owned(self.grad.data(), rows, out_dim);
        if (xn.requires_grad) {
          const RowMatrix gx = go * Owned(wn.value.data(), in, out_dim).transpose();
          MutMap(xn.MutableGrad().data(), rows, in) += gx;
        }
        if (wn.requires_grad) {
          const RowMatrix gw = Owned(xn.value.data(), rows, in).transpose() * go;
          MutMap(wn.MutableGrad().data(), in, out_dim) += gw;
        }
        if (bn.requires_grad) {
          const RowMatrix gb = go.colwise().sum();
          MutMap(bn.MutableGrad().data(), 1, out_dim) += gb;
        }
      });
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    throw DimensionError("reshape: " + ShapeToString(x.shape()) + " to " +
                         ShapeToString(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return MakeResult("reshape", std::move(shape), std::move(out), {x},
                    [](Node& self) {
                      Node& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.MutableGrad();
                      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                    });
}

Tensor Relu(const Tensor& x) {
  return Unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor Gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const auto xv = x.data();
  auto cdf = std::make_shared<std::vector<double>>(xv.size());
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    (*cdf)[i] = 0.5 * (1.0 + std::erf(xv[i] * kInvSqrt2));
    out[i] = xv[i] * (*cdf)[i];
  }
  return MakeResult("gelu", x.shape(), std::move(out), {x},
                    [cdf, inv_sqrt_2pi](Node& self) {
                      Node& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.MutableGrad();
                      for (size_t i = 0; i < g.size(); ++i) {
                        const double v = in.value[i];
                        g[i] += self.grad[i] * ((*cdf)[i] + v * inv_sqrt_2pi *
                                                              std::exp(-0.5 * v * v));
                      }
                    });
}

Tensor Dropout(const Tensor& x, double p, std::mt19937_64* rng) {
  if (rng == nullptr || p == 0.0) return x;
  if (!(p > 0.0 && p < 1.0)) throw ContractError("dropout: p must lie in [0, 1)");
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  const auto xv = x.data();
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    (*mask)[i] = keep(*rng) ? scale : 0.0;
    out[i] = xv[i] * (*mask)[i];
  }
  return MakeResult("dropout", x.shape(), std::move(out), {x}, [mask](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.MutableGrad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
  });
}

Tensor Tanh(const Tensor& x) {
  return Unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor Exp(const Tensor& x) {
  return Unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Log(const Tensor& x) {
  return Unary(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor Square(const Tensor& x) {
  return Unary(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor Clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
  return Unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

Tensor Softmax(const Tensor& x) {
  const int64_t d = x.dim(-1);
  const int64_t rows = x.size() / d;
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double* o = out.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double total = 0.0;
    for (int64_t j = 0; j < d; ++j) total += (o[j] = std::exp(in[j] - mx));
    for (int64_t j = 0; j < d; ++j) o[j] /= total;
  }
  return MakeResult("softmax", x.shape(), std::move(out), {x},
                    [rows, d](Node& self) {
                      Node& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.MutableGrad();
                      for (int64_t r = 0; r < rows; ++r) {
                        const double* y = self.value.data() + r * d;
                        const double* gy = self.grad.data() + r * d;
                        double dot = 0.0;
                        for (int64_t j = 0; j < d; ++j) dot += y[j] * gy[j];
                        for (int64_t j = 0; j < d; ++j) {
                          g[r * d + j] += y[j] * (gy[j] - dot);
                        }
                      }
                    });
}

Tensor LogSoftmax(const Tensor& x) {
  const int64_t d = x.dim(-1);
  const int64_t rows = x.size() / d;
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double* o = out.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double total = 0.0;
    for (int64_t j = 0; j < d; ++j) total += std::exp(in[j] - mx);
    const double lse = mx + std::log(total);
    for (int64_t j = 0; j < d; ++j) o[j] = in[j] - lse;
  }
  return MakeResult("log_softmax", x.shape(), std::move(out), {x},
                    [rows, d](Node& self) {
                      Node& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.MutableGrad();
                      for (int64_t r = 0; r < rows; ++r) {
                        const double* y = self.value.data() + r * d;
                        const double* gy = self.grad.data() + r * d;
                        double total = 0.0;
                        for (int64_t j = 0; j < d; ++j) total += gy[j];
                        for (int64_t j = 0; j < d; ++j) {
                          g[r * d + j] += gy[j] - std::exp(y[j]) * total;
                        }
                      }
                    });
}

Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const int64_t d = x.dim(-1);
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: gain/bias " +
                         ShapeToString(gain.shape()) + " do not match " +
                         ShapeToString(x.shape()));
  }
  const int64_t rows = x.size() / d;
  const auto xv = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  std::vector<double> out(xv.size());
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (int64_t j = 0; j < d; ++j) {
      const double h = (in[j] - mean) * rs;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return MakeResult(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [rows, d, xhat, rstd](Node& self) {
        Node& xn = *self.inputs[0];
        Node& gn = *self.inputs[1];
        Node& bn = *self.inputs[2];
        const auto& gy = self.grad;
        if (gn.requires_grad || bn.requires_grad) {
          for (int64_t r = 0; r < rows; ++r) {
            for (int64_t j = 0; j < d; ++j) {
              if (gn.requires_grad) {
                gn.MutableGrad()[j] += gy[r * d + j] * (*xhat)[r * d + j];
              }
              if (bn.requires_grad) bn.MutableGrad()[j] += gy[r * d + j];
            }
          }
        }
        if (!xn.requires_grad) return;
        auto& gx = xn.MutableGrad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (int64_t r = 0; r < rows; ++r) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            const double dh = gy[r * d + j] * gn.value[j];
            mean_dh += dh;
            mean_dh_h += dh * (*xhat)[r * d + j];
          }
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          for (int64_t j = 0; j < d; ++j) {
            const double dh = gy[r * d + j] * gn.value[j];
            gx[r * d + j] += (*rstd)[r] *
                             (dh - mean_dh - (*xhat)[r * d + j] * mean_dh_h);
          }
        }
      });
}

Tensor EmbeddingLookup(const Tensor& table, std::span<const int64_t> ids) {
  if (table.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be rank 2, got " +
                         ShapeToString(table.shape()));
  }
  const int64_t vocab = table.dim(0), d = table.dim(1);
  const int64_t n = static_cast<int64_t>(ids.size());
  if (n == 0) throw ContractError("embedding_lookup: no ids");
  auto idx = std::make_shared<std::vector<int64_t>>(ids.begin(), ids.end());
  std::vector<double> out(n * d);
  const auto tv = table.data();
  for (int64_t i = 0; i < n; ++i) {
    const int64_t id = (*idx)[i];
    if (id < 0 || id >= vocab) {
      throw DimensionError("embedding_lookup: id " + std::to_string(id) +
                           " outside table of " + std::to_string(vocab) +
                           " rows");
    }
    std::copy_n(tv.data() + id * d, d, out.data() + i * d);
  }
  return MakeResult("embedding_lookup", {n, d}, std::move(out), {table},
                    [idx, d](Node& self) {
                      Node& tn = *self.inputs[0];
                      if (!tn.requires_grad) return;
                      auto& g = tn.MutableGrad();
                      for (size_t i = 0; i < idx->size(); ++i) {
                        const int64_t id = (*idx)[i];
                        for (int64_t j = 0; j < d; ++j) {
                          g[id * d + j] += self.grad[i * d + j];
                        }
                      }
                    });
}

Tensor Concatenate(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concatenate: no inputs");
  const Shape& first = parts.front().shape();
  axis = NormalizeAxis(axis, static_cast<int>(first.size()), "concatenate");
  Shape out_shape = first;
  out_shape[axis] = 0;
  auto widths = std::make_shared<std::vector<int64_t>>();
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (size_t i = 0; ok && i < s.size(); ++i) {
      ok = (static_cast<int>(i) == axis) || s[i] == first[i];
    }
    if (!ok) {
      throw DimensionError("concatenate: " + ShapeToString(s) +
                           " incompatible with " + ShapeToString(first));
    }
    out_shape[axis] += s[axis];
  }
  const int64_t outer = Product(first, 0, axis);
  const int64_t inner = Product(first, axis + 1, first.size());
  for (const Tensor& p : parts) widths->push_back(p.dim(axis) * inner);
  const int64_t row = out_shape[axis] * inner;
  std::vector<double> out(outer * row);
  int64_t offset = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    const auto pv = parts[p].data();
    const int64_t w = (*widths)[p];
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(pv.data() + o * w, w, out.data() + o * row + offset);
    }
    offset += w;
  }
  return MakeResult("concatenate", std::move(out_shape), std::move(out), parts,
                    [outer, row, widths](Node& self) {
                      int64_t offset = 0;
                      for (size_t p = 0; p < self.inputs.size(); ++p) {
                        Node& in = *self.inputs[p];
                        const int64_t w = (*widths)[p];
                        if (in.requires_grad) {
                          auto& g = in.MutableGrad();
                          for (int64_t o = 0; o < outer; ++o) {
                            for (int64_t j = 0; j < w; ++j) {
                              g[o * w + j] += self.grad[o * row + offset + j];
                            }
                          }
                        }
                        offset += w;
                      }
                    });
}

Tensor Slice(const Tensor& x, int axis, int64_t start, int64_t length) {
  const Shape& s = x.shape();
  axis = NormalizeAxis(axis, static_cast<int>(s.size()), "slice");
  if (start < 0 || length <= 0 || start + length > s[axis]) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside axis " +
                         std::to_string(axis) + " of " + ShapeToString(s));
  }
  Shape out_shape = s;
  out_shape[axis] = length;
  const int64_t outer = Product(s, 0, axis);
  const int64_t inner = Product(s, axis + 1, s.size());
  const int64_t src_row = s[axis] * inner;
  const int64_t dst_row = length * inner;
  const int64_t begin = start * inner;
  std::vector<double> out(outer * dst_row);
  const auto xv = x.data();
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(xv.data() + o * src_row + begin, dst_row,
                out.data() + o * dst_row);
  }
  return MakeResult("slice", std::move(out_shape), std::move(out), {x},
                    [outer, src_row, dst_row, begin](Node& self) {
                      Node& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.MutableGrad();
                      for (int64_t o = 0; o < outer; ++o) {
                        for (int64_t j = 0; j < dst_row; ++j) {
                          g[o * src_row + begin + j] += self.grad[o * dst_row + j];
                        }
                      }
                    });
}

Tensor Sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return MakeResult("sum", {}, {total}, {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.MutableGrad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor Mean(const Tensor& x) {
  return Scale(Sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor SumLastAxis(const Tensor& x) {
  const int64_t d = x.dim(-1);
  const int64_t rows = x.size() / d;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  std::vector<double> out(rows, 0.0);
  const auto xv = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < d; ++j) out[r] += xv[r * d + j];
  }
  return MakeResult("sum_last_axis", std::move(out_shape), std::move(out), {x},
                    [d, rows](Node& self) {
                      Node& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.MutableGrad();
                      for (int64_t r = 0; r < rows; ++r) {
                        for (int64_t j = 0; j < d; ++j) g[r * d + j] += self.grad[r];
                      }
                    });
}

Tensor MaskedMean(const Tensor& x, std::span<const uint8_t> mask) {
  if (static_cast<int64_t>(mask.size()) != x.size()) {
    throw DimensionError("masked_mean: mask length " +
                         std::to_string(mask.size()) + " vs tensor " +
                         ShapeToString(x.shape()));
  }
  auto keep = std::make_shared<std::vector<uint8_t>>(mask.begin(), mask.end());
  int64_t count = 0;
  double total = 0.0;
  const auto xv = x.data();
  for (size_t i = 0; i < keep->size(); ++i) {
    if ((*keep)[i]) {
      ++count;
      total += xv[i];
    }
  }
  if (count == 0) throw ContractError("masked_mean: every entry is masked");
  const double inv = 1.0 / static_cast<double>(count);
  return MakeResult("masked_mean", {}, {total * inv}, {x},
                    [keep, inv](Node& self) {
                      Node& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.MutableGrad();
                      for (size_t i = 0; i < keep->size(); ++i) {
                        if ((*keep)[i]) g[i] += self.grad[0] * inv;
                      }
                    });
}

Tensor CausalAttention(const Tensor& q, const Tensor& k, const Tensor& v,
                       int64_t batch, int64_t seq, int heads,
                       std::span<const uint8_t> key_valid) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape() ||
      q.dim(0) != batch * seq) {
    throw DimensionError("causal_attention: q/k/v shapes " +
                         ShapeToString(q.shape()) + ", " +
                         ShapeToString(k.shape()) + ", " +
                         ShapeToString(v.shape()) + " for batch " +
                         std::to_string(batch) + " x seq " +
                         std::to_string(seq));
  }
  const int64_t d = q.dim(1);
  if (heads <= 0 || d % heads != 0) {
    throw ConfigError("causal_attention: width " + std::to_string(d) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  if (!key_valid.empty() &&
      static_cast<int64_t>(key_valid.size()) != batch * seq) {
    throw DimensionError("causal_attention: key mask length mismatch");
  }
  const int64_t hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  auto allowed = std::make_shared<std::vector<uint8_t>>(batch * seq * seq, 0);
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t i = 0; i < seq; ++i) {
      for (int64_t j = 0; j <= i; ++j) {
        const bool ok = j == i || key_valid.empty() || key_valid[b * seq + j];
        (*allowed)[(b * seq + i) * seq + j] = ok ? 1 : 0;
      }
    }
  }

  // probs[b][h][i][j]
  auto probs = std::make_shared<std::vector<double>>(batch * heads * seq * seq,
                                                     0.0);
  std::vector<double> out(batch * seq * d, 0.0);
  const double* qv = q.data().data();
  const double* kv = k.data().data();
  const double* vv = v.data().data();
  for (int64_t b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      for (int64_t i = 0; i < seq; ++i) {
        double* p = probs->data() + ((b * heads + h) * seq + i) * seq;
        const double* qi = qv + (b * seq + i) * d + h * hd;
        const uint8_t* ok = allowed->data() + (b * seq + i) * seq;
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j <= i; ++j) {
          if (!ok[j]) continue;
          const double* kj = kv + (b * seq + j) * d + h * hd;
          double s = 0.0;
          for (int64_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
          p[j] = s * scale;
          mx = std::max(mx, p[j]);
        }
        double total = 0.0;
        for (int64_t j = 0; j <= i; ++j) {
          if (!ok[j]) continue;
          p[j] = std::exp(p[j] - mx);
          total += p[j];
        }
        double* oi = out.data() + (b * seq + i) * d + h * hd;
        for (int64_t j = 0; j <= i; ++j) {
          if (!ok[j]) continue;
          p[j] /= total;
          const double* vj = vv + (b * seq + j) * d + h * hd;
          for (int64_t c = 0; c < hd; ++c) oi[c] += p[j] * vj[c];
        }
      }
    }
  }

  return MakeResult(
      "causal_attention", q.shape(), std::move(out), {q, k, v},
      [batch, seq, heads, d, hd, scale, probs, allowed](Node& self) {
        Node& qn = *self.inputs[0];
        Node& kn = *self.inputs[1];
        Node& vn = *self.inputs[2];
        double* gq = qn.requires_grad ? qn.MutableGrad().data() : nullptr;
        double* gk = kn.requires_grad ? kn.MutableGrad().data() : nullptr;
        double* gv = vn.requires_grad ? vn.MutableGrad().data() : nullptr;
        const double* go = self.grad.data();
        std::vector<double> dp(seq);
        for (int64_t b = 0; b < batch; ++b) {
          for (int h = 0; h < heads; ++h) {
            for (int64_t i = 0; i < seq; ++i) {
              const double* p = probs->data() + ((b * heads + h) * seq + i) * seq;
              const uint8_t* ok = allowed->data() + (b * seq + i) * seq;
              const double* goi = go + (b * seq + i) * d + h * hd;
              double dot = 0.0;
              for (int64_t j = 0; j <= i; ++j) {
                dp[j] = 0.0;
                if (!ok[j]) continue;
                const double* vj = vn.value.data() + (b * seq + j) * d + h * hd;
                for (int64_t c = 0; c < hd; ++c) dp[j] += goi[c] * vj[c];
                dot += p[j] * dp[j];
                if (gv) {
                  double* gvj = gv + (b * seq + j) * d + h * hd;
                  for (int64_t c = 0; c < hd; ++c) gvj[c] += p[j] * goi[c];
                }
              }
              const double* qi = qn.value.data() + (b * seq + i) * d + h * hd;
              for (int64_t j = 0; j <= i; ++j) {
                if (!ok[j]) continue;
                const double ds = p[j] * (dp[j] - dot) * scale;
                if (ds == 0.0) continue;
                const double* kj = kn.value.data() + (b * seq + j) * d + h * hd;
                if (gq) {
                  double* gqi = gq + (b * seq + i) * d + h * hd;
                  for (int64_t c = 0; c < hd; ++c) gqi[c] += ds * kj[c];
                }
                if (gk) {
                  double* gkj = gk + (b * seq + j) * d + h * hd;
                  for (int64_t c = 0; c < hd; ++c) gkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

Tensor CausalSelfAttention(const Tensor& x, const AttentionParams& params,
                           int heads, int64_t batch, int64_t seq,
                           std::span<const uint8_t> key_valid) {
  if (x.rank() != 2) {
    throw DimensionError("causal_self_attention: expected [N, D], got " +
                         ShapeToString(x.shape()));
  }
  const int64_t d = x.dim(1);
  if (heads <= 0 || d % heads != 0) {
    throw ConfigError("causal_self_attention: width " + std::to_string(d) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  Tensor qkv = Linear(x, params.qkv_weight, params.qkv_bias);
  Tensor q = Slice(qkv, 1, 0, d);
  Tensor k = Slice(qkv, 1, d, d);
  Tensor v = Slice(qkv, 1, 2 * d, d);
  Tensor attended = CausalAttention(q, k, v, batch, seq, heads, key_valid);
  return Linear(attended, params.out_weight, params.out_bias);
}

}  // namespace reinformer
