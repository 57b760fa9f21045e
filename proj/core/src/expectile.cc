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

#include "reinformer/expectile.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "reinformer/errors.h"

namespace reinformer {

void ExpectileConfig::Validate() const {
  if (!(m > 0.0 && m < 1.0)) {
    throw ConfigError("expectile m must lie in (0, 1), got " +
                      std::to_string(m));
  }
}

double ExpectileWeightedSquare(double delta, double m) {
  const double weight = delta < 0.0 ? 1.0 - m : m;
  return weight * delta * delta;
}

Tensor ExpectileLoss(const Tensor& predicted, const Tensor& target,
                     std::span<const uint8_t> mask, double m) {
  ExpectileConfig{m}.Validate();
  if (predicted.size() != target.size() ||
      static_cast<int64_t>(mask.size()) != predicted.size()) {
    throw DimensionError("expectile_loss: predicted " +
                         ShapeToString(predicted.shape()) + ", target " +
                         ShapeToString(target.shape()) + ", mask length " +
                         std::to_string(mask.size()));
  }
  const auto pv = predicted.data();
  const auto tv = target.data();
  // d loss / d g_hat per entry, already divided by the valid count.
  auto slope = std::make_shared<std::vector<double>>(pv.size(), 0.0);
  int64_t count = 0;
  for (uint8_t keep : mask) count += keep ? 1 : 0;
  if (count == 0) throw ContractError("expectile_loss: every entry is masked");
  const double inv = 1.0 / static_cast<double>(count);
  double total = 0.0;
  for (size_t i = 0; i < pv.size(); ++i) {
    if (!mask[i]) continue;
    const double delta = tv[i] - pv[i];
    total += ExpectileWeightedSquare(delta, m);
    const double weight = delta < 0.0 ? 1.0 - m : m;
    (*slope)[i] = -2.0 * weight * delta * inv;
  }
  return internal::MakeResult(
      "expectile_loss", {}, {total * inv}, {predicted},
      [slope](internal::Node& self) {
        internal::Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto& g = in.MutableGrad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * (*slope)[i];
      });
}

double ScalarExpectileFit(std::span<const double> values, double m,
                          double tol) {
  if (values.empty()) throw ContractError("scalar_expectile_fit: no values");
  ExpectileConfig{m}.Validate();
  if (!(tol > 0.0)) throw ContractError("scalar_expectile_fit: tol must be > 0");
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  // Excess of the upper pull over the lower pull; strictly decreasing in g.
  auto excess = [&](double g) {
    double above = 0.0, below = 0.0;
    for (double v : values) {
      if (v > g) {
        above += v - g;
      } else {
        below += g - v;
      }
    }
    return m * above - (1.0 - m) * below;
  };
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (excess(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace reinformer
