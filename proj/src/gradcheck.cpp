// Copyright 2026 The wseg Authors. All Rights Reserved.
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

#include "wseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "wseg/error.hpp"

namespace wseg {

double finite_difference_check(const ScalarFn& fn, const Tensor& input,
                               double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) {
    throw ConfigError("finite_difference_check: eps must lie in [1e-7, 1e-4]");
  }
  const Shape shape = input.shape();
  std::vector<double> base(input.data().begin(), input.data().end());

  Tensor leaf = Tensor::from_data(shape, base, true);
  Tensor loss = fn(leaf);
  if (loss.numel() != 1) {
    throw UsageError("finite_difference_check: fn must return a scalar");
  }
  backward(loss);
  std::vector<double> analytic(base.size(), 0.0);
  if (leaf.has_grad()) {
    std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
  }

  NoGradGuard no_grad;
  double worst = 0.0;
  std::vector<double> probe = base;
  for (std::size_t i = 0; i < base.size(); ++i) {
    probe[i] = base[i] + eps;
    const double up = fn(Tensor::from_data(shape, probe)).item();
    probe[i] = base[i] - eps;
    const double down = fn(Tensor::from_data(shape, probe)).item();
    probe[i] = base[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace wseg
