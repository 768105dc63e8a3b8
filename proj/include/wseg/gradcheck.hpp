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

#pragma once

#include <functional>

#include "wseg/tensor.hpp"

namespace wseg {

using ScalarFn = std::function<Tensor(const Tensor&)>;

// Compares the tape gradient of fn at `input` with central differences.
// Returns max_i |analytic_i - numeric_i| / max(1, |numeric_i|).
// fn must be deterministic and return a one-element tensor.
double finite_difference_check(const ScalarFn& fn, const Tensor& input,
                               double eps = 1e-6);

}  // namespace wseg
