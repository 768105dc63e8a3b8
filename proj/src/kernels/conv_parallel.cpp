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

#include <algorithm>
#include <vector>

#include "wseg/kernels/conv.hpp"

namespace wseg::kernels::parallel {

namespace {

long column_rows(const ConvGeometry& g) {
  return static_cast<long>(g.in_channels) * g.kernel_h * g.kernel_w;
}

long out_pixels(const ConvGeometry& g) {
  return static_cast<long>(g.out_h()) * g.out_w();
}

void transpose(const double* src, int rows, int cols, double* dst) {
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      dst[static_cast<long>(c) * rows + r] = src[static_cast<long>(r) * cols + c];
    }
  }
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const long k = column_rows(g);
  const long p = out_pixels(g);
  const long in_plane = static_cast<long>(g.in_channels) * g.in_h * g.in_w;
  const long out_plane = static_cast<long>(g.out_channels) * p;
  std::vector<double> columns;
  if (!g.is_pointwise()) columns.resize(static_cast<std::size_t>(k * p));

  for (int n = 0; n < g.batch; ++n) {
    const double* image = input.data() + n * in_plane;
    double* out = output.data() + n * out_plane;
    for (int co = 0; co < g.out_channels; ++co) {
      std::fill(out + co * p, out + (co + 1) * p, bias.empty() ? 0.0 : bias[co]);
    }
    const double* cols = image;
    if (!g.is_pointwise()) {
      im2col(g, image, columns.data());
      cols = columns.data();
    }
    gemm_accumulate(g.out_channels, static_cast<int>(p), static_cast<int>(k),
                    weight.data(), static_cast<int>(k), cols,
                    static_cast<int>(p), out, static_cast<int>(p));
  }
}

void conv2d_backward_input(const ConvGeometry& g,
                           std::span<const double> grad_output,
                           std::span<const double> weight,
                           std::span<double> grad_input) {
  const long k = column_rows(g);
  const long p = out_pixels(g);
  const long in_plane = static_cast<long>(g.in_channels) * g.in_h * g.in_w;
  const long out_plane = static_cast<long>(g.out_channels) * p;

  std::vector<double> weight_t(static_cast<std::size_t>(k * g.out_channels));
  transpose(weight.data(), g.out_channels, static_cast<int>(k), weight_t.data());
  std::vector<double> columns;
  if (!g.is_pointwise()) columns.resize(static_cast<std::size_t>(k * p));

  for (int n = 0; n < g.batch; ++n) {
    const double* gout = grad_output.data() + n * out_plane;
    double* gin = grad_input.data() + n * in_plane;
    if (g.is_pointwise()) {
      gemm_accumulate(static_cast<int>(k), static_cast<int>(p), g.out_channels,
                      weight_t.data(), g.out_channels, gout, static_cast<int>(p),
                      gin, static_cast<int>(p));
      continue;
    }
    std::fill(columns.begin(), columns.end(), 0.0);
    gemm_accumulate(static_cast<int>(k), static_cast<int>(p), g.out_channels,
                    weight_t.data(), g.out_channels, gout, static_cast<int>(p),
                    columns.data(), static_cast<int>(p));
    col2im_accumulate(g, columns.data(), gin);
  }
}

void conv2d_backward_weight(const ConvGeometry& g,
                            std::span<const double> grad_output,
                            std::span<const double> input,
                            std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  const long k = column_rows(g);
  const long p = out_pixels(g);
  const long in_plane = static_cast<long>(g.in_channels) * g.in_h * g.in_w;
  const long out_plane = static_cast<long>(g.out_channels) * p;

  std::vector<double> columns;
  if (!g.is_pointwise()) columns.resize(static_cast<std::size_t>(k * p));
  std::vector<double> columns_t(static_cast<std::size_t>(k * p));

  for (int n = 0; n < g.batch; ++n) {
    const double* gout = grad_output.data() + n * out_plane;
    const double* cols = input.data() + n * in_plane;
    if (!g.is_pointwise()) {
      im2col(g, cols, columns.data());
      cols = columns.data();
    }
    transpose(cols, static_cast<int>(k), static_cast<int>(p), columns_t.data());
    gemm_accumulate(g.out_channels, static_cast<int>(k), static_cast<int>(p),
                    gout, static_cast<int>(p), columns_t.data(),
                    static_cast<int>(k), grad_weight.data(), static_cast<int>(k));
    if (!grad_bias.empty()) {
      for (int co = 0; co < g.out_channels; ++co) {
        double s = grad_bias[co];
        const double* row = gout + co * p;
        for (long i = 0; i < p; ++i) s += row[i];
        grad_bias[co] = s;
      }
    }
  }
}

}  // namespace wseg::kernels::parallel
