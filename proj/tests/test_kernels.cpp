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

#include <omp.h>

#include <random>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wseg/kernels/conv.hpp"

using namespace wseg::kernels;
using wseg::testing::max_abs_diff;
using wseg::testing::naive_conv;
using wseg::testing::random_values;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ConvGeometry random_geometry(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> small(1, 5), size(4, 13), k(1, 3), s(1, 2),
      pad(0, 3), dil(1, 4);
  for (;;) {
    ConvGeometry g;
    g.batch = small(rng) % 3 + 1;
    g.in_channels = small(rng);
    g.out_channels = small(rng);
    g.in_h = size(rng);
    g.in_w = size(rng);
    g.kernel_h = k(rng);
    g.kernel_w = k(rng);
    g.stride = s(rng);
    g.pad_h = pad(rng);
    g.pad_w = pad(rng);
    g.dilation = dil(rng);
    if (g.out_h() >= 1 && g.out_w() >= 1) return g;
  }
}

struct Run {
  std::vector<double> out, gin, gw, gb;
};

template <typename Fwd, typename BwdIn, typename BwdW>
Run run_kernels(const ConvGeometry& g, const std::vector<double>& x,
                const std::vector<double>& w, const std::vector<double>& b,
                const std::vector<double>& gout, Fwd fwd, BwdIn bin, BwdW bw) {
  Run r;
  r.out.assign(g.output_size(), 0.0);
  r.gin.assign(g.input_size(), 0.0);
  r.gw.assign(g.weight_size(), 0.0);
  r.gb.assign(static_cast<std::size_t>(g.out_channels), 0.0);
  fwd(g, x, w, b, r.out);
  bin(g, gout, w, r.gin);
  bw(g, gout, x, r.gw, r.gb);
  return r;
}

Run run_serial(const ConvGeometry& g, const std::vector<double>& x,
               const std::vector<double>& w, const std::vector<double>& b,
               const std::vector<double>& gout) {
  return run_kernels(g, x, w, b, gout, serial::conv2d_forward,
                     serial::conv2d_backward_input, serial::conv2d_backward_weight);
}

Run run_parallel(const ConvGeometry& g, const std::vector<double>& x,
                 const std::vector<double>& w, const std::vector<double>& b,
                 const std::vector<double>& gout) {
  return run_kernels(g, x, w, b, gout, parallel::conv2d_forward,
                     parallel::conv2d_backward_input, parallel::conv2d_backward_weight);
}

}  // namespace

TEST_CASE("forward kernels match the nested-loop oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const ConvGeometry g = random_geometry(rng);
    auto x = random_values(g.input_size(), rng);
    auto w = random_values(g.weight_size(), rng);
    auto b = trial % 3 == 0 ? std::vector<double>{}
                            : random_values(static_cast<std::size_t>(g.out_channels), rng);
    const wseg::Shape in{g.batch, g.in_channels, g.in_h, g.in_w};
    auto ref = naive_conv(in, x, g.out_channels, g.kernel_h, g.kernel_w, w, b, g.stride,
                          g.pad_h, g.pad_w, g.dilation, nullptr, nullptr);
    std::vector<double> s(g.output_size()), p(g.output_size());
    serial::conv2d_forward(g, x, w, b, s);
    parallel::conv2d_forward(g, x, w, b, p);
    CHECK(max_abs_diff(s, ref) <= 1e-12);
    CHECK(max_abs_diff(p, ref) <= 1e-12);
  }
}

TEST_CASE("backward kernels are adjoints of the forward map") {
  // <conv(x), y> == <x, conv_input^T(y)> and, for the weights,
  // <conv_w(x), y> == <w, conv_weight^T(y)> with the bias term separated.
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const ConvGeometry g = random_geometry(rng);
    auto x = random_values(g.input_size(), rng);
    auto w = random_values(g.weight_size(), rng);
    auto y = random_values(g.output_size(), rng);
    const wseg::Shape in{g.batch, g.in_channels, g.in_h, g.in_w};
    auto fx = naive_conv(in, x, g.out_channels, g.kernel_h, g.kernel_w, w, {}, g.stride,
                         g.pad_h, g.pad_w, g.dilation, nullptr, nullptr);
    const double lhs = dot(fx, y);
    for (bool par : {false, true}) {
      std::vector<double> none;
      Run r = par ? run_parallel(g, x, w, none, y) : run_serial(g, x, w, none, y);
      CHECK(std::abs(dot(x, r.gin) - lhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
      CHECK(std::abs(dot(w, r.gw) - lhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
      // Bias gradient is the per-channel sum of y.
      const std::size_t plane = static_cast<std::size_t>(g.out_h()) * g.out_w();
      for (int o = 0; o < g.out_channels; ++o) {
        double s = 0.0;
        for (int n = 0; n < g.batch; ++n)
          for (std::size_t i = 0; i < plane; ++i)
            s += y[(static_cast<std::size_t>(n) * g.out_channels + o) * plane + i];
        CHECK(std::abs(r.gb[o] - s) <= 1e-12 * std::max(1.0, std::abs(s)));
      }
    }
  }
}

TEST_CASE("serial and parallel kernels agree") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const ConvGeometry g = random_geometry(rng);
    auto x = random_values(g.input_size(), rng);
    auto w = random_values(g.weight_size(), rng);
    auto b = random_values(static_cast<std::size_t>(g.out_channels), rng);
    auto y = random_values(g.output_size(), rng);
    Run s = run_serial(g, x, w, b, y);
    Run p = run_parallel(g, x, w, b, y);
    CHECK(max_abs_diff(s.out, p.out) <= 1e-12);
    CHECK(max_abs_diff(s.gin, p.gin) <= 1e-12);
    CHECK(max_abs_diff(s.gw, p.gw) <= 1e-11);
    CHECK(max_abs_diff(s.gb, p.gb) <= 1e-11);
  }
}

TEST_CASE("backward kernels accumulate into their destinations") {
  std::mt19937_64 rng(24);
  const ConvGeometry g = random_geometry(rng);
  auto x = random_values(g.input_size(), rng);
  auto w = random_values(g.weight_size(), rng);
  auto y = random_values(g.output_size(), rng);
  std::vector<double> gin(g.input_size(), 0.0), gw(g.weight_size(), 0.0);
  std::vector<double> gb(static_cast<std::size_t>(g.out_channels), 0.0);
  parallel::conv2d_backward_input(g, y, w, gin);
  parallel::conv2d_backward_weight(g, y, x, gw, gb);
  auto gin2 = gin, gw2 = gw, gb2 = gb;
  parallel::conv2d_backward_input(g, y, w, gin2);
  parallel::conv2d_backward_weight(g, y, x, gw2, gb2);
  for (std::size_t i = 0; i < gin.size(); ++i) CHECK(std::abs(gin2[i] - 2.0 * gin[i]) <= 1e-12);
  for (std::size_t i = 0; i < gw.size(); ++i) CHECK(std::abs(gw2[i] - 2.0 * gw[i]) <= 1e-12);
  for (std::size_t i = 0; i < gb.size(); ++i) CHECK(std::abs(gb2[i] - 2.0 * gb[i]) <= 1e-12);
}

TEST_CASE("parallel kernels do not depend on the thread count") {
  std::mt19937_64 rng(25);
  ConvGeometry g;
  g.batch = 2;
  g.in_channels = 16;
  g.out_channels = 24;
  g.in_h = 12;
  g.in_w = 20;
  g.kernel_h = g.kernel_w = 3;
  g.pad_h = g.pad_w = 2;
  g.dilation = 2;
  auto x = random_values(g.input_size(), rng);
  auto w = random_values(g.weight_size(), rng);
  auto b = random_values(static_cast<std::size_t>(g.out_channels), rng);
  auto y = random_values(g.output_size(), rng);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  Run one = run_parallel(g, x, w, b, y);
  omp_set_num_threads(4);
  Run four = run_parallel(g, x, w, b, y);
  omp_set_num_threads(saved);
  CHECK(one.out == four.out);
  CHECK(one.gin == four.gin);
  CHECK(one.gw == four.gw);
  CHECK(one.gb == four.gb);
}

TEST_CASE("gemm_accumulate matches the triple loop") {
  std::mt19937_64 rng(26);
  for (auto [m, n, k] : {std::tuple{1, 1, 1}, std::tuple{7, 13, 5}, std::tuple{33, 65, 70},
                         std::tuple{64, 32, 576}}) {
    const int lda = k + 2, ldb = n + 1, ldc = n + 3;
    auto a = random_values(static_cast<std::size_t>(m) * lda, rng);
    auto b = random_values(static_cast<std::size_t>(k) * ldb, rng);
    auto c = random_values(static_cast<std::size_t>(m) * ldc, rng);
    auto ref = c;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += a[i * lda + p] * b[p * ldb + j];
        ref[i * ldc + j] += s;
      }
    gemm_accumulate(m, n, k, a.data(), lda, b.data(), ldb, c.data(), ldc);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        CHECK(std::abs(c[i * ldc + j] - ref[i * ldc + j]) <= 1e-11);
      }
      // Padding columns are untouched.
      for (int j = n; j < ldc; ++j) CHECK(c[i * ldc + j] == ref[i * ldc + j]);
    }
  }
}

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    ConvGeometry g = random_geometry(rng);
    g.batch = 1;
    const std::size_t rows = static_cast<std::size_t>(g.in_channels) * g.kernel_h * g.kernel_w;
    const std::size_t cols = static_cast<std::size_t>(g.out_h()) * g.out_w();
    auto img = random_values(g.input_size(), rng);
    auto c = random_values(rows * cols, rng);
    std::vector<double> unfolded(rows * cols);
    im2col(g, img.data(), unfolded.data());
    std::vector<double> folded(g.input_size(), 0.0);
    col2im_accumulate(g, c.data(), folded.data());
    const double lhs = dot(unfolded, c), rhs = dot(img, folded);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}
