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
#include <cstring>

#include "wseg/kernels/conv.hpp"

namespace wseg::kernels {

namespace {
constexpr int kTileRows = 4;
constexpr int kTileCols = 16;
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long kParallelWork = 1L << 16;
}  // namespace

void gemm_accumulate(int m, int n, int k, const double* a, int lda,
                     const double* b, int ldb, double* c, int ldc) {
  if (m <= 0 || n <= 0 || k <= 0) return;
  const int row_tiles = (m + kTileRows - 1) / kTileRows;
  const long work = static_cast<long>(m) * n * k;
#pragma omp parallel for schedule(static) if (row_tiles > 1 && work > kParallelWork)
  for (int t = 0; t < row_tiles; ++t) {
    const int i0 = t * kTileRows;
    const int rows = std::min(kTileRows, m - i0);
    int j0 = 0;
    if (rows == kTileRows) {
      const double* a0 = a + static_cast<long>(i0) * lda;
      const double* a1 = a0 + lda;
      const double* a2 = a1 + lda;
      const double* a3 = a2 + lda;
      for (; j0 + kTileCols <= n; j0 += kTileCols) {
        double acc[kTileRows][kTileCols];
        for (int r = 0; r < kTileRows; ++r) {
          std::memcpy(acc[r], c + static_cast<long>(i0 + r) * ldc + j0,
                      sizeof(acc[r]));
        }
        for (int p = 0; p < k; ++p) {
          const double* brow = b + static_cast<long>(p) * ldb + j0;
          const double x0 = a0[p];
          const double x1 = a1[p];
          const double x2 = a2[p];
          const double x3 = a3[p];
#pragma omp simd
          for (int j = 0; j < kTileCols; ++j) {
            acc[0][j] += x0 * brow[j];
            acc[1][j] += x1 * brow[j];
            acc[2][j] += x2 * brow[j];
            acc[3][j] += x3 * brow[j];
          }
        }
        for (int r = 0; r < kTileRows; ++r) {
          std::memcpy(c + static_cast<long>(i0 + r) * ldc + j0, acc[r],
                      sizeof(acc[r]));
        }
      }
    }
    // Ragged edge: remaining columns of a full tile, or every column of a
    // short tile. Same ascending-k order as the tiled path.
    for (int i = i0; i < i0 + rows; ++i) {
      const double* arow = a + static_cast<long>(i) * lda;
      double* crow = c + static_cast<long>(i) * ldc;
      for (int j = j0; j < n; ++j) {
        double s = crow[j];
        for (int p = 0; p < k; ++p) s += arow[p] * b[static_cast<long>(p) * ldb + j];
        crow[j] = s;
      }
    }
  }
}

void im2col(const ConvGeometry& g, const double* image, double* columns) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  const long pixels = static_cast<long>(oh_n) * ow_n;
#pragma omp parallel for schedule(static) if (g.in_channels > 1 && pixels * g.in_channels > 4096)
  for (int ci = 0; ci < g.in_channels; ++ci) {
    const double* plane = image + static_cast<long>(ci) * g.in_h * g.in_w;
    for (int kh = 0; kh < g.kernel_h; ++kh) {
      for (int kw = 0; kw < g.kernel_w; ++kw) {
        double* row = columns +
                      ((static_cast<long>(ci) * g.kernel_h + kh) * g.kernel_w + kw) *
                          pixels;
        for (int oh = 0; oh < oh_n; ++oh) {
          const int ih = oh * g.stride - g.pad_h + kh * g.dilation;
          double* dst = row + static_cast<long>(oh) * ow_n;
          if (ih < 0 || ih >= g.in_h) {
            std::fill(dst, dst + ow_n, 0.0);
            continue;
          }
          const double* src = plane + static_cast<long>(ih) * g.in_w;
          for (int ow = 0; ow < ow_n; ++ow) {
            const int iw = ow * g.stride - g.pad_w + kw * g.dilation;
            dst[ow] = (iw >= 0 && iw < g.in_w) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_accumulate(const ConvGeometry& g, const double* columns,
                       double* image) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  const long pixels = static_cast<long>(oh_n) * ow_n;
  // Each channel plane is written by exactly one thread.
#pragma omp parallel for schedule(static) if (g.in_channels > 1 && pixels * g.in_channels > 4096)
  for (int ci = 0; ci < g.in_channels; ++ci) {
    double* plane = image + static_cast<long>(ci) * g.in_h * g.in_w;
    for (int kh = 0; kh < g.kernel_h; ++kh) {
      for (int kw = 0; kw < g.kernel_w; ++kw) {
        const double* row =
            columns +
            ((static_cast<long>(ci) * g.kernel_h + kh) * g.kernel_w + kw) * pixels;
        for (int oh = 0; oh < oh_n; ++oh) {
          const int ih = oh * g.stride - g.pad_h + kh * g.dilation;
          if (ih < 0 || ih >= g.in_h) continue;
          const double* src = row + static_cast<long>(oh) * ow_n;
          double* dst = plane + static_cast<long>(ih) * g.in_w;
          for (int ow = 0; ow < ow_n; ++ow) {
            const int iw = ow * g.stride - g.pad_w + kw * g.dilation;
            if (iw >= 0 && iw < g.in_w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace wseg::kernels
