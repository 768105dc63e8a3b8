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

// Raw 2-D convolution kernels over flat NCHW buffers.
//
// Two implementations share one contract:
//   serial::   direct loops, one output element at a time. Slow, obviously
//              correct, kept as the reference the fast path is tested against.
//   parallel:: im2col + blocked GEMM with OpenMP over output-channel tiles.
//              Every output element is reduced by a single thread in a fixed
//              order, so results do not depend on the thread count.
//
// Backward kernels accumulate (+=) into their destination buffers.

#pragma once

#include <cstddef>
#include <span>

namespace wseg::kernels {

struct ConvGeometry {
  int batch = 1;
  int in_channels = 1;
  int in_h = 1;
  int in_w = 1;
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;
  int dilation = 1;

  int out_h() const {
    return (in_h + 2 * pad_h - dilation * (kernel_h - 1) - 1) / stride + 1;
  }
  int out_w() const {
    return (in_w + 2 * pad_w - dilation * (kernel_w - 1) - 1) / stride + 1;
  }
  std::size_t input_size() const {
    return static_cast<std::size_t>(batch) * in_channels * in_h * in_w;
  }
  std::size_t output_size() const {
    return static_cast<std::size_t>(batch) * out_channels * out_h() * out_w();
  }
  std::size_t weight_size() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_h *
           kernel_w;
  }
  // True for 1x1 kernels that read the input unchanged (no im2col needed).
  bool is_pointwise() const {
    return kernel_h == 1 && kernel_w == 1 && stride == 1 && pad_h == 0 &&
           pad_w == 0;
  }
};

namespace serial {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g,
                           std::span<const double> grad_output,
                           std::span<const double> weight,
                           std::span<double> grad_input);
// grad_bias may be empty.
void conv2d_backward_weight(const ConvGeometry& g,
                            std::span<const double> grad_output,
                            std::span<const double> input,
                            std::span<double> grad_weight,
                            std::span<double> grad_bias);

}  // namespace serial

namespace parallel {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g,
                           std::span<const double> grad_output,
                           std::span<const double> weight,
                           std::span<double> grad_input);
void conv2d_backward_weight(const ConvGeometry& g,
                            std::span<const double> grad_output,
                            std::span<const double> input,
                            std::span<double> grad_weight,
                            std::span<double> grad_bias);

}  // namespace parallel

// C[m x n] += A[m x k] * B[k x n], all row-major with the given leading
// dimensions. Parallel over row tiles of C; summation order over k is fixed.
void gemm_accumulate(int m, int n, int k, const double* a, int lda,
                     const double* b, int ldb, double* c, int ldc);

// Unfolds one image (C_in x H x W) into a (C_in*kh*kw) x (H_out*W_out)
// column matrix; out-of-bounds taps are zero.
void im2col(const ConvGeometry& g, const double* image, double* columns);
// Adjoint of im2col: scatters columns back, accumulating into image.
void col2im_accumulate(const ConvGeometry& g, const double* columns,
                       double* image);

}  // namespace wseg::kernels
