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

// Differentiable operations on NCHW tensors. Each one records a backward
// closure on the tape when an input requires a gradient.

#pragma once

#include <span>
#include <vector>

#include "wseg/tensor.hpp"

namespace wseg {

// Atrous convolution parameters. Padding is zero padding; a "same" sized
// output for odd kernels uses padding = dilation * (k - 1) / 2.
struct ConvParams {
  Tensor weight;  // (C_out, C_in, k_h, k_w)
  Tensor bias;    // (1, C_out, 1, 1) or undefined
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;
  int dilation = 1;
};

Tensor conv2d(const Tensor& input, const ConvParams& params);

// Output extent along one axis, or <= 0 when the kernel does not fit.
int conv_output_size(int in, int kernel, int stride, int padding, int dilation);

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Running statistics live in leaf tensors of shape (1, C, 1, 1) and are
// updated in place during training-mode calls.
struct RunningStats {
  Tensor mean;
  Tensor var;
};

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  RunningStats& stats, bool training);

enum class Activation { relu, sigmoid };

Tensor activation(const Tensor& input, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }
inline Tensor sigmoid(const Tensor& x) {
  return activation(x, Activation::sigmoid);
}

// Mean over the W axis: (N, C, H, W) -> (N, C, H, 1).
Tensor avg_pool_width(const Tensor& input);
// Mean over H and W: (N, C, H, W) -> (N, C, 1, 1).
Tensor global_avg_pool(const Tensor& input);

// Align-corners bilinear resampling of the two spatial axes.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

// b must match a, or have extent 1 on N and/or W where a does not.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor concat_channels(std::span<const Tensor> parts);

// Integer label maps (N, H, W) in row-major order.
struct Labels {
  int n = 0;
  int h = 0;
  int w = 0;
  std::vector<int> values;
};

// Weighted mean of -log softmax(logits)[y] over non-ignored pixels,
// normalised by the sum of the applied class weights.
Tensor softmax_cross_entropy(const Tensor& logits, const Labels& labels,
                             std::span<const double> class_weights,
                             int ignore_index);

// Per-pixel argmax over channels; ties go to the smaller class index.
Labels argmax_channels(const Tensor& logits);

}  // namespace wseg
