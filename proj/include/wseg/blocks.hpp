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

// Segmentation building blocks: the pooling necks (parallel ASPP and the
// cascaded WASP), height-driven attention, and the backbone residual block.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "wseg/params.hpp"
#include "wseg/tensor.hpp"

namespace wseg {

struct NeckSpec {
  enum class Kind { aspp, wasp };

  Kind kind = Kind::aspp;
  int c_in = 64;
  int c_b = 16;
  std::array<int, 3> rates{2, 4, 6};

  // Throws ConfigError unless rates are strictly increasing and >= 2 and
  // 1 <= c_b <= c_in.
  void validate() const;
};

const char* neck_kind_name(NeckSpec::Kind kind);

struct HanetSpec {
  int c_l = 64;
  int c_h = 16;
  int h_hat = 8;
  int reduction = 4;
  double pe_base = 100.0;
  bool enable_pe = true;

  int bottleneck() const { return c_l / reduction; }
  void validate() const;
};

// conv (no bias) followed by batch norm, named <name>.conv / <name>.bn.
ModuleSpec conv_bn_spec(std::string name, int in, int out, int kh, int kw);
ModuleSpec neck_spec(const NeckSpec& spec, std::string name = "neck");
ModuleSpec hanet_spec(const HanetSpec& spec, std::string name = "hanet");
// Children a, b and, when stride != 1 or in != out, proj.
ModuleSpec residual_block_spec(std::string name, int in, int out, int stride);

// conv2d on <child>.conv then batch_norm on <child>.bn, optionally relu.
Tensor conv_bn(const Tensor& x, const ParamView& p, std::string_view child,
               int stride, int pad, int dilation, bool training);
Tensor conv_bn_relu(const Tensor& x, const ParamView& p, std::string_view child,
                    int stride, int pad, int dilation, bool training);

// (1, c, h_hat, 1): channel 2i at row p holds sin(p / base^(2i/c)),
// channel 2i+1 the cosine of the same argument.
Tensor positional_encoding(int h_hat, int c, double base);

// Height-driven attention map (N, C_h, target_h, 1) computed from x_l.
Tensor hanet_attention(const Tensor& x_l, const HanetSpec& spec,
                       const ParamView& params, int target_h);

// x_h scaled row-wise per channel: out[n,c,h,w] = a[n,c,h,0] * x_h[n,c,h,w].
Tensor hanet_apply(const Tensor& x_h, const Tensor& a);

Tensor aspp_forward(const Tensor& x, const NeckSpec& spec,
                    const ParamView& params, bool training);
Tensor wasp_forward(const Tensor& x, const NeckSpec& spec,
                    const ParamView& params, bool training);
// Dispatches on spec.kind.
Tensor neck_forward(const Tensor& x, const NeckSpec& spec,
                    const ParamView& params, bool training);

// The five WASP stream outputs s0..s4 after norm and relu, before concat.
std::vector<Tensor> wasp_streams(const Tensor& x, const NeckSpec& spec,
                                 const ParamView& params, bool training);

Tensor residual_block_forward(const Tensor& x, const ParamView& params,
                              int stride, int dilation, bool training);

}  // namespace wseg
