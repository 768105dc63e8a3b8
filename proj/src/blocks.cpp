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

#include "wseg/blocks.hpp"

#include <algorithm>
#include <cmath>

#include "wseg/error.hpp"
#include "wseg/ops.hpp"

namespace wseg {

void NeckSpec::validate() const {
  if (c_b < 1 || c_in < 1) throw ConfigError("neck: channel counts must be >= 1");
  if (c_b > c_in) {
    throw ConfigError("neck: branch width " + std::to_string(c_b) +
                      " exceeds input channels " + std::to_string(c_in));
  }
  if (rates[0] < 2 || rates[0] >= rates[1] || rates[1] >= rates[2]) {
    throw ConfigError("neck: rates must be strictly increasing and >= 2");
  }
}

const char* neck_kind_name(NeckSpec::Kind kind) {
  return kind == NeckSpec::Kind::aspp ? "aspp" : "wasp";
}

void HanetSpec::validate() const {
  if (c_l < 1 || c_h < 1) throw ConfigError("hanet: channel counts must be >= 1");
  if (h_hat < 2) throw ConfigError("hanet: h_hat must be >= 2");
  if (reduction < 1 || c_l % reduction != 0) {
    throw ConfigError("hanet: reduction " + std::to_string(reduction) +
                      " does not divide c_l " + std::to_string(c_l));
  }
  if (enable_pe && bottleneck() % 2 != 0) {
    throw ConfigError("hanet: positional encoding needs an even bottleneck width");
  }
  if (!(pe_base > 1.0)) throw ConfigError("hanet: pe_base must be > 1");
}

ModuleSpec conv_bn_spec(std::string name, int in, int out, int kh, int kw) {
  return ModuleSpec::group(std::move(name),
                           {ModuleSpec::conv("conv", in, out, kh, kw, false),
                            ModuleSpec::norm("bn", out)});
}

ModuleSpec neck_spec(const NeckSpec& spec, std::string name) {
  spec.validate();
  const int ci = spec.c_in;
  const int cb = spec.c_b;
  std::vector<ModuleSpec> children;
  if (spec.kind == NeckSpec::Kind::aspp) {
    children.push_back(conv_bn_spec("b0", ci, cb, 1, 1));
    children.push_back(conv_bn_spec("b1", ci, cb, 3, 3));
    children.push_back(conv_bn_spec("b2", ci, cb, 3, 3));
    children.push_back(conv_bn_spec("b3", ci, cb, 3, 3));
  } else {
    children.push_back(conv_bn_spec("s0", ci, cb, 1, 1));
    children.push_back(conv_bn_spec("s1", ci, cb, 3, 3));
    children.push_back(conv_bn_spec("s2", cb, cb, 3, 3));
    children.push_back(conv_bn_spec("s3", cb, cb, 3, 3));
  }
  children.push_back(conv_bn_spec("pool", ci, cb, 1, 1));
  children.push_back(conv_bn_spec("fuse", 5 * cb, cb, 1, 1));
  return ModuleSpec::group(std::move(name), std::move(children));
}

ModuleSpec hanet_spec(const HanetSpec& spec, std::string name) {
  spec.validate();
  const int mid = spec.bottleneck();
  return ModuleSpec::group(
      std::move(name), {ModuleSpec::conv("conv1", spec.c_l, mid, 3, 1, true),
                        ModuleSpec::conv("conv2", mid, spec.c_h, 3, 1, true)});
}

ModuleSpec residual_block_spec(std::string name, int in, int out, int stride) {
  std::vector<ModuleSpec> children{conv_bn_spec("a", in, out, 3, 3),
                                   conv_bn_spec("b", out, out, 3, 3)};
  if (stride != 1 || in != out) children.push_back(conv_bn_spec("proj", in, out, 1, 1));
  return ModuleSpec::group(std::move(name), std::move(children));
}

Tensor conv_bn(const Tensor& x, const ParamView& p, std::string_view child,
               int stride, int pad, int dilation, bool training) {
  const ParamView v = p.sub(child);
  Tensor y = conv2d(x, v.conv("conv", stride, pad, pad, dilation));
  RunningStats stats = v.stats("bn");
  return batch_norm(y, v["bn.gamma"], v["bn.beta"], stats, training);
}

Tensor conv_bn_relu(const Tensor& x, const ParamView& p, std::string_view child,
                    int stride, int pad, int dilation, bool training) {
  return relu(conv_bn(x, p, child, stride, pad, dilation, training));
}

namespace {

Tensor pooling_branch(const Tensor& x, const ParamView& p, bool training) {
  const Shape s = x.shape();
  Tensor g = conv_bn_relu(global_avg_pool(x), p, "pool", 1, 0, 1, training);
  return bilinear_resize(g, s.h, s.w);
}

void check_neck_input(const Tensor& x, const NeckSpec& spec) {
  if (x.shape().c != spec.c_in) {
    throw DimensionError("neck: input has " + std::to_string(x.shape().c) +
                         " channels, spec expects " + std::to_string(spec.c_in));
  }
}

Tensor fuse(const std::vector<Tensor>& parts, const Tensor& x,
            const ParamView& p, bool training) {
  const Shape s = x.shape();
  for (const Tensor& t : parts) {
    if (t.shape().h != s.h || t.shape().w != s.w) {
      throw InternalError("neck: branch produced " + t.shape().str() +
                          " for input " + s.str());
    }
  }
  return conv_bn_relu(concat_channels(parts), p, "fuse", 1, 0, 1, training);
}

}  // namespace

Tensor positional_encoding(int h_hat, int c, double base) {
  if (c % 2 != 0 || c < 2) {
    throw ConfigError("positional_encoding: channel count must be even, got " +
                      std::to_string(c));
  }
  if (h_hat < 1) throw ConfigError("positional_encoding: h_hat must be >= 1");
  std::vector<double> v(static_cast<std::size_t>(c) * h_hat);
  for (int i = 0; i < c / 2; ++i) {
    const double denom = std::pow(base, 2.0 * i / c);
    for (int p = 0; p < h_hat; ++p) {
      const double arg = p / denom;
      v[static_cast<std::size_t>(2 * i) * h_hat + p] = std::sin(arg);
      v[static_cast<std::size_t>(2 * i + 1) * h_hat + p] = std::cos(arg);
    }
  }
  return Tensor::from_data({1, c, h_hat, 1}, std::move(v));
}

Tensor hanet_attention(const Tensor& x_l, const HanetSpec& spec,
                       const ParamView& params, int target_h) {
  spec.validate();
  const Shape s = x_l.shape();
  if (s.c != spec.c_l) {
    throw DimensionError("hanet_attention: x_l has " + std::to_string(s.c) +
                         " channels, spec expects " + std::to_string(spec.c_l));
  }
  if (target_h < 1) throw ConfigError("hanet_attention: target height must be >= 1");
  const int coarse_h = std::max(1, std::min(spec.h_hat, s.h));

  Tensor z = avg_pool_width(x_l);
  z = bilinear_resize(z, coarse_h, 1);
  Tensor q = relu(conv2d(z, params.conv("conv1", 1, 1, 0, 1)));
  if (spec.enable_pe) {
    q = add(q, positional_encoding(coarse_h, spec.bottleneck(), spec.pe_base));
  }
  Tensor a = sigmoid(conv2d(q, params.conv("conv2", 1, 1, 0, 1)));
  return bilinear_resize(a, target_h, 1);
}

Tensor hanet_apply(const Tensor& x_h, const Tensor& a) {
  const Shape xs = x_h.shape();
  const Shape as = a.shape();
  if (as.w != 1) throw DimensionError("hanet_apply: attention width must be 1");
  if (as.n != xs.n || as.c != xs.c || as.h != xs.h) {
    throw DimensionError("hanet_apply: attention " + as.str() +
                         " does not match features " + xs.str());
  }
  return mul(x_h, a);
}

Tensor aspp_forward(const Tensor& x, const NeckSpec& spec,
                    const ParamView& params, bool training) {
  if (spec.kind != NeckSpec::Kind::aspp) throw UsageError("aspp_forward: spec is not aspp");
  check_neck_input(x, spec);
  const auto& r = spec.rates;
  std::vector<Tensor> parts;
  parts.reserve(5);
  parts.push_back(conv_bn_relu(x, params, "b0", 1, 0, 1, training));
  parts.push_back(conv_bn_relu(x, params, "b1", 1, r[0], r[0], training));
  parts.push_back(conv_bn_relu(x, params, "b2", 1, r[1], r[1], training));
  parts.push_back(conv_bn_relu(x, params, "b3", 1, r[2], r[2], training));
  parts.push_back(pooling_branch(x, params, training));
  return fuse(parts, x, params, training);
}

std::vector<Tensor> wasp_streams(const Tensor& x, const NeckSpec& spec,
                                 const ParamView& params, bool training) {
  if (spec.kind != NeckSpec::Kind::wasp) throw UsageError("wasp_forward: spec is not wasp");
  check_neck_input(x, spec);
  const auto& r = spec.rates;
  std::vector<Tensor> parts;
  parts.reserve(5);
  parts.push_back(conv_bn_relu(x, params, "s0", 1, 0, 1, training));
  parts.push_back(conv_bn_relu(x, params, "s1", 1, r[0], r[0], training));
  parts.push_back(conv_bn_relu(parts[1], params, "s2", 1, r[1], r[1], training));
  parts.push_back(conv_bn_relu(parts[2], params, "s3", 1, r[2], r[2], training));
  parts.push_back(pooling_branch(x, params, training));
  return parts;
}

Tensor wasp_forward(const Tensor& x, const NeckSpec& spec,
                    const ParamView& params, bool training) {
  return fuse(wasp_streams(x, spec, params, training), x, params, training);
}

Tensor neck_forward(const Tensor& x, const NeckSpec& spec,
                    const ParamView& params, bool training) {
  return spec.kind == NeckSpec::Kind::aspp ? aspp_forward(x, spec, params, training)
                                           : wasp_forward(x, spec, params, training);
}

Tensor residual_block_forward(const Tensor& x, const ParamView& params,
                              int stride, int dilation, bool training) {
  if (stride != 1 && stride != 2) {
    throw ConfigError("residual block: stride must be 1 or 2");
  }
  Tensor h = conv_bn_relu(x, params, "a", stride, dilation, dilation, training);
  h = conv_bn(h, params, "b", 1, dilation, dilation, training);

  Tensor shortcut = x;
  if (params.contains("proj.conv.weight")) {
    shortcut = conv_bn(x, params, "proj", stride, 0, 1, training);
  }
  if (shortcut.shape() != h.shape()) {
    throw InternalError("residual block: shortcut " + shortcut.shape().str() +
                        " does not match residual " + h.shape().str());
  }
  return relu(add(h, shortcut));
}

}  // namespace wseg
