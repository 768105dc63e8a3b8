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

#include "wseg/network.hpp"

#include <random>
#include <string>

#include "wseg/error.hpp"

namespace wseg {

NetworkConfig NetworkConfig::resolved() const {
  NetworkConfig c = *this;
  c.neck.c_in = c.stage_channels[3];
  if (c.hanet) {
    c.hanet->c_l = c.stage_channels[3];
    c.hanet->c_h = c.neck.c_b;
  }
  c.validate();
  return c;
}

void NetworkConfig::validate() const {
  if (num_classes < 2) throw ConfigError("network: num_classes must be >= 2");
  if (output_stride != 8 && output_stride != 16) {
    throw ConfigError("network: output_stride must be 8 or 16, got " +
                      std::to_string(output_stride));
  }
  if (height < 1 || width < 1 || height % output_stride != 0 ||
      width % output_stride != 0) {
    throw ConfigError("network: input " + std::to_string(height) + "x" +
                      std::to_string(width) + " is not divisible by output stride " +
                      std::to_string(output_stride));
  }
  if (stem_channels < 1 || low_level_channels < 1 || decoder_channels < 1) {
    throw ConfigError("network: channel widths must be >= 1");
  }
  for (int c : stage_channels) {
    if (c < 1) throw ConfigError("network: stage widths must be >= 1");
  }
  if (neck.c_in != stage_channels[3]) {
    throw ConfigError("network: neck input width must equal the last stage width");
  }
  neck.validate();
  if (hanet) {
    if (hanet->c_l != stage_channels[3] || hanet->c_h != neck.c_b) {
      throw ConfigError("network: attention widths do not match backbone and neck");
    }
    hanet->validate();
  }
}

ModuleSpec network_spec(const NetworkConfig& config) {
  const auto& sc = config.stage_channels;
  const int last_stride = config.output_stride == 16 ? 2 : 1;
  const int cb = config.neck.c_b;
  const int dec = config.decoder_channels;
  std::vector<ModuleSpec> top;
  top.push_back(conv_bn_spec("stem", 3, config.stem_channels, 3, 3));
  top.push_back(residual_block_spec("stage1", config.stem_channels, sc[0], 2));
  top.push_back(residual_block_spec("stage2", sc[0], sc[1], 2));
  top.push_back(residual_block_spec("stage3", sc[1], sc[2], 1));
  top.push_back(residual_block_spec("stage4", sc[2], sc[3], last_stride));
  top.push_back(neck_spec(config.neck, "neck"));
  top.push_back(ModuleSpec::group(
      "decoder",
      {conv_bn_spec("low", sc[0], config.low_level_channels, 1, 1),
       conv_bn_spec("c1", cb + config.low_level_channels, dec, 3, 3),
       conv_bn_spec("c2", dec, dec, 3, 3),
       ModuleSpec::conv("cls", dec, config.num_classes, 1, 1, true)}));
  if (config.aux_enabled) {
    top.push_back(ModuleSpec::group(
        "aux", {ModuleSpec::conv("cls", sc[2], config.num_classes, 1, 1, true)}));
  }
  // Attention parameters come last so that the draws for everything else do
  // not depend on whether attention is present.
  if (config.hanet) top.push_back(hanet_spec(*config.hanet, "hanet"));
  return ModuleSpec::group("", std::move(top));
}

Network Network::build(const NetworkConfig& config, std::uint64_t seed) {
  Network net;
  net.config_ = config.resolved();
  net.spec_ = network_spec(net.config_);
  net.params_ = ParameterSet::allocate(net.spec_);
  std::mt19937_64 rng(seed);
  net.params_.initialize(rng);
  return net;
}

ForwardResult Network::forward(const Tensor& batch) {
  const Shape s = batch.shape();
  if (s.c != 3) throw DimensionError("network: input must have 3 channels, got " + std::to_string(s.c));
  if (s.h != config_.height) {
    throw DimensionError("network: input height " + std::to_string(s.h) +
                         " does not match configured " + std::to_string(config_.height));
  }
  if (s.w != config_.width) {
    throw DimensionError("network: input width " + std::to_string(s.w) +
                         " does not match configured " + std::to_string(config_.width));
  }
  const bool tr = training_;
  const ParamView root(params_, "");
  const bool os16 = config_.output_stride == 16;

  Tensor x = conv_bn_relu(batch, root, "stem", 2, 1, 1, tr);
  Tensor low = residual_block_forward(x, root.sub("stage1"), 2, 1, tr);
  x = residual_block_forward(low, root.sub("stage2"), 2, 1, tr);
  Tensor mid = residual_block_forward(x, root.sub("stage3"), 1, 1, tr);
  Tensor top = residual_block_forward(mid, root.sub("stage4"), os16 ? 2 : 1,
                                      os16 ? 1 : 2, tr);

  Tensor neck = neck_forward(top, config_.neck, root.sub("neck"), tr);
  if (config_.hanet) {
    const Shape ns = neck.shape();
    Tensor a = unit_attention_
                   ? Tensor::full({ns.n, ns.c, ns.h, 1}, 1.0)
                   : hanet_attention(top, *config_.hanet, root.sub("hanet"), ns.h);
    neck = hanet_apply(neck, a);
  }

  const ParamView dec = root.sub("decoder");
  const Shape ls = low.shape();
  Tensor up = bilinear_resize(neck, ls.h, ls.w);
  Tensor reduced = conv_bn_relu(low, dec, "low", 1, 0, 1, tr);
  const Tensor parts[] = {up, reduced};
  Tensor d = concat_channels(parts);
  d = conv_bn_relu(d, dec, "c1", 1, 1, 1, tr);
  d = conv_bn_relu(d, dec, "c2", 1, 1, 1, tr);
  Tensor logits = conv2d(d, dec.conv("cls", 1, 0, 0, 1));

  ForwardResult out;
  out.main = bilinear_resize(logits, s.h, s.w);
  if (tr && config_.aux_enabled) {
    Tensor aux = conv2d(mid, root.conv("aux.cls", 1, 0, 0, 1));
    out.aux = bilinear_resize(aux, s.h, s.w);
  }
  return out;
}

Labels Network::predict(const Tensor& images) {
  const bool was_training = training_;
  training_ = false;
  NoGradGuard no_grad;
  Labels labels;
  try {
    labels = argmax_channels(forward(images).main);
  } catch (...) {
    training_ = was_training;
    throw;
  }
  training_ = was_training;
  return labels;
}

}  // namespace wseg
