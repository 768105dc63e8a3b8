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

// Miniature encoder-decoder segmentation network.
//
//   stem (s2) -> stage1 (s4, low-level tap) -> stage2 (s8) -> stage3 (s8, aux)
//   -> stage4 (s16, or s8 with dilation 2) -> neck [-> height attention]
//   -> x4 upsample ++ reduced low-level -> 2x conv3x3 -> 1x1 classifier
//   -> resize to input.

#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "wseg/blocks.hpp"
#include "wseg/ops.hpp"
#include "wseg/params.hpp"
#include "wseg/tensor.hpp"

namespace wseg {

struct NetworkConfig {
  int num_classes = 3;
  int height = 64;
  int width = 128;
  int output_stride = 16;
  int stem_channels = 16;
  std::array<int, 4> stage_channels{16, 32, 64, 64};
  int low_level_channels = 8;
  int decoder_channels = 16;
  NeckSpec neck;  // c_in is overwritten with stage_channels[3]
  std::optional<HanetSpec> hanet;  // c_l / c_h are overwritten likewise
  bool aux_enabled = true;

  // Fills derived channel counts and checks every invariant.
  NetworkConfig resolved() const;
  void validate() const;
};

ModuleSpec network_spec(const NetworkConfig& config);

struct ForwardResult {
  Tensor main;
  Tensor aux;  // undefined unless training with the aux head enabled
};

class Network {
 public:
  static Network build(const NetworkConfig& config, std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }
  const ModuleSpec& spec() const { return spec_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  bool training() const { return training_; }
  void set_training(bool training) { training_ = training; }

  // Debug hook: replace the attention map with ones.
  void set_unit_attention(bool flag) { unit_attention_ = flag; }

  ForwardResult forward(const Tensor& batch);
  // Eval-mode argmax of the main logits, (N, H, W).
  Labels predict(const Tensor& images);

 private:
  NetworkConfig config_;
  ModuleSpec spec_;
  ParameterSet params_;
  bool training_ = true;
  bool unit_attention_ = false;
};

}  // namespace wseg
