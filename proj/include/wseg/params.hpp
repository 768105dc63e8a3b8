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

// Declarative layer descriptions and the parameter store built from them.
//
// A ModuleSpec tree is the single source of truth for which tensors a block
// owns. Enumeration is a depth-first walk in child order, which fixes the
// checkpoint layout and the order in which initial values are drawn.

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wseg/ops.hpp"
#include "wseg/tensor.hpp"

namespace wseg {

enum class ParamRole : std::uint8_t {
  conv_weight = 0,
  conv_bias = 1,
  norm_gamma = 2,
  norm_beta = 3,
  running_mean = 4,  // buffer, not trained
  running_var = 5,   // buffer, not trained
};

bool is_trainable(ParamRole role);
const char* role_name(ParamRole role);

struct ModuleSpec {
  enum class Kind { group, conv, batch_norm };

  Kind kind = Kind::group;
  std::string name;
  // conv
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  bool bias = false;
  // batch_norm
  int channels = 0;
  std::vector<ModuleSpec> children;

  static ModuleSpec group(std::string name, std::vector<ModuleSpec> children);
  static ModuleSpec conv(std::string name, int in, int out, int kh, int kw,
                         bool bias);
  static ModuleSpec norm(std::string name, int channels);
};

struct ParamInfo {
  std::string name;  // dotted path, e.g. "neck.b1.conv.weight"
  Shape shape;
  ParamRole role;
};

std::vector<ParamInfo> enumerate_params(const ModuleSpec& spec);

struct ParamCount {
  std::map<std::string, std::int64_t> by_name;
  std::int64_t conv_weights = 0;
  std::int64_t conv_biases = 0;
  std::int64_t norm_params = 0;

  std::int64_t total() const { return conv_weights + conv_biases + norm_params; }
};

// Trainable parameters only; running statistics are buffers.
ParamCount count_params(const ModuleSpec& spec);

struct ParamEntry {
  std::string name;
  ParamRole role;
  Tensor tensor;
};

class ParameterSet {
 public:
  ParameterSet() = default;

  // Allocates every tensor of the spec: gamma and running_var start at one,
  // everything else at zero.
  static ParameterSet allocate(const ModuleSpec& spec);

  // Fan-in scaled normal draws for conv weights in enumeration order.
  void initialize(std::mt19937_64& rng);

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }

  void zero_grad();

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Prefix-scoped accessor handed to block forward functions.
class ParamView {
 public:
  ParamView(ParameterSet& set, std::string prefix)
      : set_(&set), prefix_(std::move(prefix)) {}

  ParamView sub(std::string_view child) const;
  Tensor& operator[](std::string_view suffix) const;
  bool contains(std::string_view suffix) const;
  ConvParams conv(std::string_view child, int stride, int pad_h, int pad_w,
                  int dilation) const;
  RunningStats stats(std::string_view child) const;
  const std::string& prefix() const { return prefix_; }

 private:
  std::string join(std::string_view suffix) const;

  ParameterSet* set_;
  std::string prefix_;
};

}  // namespace wseg
