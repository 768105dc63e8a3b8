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

#include "wseg/params.hpp"

#include <cmath>

#include "wseg/error.hpp"

namespace wseg {

bool is_trainable(ParamRole role) {
  return role != ParamRole::running_mean && role != ParamRole::running_var;
}

const char* role_name(ParamRole role) {
  switch (role) {
    case ParamRole::conv_weight: return "conv_weight";
    case ParamRole::conv_bias: return "conv_bias";
    case ParamRole::norm_gamma: return "norm_gamma";
    case ParamRole::norm_beta: return "norm_beta";
    case ParamRole::running_mean: return "running_mean";
    case ParamRole::running_var: return "running_var";
  }
  return "unknown";
}

ModuleSpec ModuleSpec::group(std::string name, std::vector<ModuleSpec> children) {
  ModuleSpec s;
  s.kind = Kind::group;
  s.name = std::move(name);
  s.children = std::move(children);
  return s;
}

ModuleSpec ModuleSpec::conv(std::string name, int in, int out, int kh, int kw,
                            bool bias) {
  ModuleSpec s;
  s.kind = Kind::conv;
  s.name = std::move(name);
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.bias = bias;
  return s;
}

ModuleSpec ModuleSpec::norm(std::string name, int channels) {
  ModuleSpec s;
  s.kind = Kind::batch_norm;
  s.name = std::move(name);
  s.channels = channels;
  return s;
}

namespace {

void walk(const ModuleSpec& spec, const std::string& prefix,
          std::vector<ParamInfo>& out) {
  const std::string path =
      prefix.empty() ? spec.name : (spec.name.empty() ? prefix : prefix + "." + spec.name);
  switch (spec.kind) {
    case ModuleSpec::Kind::conv:
      out.push_back({path + ".weight",
                     {spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w},
                     ParamRole::conv_weight});
      if (spec.bias) {
        out.push_back({path + ".bias", {1, spec.out_channels, 1, 1}, ParamRole::conv_bias});
      }
      break;
    case ModuleSpec::Kind::batch_norm: {
      const Shape s{1, spec.channels, 1, 1};
      out.push_back({path + ".gamma", s, ParamRole::norm_gamma});
      out.push_back({path + ".beta", s, ParamRole::norm_beta});
      out.push_back({path + ".running_mean", s, ParamRole::running_mean});
      out.push_back({path + ".running_var", s, ParamRole::running_var});
      break;
    }
    case ModuleSpec::Kind::group:
      for (const auto& child : spec.children) walk(child, path, out);
      break;
  }
}

}  // namespace

std::vector<ParamInfo> enumerate_params(const ModuleSpec& spec) {
  std::vector<ParamInfo> out;
  walk(spec, "", out);
  return out;
}

ParamCount count_params(const ModuleSpec& spec) {
  ParamCount count;
  for (const ParamInfo& p : enumerate_params(spec)) {
    if (!is_trainable(p.role)) continue;
    const auto n = static_cast<std::int64_t>(p.shape.numel());
    count.by_name[p.name] = n;
    switch (p.role) {
      case ParamRole::conv_weight: count.conv_weights += n; break;
      case ParamRole::conv_bias: count.conv_biases += n; break;
      default: count.norm_params += n; break;
    }
  }
  return count;
}

ParameterSet ParameterSet::allocate(const ModuleSpec& spec) {
  ParameterSet set;
  for (ParamInfo& p : enumerate_params(spec)) {
    if (set.index_.count(p.name)) {
      throw InternalError("duplicate parameter name " + p.name);
    }
    const bool ones = p.role == ParamRole::norm_gamma || p.role == ParamRole::running_var;
    Tensor t = Tensor::full(p.shape, ones ? 1.0 : 0.0, is_trainable(p.role));
    set.index_.emplace(p.name, set.entries_.size());
    set.entries_.push_back({std::move(p.name), p.role, std::move(t)});
  }
  return set;
}

void ParameterSet::initialize(std::mt19937_64& rng) {
  for (ParamEntry& e : entries_) {
    if (e.role != ParamRole::conv_weight) continue;
    const Shape s = e.tensor.shape();
    const double fan_in = static_cast<double>(s.c) * s.h * s.w;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& v : e.tensor.mutable_data()) v = dist(rng);
  }
}

Tensor& ParameterSet::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw InternalError("unknown parameter " + std::string(name));
  return entries_[it->second].tensor;
}

const Tensor& ParameterSet::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw InternalError("unknown parameter " + std::string(name));
  return entries_[it->second].tensor;
}

bool ParameterSet::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

void ParameterSet::zero_grad() {
  for (ParamEntry& e : entries_) {
    if (is_trainable(e.role)) e.tensor.zero_grad();
  }
}

std::string ParamView::join(std::string_view suffix) const {
  if (prefix_.empty()) return std::string(suffix);
  return prefix_ + "." + std::string(suffix);
}

ParamView ParamView::sub(std::string_view child) const {
  return ParamView(*set_, join(child));
}

Tensor& ParamView::operator[](std::string_view suffix) const {
  return set_->at(join(suffix));
}

bool ParamView::contains(std::string_view suffix) const {
  return set_->contains(join(suffix));
}

ConvParams ParamView::conv(std::string_view child, int stride, int pad_h,
                           int pad_w, int dilation) const {
  const std::string base = join(child);
  ConvParams p;
  p.weight = set_->at(base + ".weight");
  if (set_->contains(base + ".bias")) p.bias = set_->at(base + ".bias");
  p.stride = stride;
  p.pad_h = pad_h;
  p.pad_w = pad_w;
  p.dilation = dilation;
  return p;
}

RunningStats ParamView::stats(std::string_view child) const {
  const std::string base = join(child);
  return {set_->at(base + ".running_mean"), set_->at(base + ".running_var")};
}

}  // namespace wseg
