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

#include "wseg/tensor.hpp"

#include <unordered_set>
#include <utility>

#include "wseg/error.hpp"

namespace wseg {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  if (value.size() != shape.numel()) {
    throw InternalError("operation produced " + std::to_string(value.size()) +
                        " values for shape " + shape.str());
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) {
      if (!t.defined()) throw InternalError("operation input is undefined");
      if (t.requires_grad()) needs = true;
    }
  }
  if (needs) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node());
  }
  return Tensor(std::move(node));
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return from_data(shape, std::vector<double>(shape.numel(), value),
                   requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values,
                         bool requires_grad) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw DimensionError("negative extent in shape " + shape.str());
  }
  if (values.size() != shape.numel()) {
    throw DimensionError("tensor data has " + std::to_string(values.size()) +
                         " elements, shape " + shape.str() + " needs " +
                         std::to_string(shape.numel()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1, 1, 1, 1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  static const Shape empty{};
  return node_ ? node_->shape : empty;
}

std::span<const double> Tensor::data() const {
  if (!node_) return {};
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) return {};
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw UsageError("item() on tensor of shape " + shape().str());
  }
  return node_->value[0];
}

double Tensor::at(int n, int c, int h, int w) const {
  return node_->value[node_->shape.index(n, c, h, w)];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (node_) node_->requires_grad = flag;
}

bool Tensor::has_grad() const {
  return node_ && node_->grad.size() == node_->value.size() &&
         !node_->value.empty();
}

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) return {};
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  return from_data(node_->shape, node_->value, false);
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() needs a one-element loss, got shape " +
                     loss.shape().str());
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order without recursion.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) {
      for (auto& p : node->parents) {
        if (p->requires_grad) p->ensure_grad();
      }
      node->backward(*node);
    }
  }
  // Interior nodes are done; drop their closures so the activations free.
  for (detail::Node* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace wseg
