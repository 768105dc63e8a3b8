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

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wseg {

// (N, C, H, W) extents of a dense row-major tensor.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t index(int in, int ic, int ih, int iw) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw;
  }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One vertex of the dynamic tape. The backward closure reads self.grad and
// accumulates into the grads of self.parents.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Handle to a tape node. Copies share storage; values produced by an
// operation are never written again, only leaves (parameters, inputs) are.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<const double> data() const;
  // Leaves only. Writing into an operation result would corrupt the tape.
  std::span<double> mutable_data();

  double item() const;
  double at(int n, int c, int h, int w) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Fresh leaf holding a copy of the values, disconnected from the tape.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Reverse sweep from a one-element tensor. Gradients accumulate into every
// reachable requires_grad tensor; the interior of the graph is released
// afterwards so a second call on the same loss only sees the leaves.
void backward(const Tensor& loss);

bool grad_enabled();

// Disables tape recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Creates an operation result. The backward closure is kept only when
// recording is enabled and one of the inputs needs a gradient.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward);

}  // namespace detail

}  // namespace wseg
