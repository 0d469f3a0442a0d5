// Copyright 2026 The atfmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "atfmag/nn/tensor.hpp"

namespace atfmag::nn {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// grad += g, allocating on first use.
  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

}  // namespace detail

/// Handle to a value in a reverse-mode graph. Copies share the node.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  /// A leaf whose gradient is collected by backward().
  static Var parameter(Tensor value);

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Gradient after backward(); zeros if nothing flowed into this node.
  Tensor grad() const;

  detail::Node* node() const { return node_.get(); }

  using BackwardFn = std::function<void(detail::Node& self)>;
  /// Builds an op result. If no input requires a gradient the graph edges are
  /// dropped, so inference keeps no intermediate state alive.
  static Var make(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Back-propagates from a scalar (size-1) root. Gradients accumulate into
/// every reachable node that requires them.
void backward(const Var& root);

}  // namespace atfmag::nn
