/* Copyright 2026 The GradPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef GRADPRUNE_AUTOGRAD_HPP_
#define GRADPRUNE_AUTOGRAD_HPP_

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gradprune/ops.hpp"
#include "gradprune/tensor.hpp"

namespace gradprune {

// Gradients keyed by parameter name. Every key names one trainable tensor.
using GradientSet = std::map<std::string, Tensor>;

// Handle to a value recorded on a Graph.
struct Var {
  std::size_t index = 0;
};

// Tape for reverse-mode differentiation. Operations are recorded in
// execution order as they are applied; backward() walks the tape in reverse,
// accumulating gradients into each node's grad buffer.
//
// A graph is single-use: build it, read values, call backward() once.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaf that receives no gradient entry in the result.
  Var constant(Tensor value);
  // Trainable leaf; its gradient is reported under `name`.
  Var parameter(std::string name, Tensor value);

  Var conv2d(Var input, Var weights, Var bias, ops::Conv2dGeometry geometry);
  Var dense(Var input, Var weights, Var bias);
  Var relu(Var input);
  Var max_pool2d(Var input, std::size_t window, std::size_t stride);
  // Collapses every axis after the first.
  Var flatten(Var input);
  Var sum(Var input);
  Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the scalar `loss` with respect to every parameter leaf.
  // Parameters that do not reach the loss get an all-zero gradient.
  GradientSet backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    std::string parameter_name;  // empty unless a parameter leaf
    bool is_parameter = false;
    // Propagates this node's grad into its inputs' grads.
    std::function<void(Graph&, std::size_t)> backward;
  };

  Node& node(Var v);
  Var push(Node node);
  std::span<double> grad_of(std::size_t index) {
    return nodes_[index].value.grad();
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace gradprune

#endif  // GRADPRUNE_AUTOGRAD_HPP_
