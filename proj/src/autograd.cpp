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

#include "gradprune/autograd.hpp"

#include <memory>
#include <utility>

#include "gradprune/errors.hpp"

namespace gradprune {

Graph::Node& Graph::node(Var v) {
  if (v.index >= nodes_.size()) {
    throw StateError("graph variable " + std::to_string(v.index) +
                     " was never recorded");
  }
  return nodes_[v.index];
}

const Tensor& Graph::value(Var v) const {
  if (v.index >= nodes_.size()) {
    throw StateError("graph variable " + std::to_string(v.index) +
                     " was never recorded");
  }
  return nodes_[v.index].value;
}

Var Graph::push(Node n) {
  if (backward_done_) {
    throw StateError("cannot record operations after backward()");
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  return push(Node{std::move(value), {}, {}, false, nullptr});
}

Var Graph::parameter(std::string name, Tensor value) {
  return push(Node{std::move(value), {}, std::move(name), true, nullptr});
}

Var Graph::conv2d(Var input, Var weights, Var bias,
                  ops::Conv2dGeometry geometry) {
  Tensor out = ops::conv2d_forward(node(input).value, node(weights).value,
                                   node(bias).value, geometry);
  return push(Node{
      std::move(out),
      {input.index, weights.index, bias.index},
      {},
      false,
      [geometry](Graph& g, std::size_t self) {
        const auto& in = g.nodes_[self].inputs;
        ops::conv2d_backward(g.nodes_[in[0]].value, g.nodes_[in[1]].value,
                             g.nodes_[self].value.grad(), geometry,
                             g.grad_of(in[0]), g.grad_of(in[1]),
                             g.grad_of(in[2]));
      }});
}

Var Graph::dense(Var input, Var weights, Var bias) {
  Tensor out = ops::dense_forward(node(input).value, node(weights).value,
                                  node(bias).value);
  return push(Node{std::move(out),
                   {input.index, weights.index, bias.index},
                   {},
                   false,
                   [](Graph& g, std::size_t self) {
                     const auto& in = g.nodes_[self].inputs;
                     ops::dense_backward(
                         g.nodes_[in[0]].value, g.nodes_[in[1]].value,
                         g.nodes_[self].value.grad(), g.grad_of(in[0]),
                         g.grad_of(in[1]), g.grad_of(in[2]));
                   }});
}

Var Graph::relu(Var input) {
  Tensor out = ops::relu_forward(node(input).value);
  return push(Node{std::move(out),
                   {input.index},
                   {},
                   false,
                   [](Graph& g, std::size_t self) {
                     const std::size_t in = g.nodes_[self].inputs[0];
                     ops::relu_backward(g.nodes_[in].value,
                                        g.nodes_[self].value.grad(),
                                        g.grad_of(in));
                   }});
}

Var Graph::max_pool2d(Var input, std::size_t window, std::size_t stride) {
  auto pooled = std::make_shared<ops::PoolResult>(
      ops::max_pool2d_forward(node(input).value, window, stride));
  Tensor out = pooled->output;
  return push(Node{std::move(out),
                   {input.index},
                   {},
                   false,
                   [pooled](Graph& g, std::size_t self) {
                     const std::size_t in = g.nodes_[self].inputs[0];
                     ops::max_pool2d_backward(*pooled,
                                              g.nodes_[self].value.grad(),
                                              g.grad_of(in));
                   }});
}

Var Graph::flatten(Var input) {
  const Tensor& x = node(input).value;
  if (x.rank() < 1) throw DimensionError("flatten: rank-0 input");
  Tensor out = x.reshaped({x.dim(0), x.size() / x.dim(0)});
  return push(Node{std::move(out),
                   {input.index},
                   {},
                   false,
                   [](Graph& g, std::size_t self) {
                     const std::size_t in = g.nodes_[self].inputs[0];
                     auto src = g.nodes_[self].value.grad();
                     auto dst = g.grad_of(in);
                     for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
                   }});
}

Var Graph::sum(Var input) {
  double total = 0.0;
  for (double v : node(input).value.data()) total += v;
  return push(Node{Tensor({1}, total),
                   {input.index},
                   {},
                   false,
                   [](Graph& g, std::size_t self) {
                     const std::size_t in = g.nodes_[self].inputs[0];
                     const double upstream = g.nodes_[self].value.grad()[0];
                     for (double& d : g.grad_of(in)) d += upstream;
                   }});
}

Var Graph::softmax_cross_entropy(Var logits,
                                 std::span<const std::size_t> labels) {
  auto result = std::make_shared<ops::CrossEntropyResult>(
      ops::softmax_cross_entropy(node(logits).value, labels));
  auto owned_labels =
      std::make_shared<std::vector<std::size_t>>(labels.begin(), labels.end());
  const double loss = result->loss;
  return push(Node{Tensor({1}, loss),
                   {logits.index},
                   {},
                   false,
                   [result, owned_labels](Graph& g, std::size_t self) {
                     const std::size_t in = g.nodes_[self].inputs[0];
                     ops::softmax_cross_entropy_backward(
                         *result, *owned_labels,
                         g.nodes_[self].value.grad()[0], g.grad_of(in));
                   }});
}

GradientSet Graph::backward(Var loss) {
  if (nodes_.empty()) {
    throw StateError("backward() called before any forward pass");
  }
  if (backward_done_) throw StateError("backward() already ran on this graph");
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " +
                         shape_to_string(root.value.shape()));
  }
  backward_done_ = true;
  for (auto& n : nodes_) {
    n.value.grad();
    n.value.zero_grad();
  }
  root.value.grad()[0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }

  GradientSet grads;
  for (auto& n : nodes_) {
    if (!n.is_parameter) continue;
    Tensor g(n.value.shape(),
             std::vector<double>(n.value.grad().begin(), n.value.grad().end()));
    auto [it, inserted] = grads.try_emplace(n.parameter_name, g);
    if (!inserted) {
      auto dst = it->second.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
    }
  }
  return grads;
}

}  // namespace gradprune
