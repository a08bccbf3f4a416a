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

#ifndef GRADPRUNE_OPS_HPP_
#define GRADPRUNE_OPS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "gradprune/tensor.hpp"

// Forward and backward kernels for the handful of layers the models use.
// Kernels are pure; backward variants accumulate (+=) into caller buffers so
// that parameters shared by several graph nodes sum their contributions.
//
// Summation order is fixed: every reduction walks its operands in row-major
// order of the reduced axes, so results are bit-reproducible.
namespace gradprune::ops {

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// input NCHW, weights OIHW, bias O.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias, Conv2dGeometry geometry);

void conv2d_backward(const Tensor& input, const Tensor& weights,
                     std::span<const double> grad_output,
                     Conv2dGeometry geometry, std::span<double> grad_input,
                     std::span<double> grad_weights,
                     std::span<double> grad_bias);

// input N x I, weights I x O, bias O.
Tensor dense_forward(const Tensor& input, const Tensor& weights,
                     const Tensor& bias);

void dense_backward(const Tensor& input, const Tensor& weights,
                    std::span<const double> grad_output,
                    std::span<double> grad_input,
                    std::span<double> grad_weights,
                    std::span<double> grad_bias);

Tensor relu_forward(const Tensor& input);

void relu_backward(const Tensor& input, std::span<const double> grad_output,
                   std::span<double> grad_input);

struct PoolResult {
  Tensor output;
  // Flat index into the input of the element selected for each output.
  std::vector<std::size_t> argmax;
};

// Ties inside a window resolve to the first maximum in row-major order.
PoolResult max_pool2d_forward(const Tensor& input, std::size_t window,
                              std::size_t stride);

void max_pool2d_backward(const PoolResult& forward,
                         std::span<const double> grad_output,
                         std::span<double> grad_input);

struct CrossEntropyResult {
  double loss = 0.0;
  // Row-wise softmax of the logits, kept for the backward pass.
  Tensor probabilities;
};

// Mean over the batch of -log softmax(logits)[label], stabilized by
// subtracting the row maximum.
CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                         std::span<const std::size_t> labels);

// Per-sample losses, same stabilization. Returned in batch order.
std::vector<double> softmax_cross_entropy_per_sample(
    const Tensor& logits, std::span<const std::size_t> labels);

void softmax_cross_entropy_backward(const CrossEntropyResult& forward,
                                    std::span<const std::size_t> labels,
                                    double grad_loss,
                                    std::span<double> grad_logits);

// Index of the largest logit in each row; ties go to the lowest class.
std::vector<std::size_t> argmax_rows(const Tensor& logits);

}  // namespace gradprune::ops

#endif  // GRADPRUNE_OPS_HPP_
