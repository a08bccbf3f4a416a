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

#ifndef GRADPRUNE_MODEL_HPP_
#define GRADPRUNE_MODEL_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "gradprune/autograd.hpp"
#include "gradprune/tensor.hpp"

namespace gradprune {

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;

  Shape chw() const { return {channels, height, width}; }
  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

// Address of one convolutional filter: `layer` counts conv layers only
// (0 = first conv layer), `filter` is the output channel.
struct FilterId {
  std::size_t layer = 0;
  std::size_t filter = 0;
  friend auto operator<=>(const FilterId&, const FilterId&) = default;
};

std::string to_string(const FilterId& id);

// Set of pruned filters. Ordered by (layer, filter).
class PruneMask {
 public:
  bool contains(const FilterId& id) const { return pruned_.count(id) != 0; }
  // Returns false when the id was already present.
  bool insert(const FilterId& id) { return pruned_.insert(id).second; }
  std::size_t size() const { return pruned_.size(); }
  bool empty() const { return pruned_.empty(); }
  auto begin() const { return pruned_.begin(); }
  auto end() const { return pruned_.end(); }
  friend bool operator==(const PruneMask&, const PruneMask&) = default;

 private:
  std::set<FilterId> pruned_;
};

struct Conv2dLayer {
  Tensor weight;  // OIHW
  Tensor bias;    // O
  std::size_t stride = 1;
  std::size_t padding = 1;
};

struct ReluLayer {};

struct MaxPoolLayer {
  std::size_t window = 2;
  std::size_t stride = 2;
};

struct FlattenLayer {};

struct DenseLayer {
  Tensor weight;  // in x out
  Tensor bias;    // out
};

using Layer =
    std::variant<Conv2dLayer, ReluLayer, MaxPoolLayer, FlattenLayer, DenseLayer>;

// Non-owning reference to one trainable tensor.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

struct ConstParamRef {
  std::string name;
  const Tensor* tensor = nullptr;
};

// Feed-forward CNN: an ordered layer list plus the mask of pruned filters.
// Masked filters always hold zero weights and bias.
class Model {
 public:
  Model(std::string arch, std::size_t num_classes, ImageShape input_shape,
        std::uint64_t seed, std::vector<Layer> layers);

  const std::string& arch() const { return arch_; }
  std::size_t num_classes() const { return num_classes_; }
  const ImageShape& input_shape() const { return input_shape_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<Layer>& layers() const { return layers_; }
  const PruneMask& mask() const { return mask_; }

  std::size_t conv_layer_count() const { return conv_layers_.size(); }
  // Index into layers() of the l-th conv layer.
  std::size_t conv_layer_position(std::size_t conv_layer) const;
  std::size_t filter_count(std::size_t conv_layer) const;
  std::size_t total_filter_count() const;
  std::vector<FilterId> all_filters() const;
  bool is_valid(const FilterId& id) const;

  const Conv2dLayer& conv(std::size_t conv_layer) const;
  Conv2dLayer& conv(std::size_t conv_layer);

  // Parameters in declaration order: per layer, weight then bias.
  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;

  // Logits for an NCHW batch.
  Tensor forward(const Tensor& batch) const;
  // Outputs of every layer in order; the last entry is the logits.
  std::vector<Tensor> forward_trace(const Tensor& batch) const;
  // Records the forward pass on `graph`, registering every parameter.
  Var forward(Graph& graph, Var input) const;

  // Zeroes the filter's weights and bias and records it in the mask.
  void prune_filter(const FilterId& id);
  // Re-zeroes every masked filter. Idempotent.
  void apply_mask();
  // Zeroes gradient slices of masked filters.
  void mask_gradients(GradientSet& grads) const;

  friend bool operator==(const Model&, const Model&);

 private:
  void check_batch(const Tensor& batch) const;

  std::string arch_;
  std::size_t num_classes_;
  ImageShape input_shape_;
  std::uint64_t seed_;
  std::vector<Layer> layers_;
  std::vector<std::size_t> conv_layers_;
  PruneMask mask_;
};

// Known architectures: "cnn-small" (conv 8, conv 16) and "cnn-medium"
// (conv 16, 16, 32, 32). He-normal weights from a generator seeded with
// `seed`, zero biases.
Model build_model(const std::string& arch, std::size_t num_classes,
                  ImageShape input_shape, std::uint64_t seed);

std::vector<std::string> known_architectures();

// Copy of `model` with filter `id` pruned.
Model prune_filter(const Model& model, const FilterId& id);

// Parameter name used in GradientSets for the weight or bias of layer i.
std::string weight_name(std::size_t layer_index);
std::string bias_name(std::size_t layer_index);

}  // namespace gradprune

#endif  // GRADPRUNE_MODEL_HPP_
