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

#include "gradprune/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <type_traits>

#include "gradprune/errors.hpp"

namespace gradprune {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Tensor he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(
      0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Appends layers while tracking the running activation shape.
class ArchBuilder {
 public:
  ArchBuilder(ImageShape input, std::uint64_t seed)
      : channels_(input.channels),
        height_(input.height),
        width_(input.width),
        rng_(seed) {}

  ArchBuilder& conv(std::size_t filters) {
    const std::size_t kernel = 3, padding = 1, stride = 1;
    if (height_ + 2 * padding < kernel || width_ + 2 * padding < kernel) {
      throw ConfigError("input too small for a 3x3 convolution");
    }
    layers_.push_back(Conv2dLayer{
        he_normal({filters, channels_, kernel, kernel},
                  channels_ * kernel * kernel, rng_),
        Tensor({filters}), stride, padding});
    channels_ = filters;
    height_ = (height_ + 2 * padding - kernel) / stride + 1;
    width_ = (width_ + 2 * padding - kernel) / stride + 1;
    return *this;
  }

  ArchBuilder& relu() {
    layers_.push_back(ReluLayer{});
    return *this;
  }

  ArchBuilder& pool() {
    if (height_ < 2 || width_ < 2) {
      throw ConfigError("input too small for 2x2 max pooling");
    }
    layers_.push_back(MaxPoolLayer{2, 2});
    height_ = (height_ - 2) / 2 + 1;
    width_ = (width_ - 2) / 2 + 1;
    return *this;
  }

  std::vector<Layer> finish(std::size_t num_classes) {
    layers_.push_back(FlattenLayer{});
    const std::size_t features = channels_ * height_ * width_;
    layers_.push_back(DenseLayer{he_normal({features, num_classes}, features, rng_),
                                 Tensor({num_classes})});
    return std::move(layers_);
  }

 private:
  std::size_t channels_, height_, width_;
  std::mt19937_64 rng_;
  std::vector<Layer> layers_;
};

Tensor forward_layer(const Layer& layer, const Tensor& x) {
  return std::visit(
      Overloaded{
          [&](const Conv2dLayer& c) {
            return ops::conv2d_forward(x, c.weight, c.bias,
                                       {c.stride, c.padding});
          },
          [&](const ReluLayer&) { return ops::relu_forward(x); },
          [&](const MaxPoolLayer& p) {
            return ops::max_pool2d_forward(x, p.window, p.stride).output;
          },
          [&](const FlattenLayer&) {
            return x.reshaped({x.dim(0), x.size() / x.dim(0)});
          },
          [&](const DenseLayer& d) {
            return ops::dense_forward(x, d.weight, d.bias);
          }},
      layer);
}

}  // namespace

std::string to_string(const FilterId& id) {
  return "(" + std::to_string(id.layer) + "," + std::to_string(id.filter) + ")";
}

std::string weight_name(std::size_t layer_index) {
  return "layer" + std::to_string(layer_index) + ".weight";
}

std::string bias_name(std::size_t layer_index) {
  return "layer" + std::to_string(layer_index) + ".bias";
}

Model::Model(std::string arch, std::size_t num_classes, ImageShape input_shape,
             std::uint64_t seed, std::vector<Layer> layers)
    : arch_(std::move(arch)),
      num_classes_(num_classes),
      input_shape_(input_shape),
      seed_(seed),
      layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (std::holds_alternative<Conv2dLayer>(layers_[i])) conv_layers_.push_back(i);
  }
}

std::size_t Model::conv_layer_position(std::size_t conv_layer) const {
  if (conv_layer >= conv_layers_.size()) {
    throw InputError("conv layer " + std::to_string(conv_layer) +
                     " out of range (model has " +
                     std::to_string(conv_layers_.size()) + ")");
  }
  return conv_layers_[conv_layer];
}

const Conv2dLayer& Model::conv(std::size_t conv_layer) const {
  return std::get<Conv2dLayer>(layers_[conv_layer_position(conv_layer)]);
}

Conv2dLayer& Model::conv(std::size_t conv_layer) {
  return std::get<Conv2dLayer>(layers_[conv_layer_position(conv_layer)]);
}

std::size_t Model::filter_count(std::size_t conv_layer) const {
  return conv(conv_layer).weight.dim(0);
}

std::size_t Model::total_filter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < conv_layers_.size(); ++l) total += filter_count(l);
  return total;
}

std::vector<FilterId> Model::all_filters() const {
  std::vector<FilterId> ids;
  for (std::size_t l = 0; l < conv_layers_.size(); ++l) {
    for (std::size_t f = 0; f < filter_count(l); ++f) ids.push_back({l, f});
  }
  return ids;
}

bool Model::is_valid(const FilterId& id) const {
  return id.layer < conv_layers_.size() && id.filter < filter_count(id.layer);
}

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (auto* c = std::get_if<Conv2dLayer>(&layers_[i])) {
      out.push_back({weight_name(i), &c->weight});
      out.push_back({bias_name(i), &c->bias});
    } else if (auto* d = std::get_if<DenseLayer>(&layers_[i])) {
      out.push_back({weight_name(i), &d->weight});
      out.push_back({bias_name(i), &d->bias});
    }
  }
  return out;
}

std::vector<ConstParamRef> Model::parameters() const {
  std::vector<ConstParamRef> out;
  for (auto& p : const_cast<Model*>(this)->parameters()) {
    out.push_back({p.name, p.tensor});
  }
  return out;
}

void Model::check_batch(const Tensor& batch) const {
  if (batch.rank() != 4 || batch.dim(1) != input_shape_.channels ||
      batch.dim(2) != input_shape_.height ||
      batch.dim(3) != input_shape_.width) {
    throw DimensionError("model expects N x " +
                         shape_to_string(input_shape_.chw()) +
                         " input, got " + shape_to_string(batch.shape()));
  }
}

Tensor Model::forward(const Tensor& batch) const {
  check_batch(batch);
  Tensor x = batch;
  for (const auto& layer : layers_) x = forward_layer(layer, x);
  return x;
}

std::vector<Tensor> Model::forward_trace(const Tensor& batch) const {
  check_batch(batch);
  std::vector<Tensor> outputs;
  outputs.reserve(layers_.size());
  const Tensor* x = &batch;
  for (const auto& layer : layers_) {
    outputs.push_back(forward_layer(layer, *x));
    x = &outputs.back();
  }
  return outputs;
}

Var Model::forward(Graph& graph, Var input) const {
  check_batch(graph.value(input));
  Var x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = std::visit(
        Overloaded{
            [&](const Conv2dLayer& c) {
              Var w = graph.parameter(weight_name(i), c.weight);
              Var b = graph.parameter(bias_name(i), c.bias);
              return graph.conv2d(x, w, b, {c.stride, c.padding});
            },
            [&](const ReluLayer&) { return graph.relu(x); },
            [&](const MaxPoolLayer& p) {
              return graph.max_pool2d(x, p.window, p.stride);
            },
            [&](const FlattenLayer&) { return graph.flatten(x); },
            [&](const DenseLayer& d) {
              Var w = graph.parameter(weight_name(i), d.weight);
              Var b = graph.parameter(bias_name(i), d.bias);
              return graph.dense(x, w, b);
            }},
        layers_[i]);
  }
  return x;
}

namespace {

void zero_filter(Conv2dLayer& layer, std::size_t filter) {
  const std::size_t per_filter = layer.weight.size() / layer.weight.dim(0);
  auto w = layer.weight.data().subspan(filter * per_filter, per_filter);
  std::fill(w.begin(), w.end(), 0.0);
  layer.bias[filter] = 0.0;
}

}  // namespace

void Model::prune_filter(const FilterId& id) {
  if (!is_valid(id)) {
    throw InputError("filter " + to_string(id) + " does not exist in " + arch_);
  }
  if (mask_.contains(id)) {
    throw StateError("filter " + to_string(id) + " is already pruned");
  }
  zero_filter(conv(id.layer), id.filter);
  mask_.insert(id);
}

void Model::apply_mask() {
  for (const auto& id : mask_) zero_filter(conv(id.layer), id.filter);
}

void Model::mask_gradients(GradientSet& grads) const {
  for (const auto& id : mask_) {
    const std::size_t pos = conv_layer_position(id.layer);
    if (auto it = grads.find(weight_name(pos)); it != grads.end()) {
      const std::size_t per_filter = it->second.size() / it->second.dim(0);
      auto g = it->second.data().subspan(id.filter * per_filter, per_filter);
      std::fill(g.begin(), g.end(), 0.0);
    }
    if (auto it = grads.find(bias_name(pos)); it != grads.end()) {
      it->second[id.filter] = 0.0;
    }
  }
}

bool operator==(const Model& a, const Model& b) {
  if (a.arch_ != b.arch_ || a.num_classes_ != b.num_classes_ ||
      !(a.input_shape_ == b.input_shape_) || a.seed_ != b.seed_ ||
      !(a.mask_ == b.mask_) || a.layers_.size() != b.layers_.size()) {
    return false;
  }
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].name != pb[i].name || !(*pa[i].tensor == *pb[i].tensor)) return false;
  }
  return true;
}

std::vector<std::string> known_architectures() { return {"cnn-small", "cnn-medium"}; }

Model build_model(const std::string& arch, std::size_t num_classes,
                  ImageShape input_shape, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (input_shape.size() == 0) throw ConfigError("input shape has a zero axis");
  ArchBuilder b(input_shape, seed);
  if (arch == "cnn-small") {
    b.conv(8).relu().pool().conv(16).relu().pool();
  } else if (arch == "cnn-medium") {
    b.conv(16).relu().conv(16).relu().pool().conv(32).relu().conv(32).relu().pool();
  } else {
    throw ConfigError("unknown architecture '" + arch +
                      "' (expected cnn-small or cnn-medium)");
  }
  return Model(arch, num_classes, input_shape, seed, b.finish(num_classes));
}

Model prune_filter(const Model& model, const FilterId& id) {
  Model copy = model;
  copy.prune_filter(id);
  return copy;
}

}  // namespace gradprune
