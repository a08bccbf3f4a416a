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

#include "gradprune/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradprune/errors.hpp"
#include "gradprune/ops.hpp"

namespace gradprune {

namespace {

constexpr std::size_t kChunk = 256;

void check_compatible(const Model& model, const LabeledDataset& data) {
  if (data.empty()) throw InputError("dataset is empty");
  if (!(data.image_shape() == model.input_shape())) {
    throw DimensionError("dataset images " +
                         shape_to_string(data.image_shape().chw()) +
                         " do not match model input " +
                         shape_to_string(model.input_shape().chw()));
  }
  if (data.num_classes > model.num_classes()) {
    throw DimensionError("dataset has more classes than the model outputs");
  }
}

}  // namespace

void SgdConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
}

void SgdOptimizer::step(Model& model, GradientSet grads) {
  model.mask_gradients(grads);
  for (auto& param : model.parameters()) {
    auto it = grads.find(param.name);
    if (it == grads.end()) continue;
    auto& v = velocity_[param.name];
    if (v.empty()) v.assign(param.tensor->size(), 0.0);
    const auto g = it->second.data();
    auto p = param.tensor->data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      p[i] -= learning_rate_ * v[i];
    }
  }
}

double sgd_epoch(Model& model, const LabeledDataset& data, SgdOptimizer& optimizer,
                 std::mt19937_64& rng, std::size_t batch_size, std::size_t epoch) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    const std::span<const std::size_t> idx(order.data() + begin, end - begin);
    const LabeledDataset batch = data.subset(idx);

    Graph graph;
    Var logits = model.forward(graph, graph.constant(batch.images));
    Var loss = graph.softmax_cross_entropy(logits, batch.labels);
    const double value = graph.value(loss)[0];
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batches));
    }
    optimizer.step(model, graph.backward(loss));
    total += value;
    ++batches;
  }
  return total / static_cast<double>(batches);
}

TrainResult train(Model model, const LabeledDataset& data, const SgdConfig& cfg) {
  cfg.validate();
  check_compatible(model, data);

  SgdOptimizer optimizer(cfg.learning_rate, cfg.momentum);
  std::mt19937_64 rng(cfg.seed);
  TrainResult result{std::move(model), {}};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    result.epoch_loss.push_back(
        sgd_epoch(result.model, data, optimizer, rng, cfg.batch_size, epoch));
  }
  return result;
}

Tensor predict_logits(const Model& model, const Tensor& images) {
  const std::size_t n = images.dim(0);
  std::vector<double> out;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    Tensor logits = model.forward(images.rows(begin, end));
    out.insert(out.end(), logits.data().begin(), logits.data().end());
  }
  return Tensor({n, model.num_classes()}, std::move(out));
}

double mean_loss(const Model& model, const LabeledDataset& data) {
  check_compatible(model, data);
  const Tensor logits = predict_logits(model, data.images);
  return ops::softmax_cross_entropy(logits, data.labels).loss;
}

GradientSet loss_gradients(const Model& model, const LabeledDataset& data) {
  check_compatible(model, data);
  GradientSet total;
  const double n = static_cast<double>(data.size());
  for (std::size_t begin = 0; begin < data.size(); begin += kChunk) {
    const std::size_t end = std::min(data.size(), begin + kChunk);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const LabeledDataset chunk = data.subset(idx);
    Graph graph;
    Var logits = model.forward(graph, graph.constant(chunk.images));
    GradientSet grads =
        graph.backward(graph.softmax_cross_entropy(logits, chunk.labels));
    if (end - begin == data.size()) return grads;
    const double weight = static_cast<double>(end - begin) / n;
    for (auto& [name, g] : grads) {
      auto [it, inserted] = total.try_emplace(name, Tensor(g.shape()));
      auto dst = it->second.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * g[i];
    }
  }
  return total;
}

BackdoorTrainResult train_backdoored(const std::string& arch,
                                     const LabeledDataset& clean,
                                     const TriggerSpec& trigger,
                                     double poison_ratio, const SgdConfig& cfg) {
  cfg.validate();
  Model model = build_model(arch, clean.num_classes, clean.image_shape(), cfg.seed);
  PoisonedDataset poisoned = poison_training_set(clean, trigger, poison_ratio, cfg.seed);
  TrainResult trained = train(std::move(model), poisoned.data, cfg);
  return {std::move(trained.model), std::move(poisoned), std::move(trained.epoch_loss)};
}

}  // namespace gradprune
