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

#ifndef GRADPRUNE_TRAINER_HPP_
#define GRADPRUNE_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gradprune/autograd.hpp"
#include "gradprune/data.hpp"
#include "gradprune/model.hpp"

namespace gradprune {

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;

  // Throws ConfigError when a field is outside its domain.
  void validate() const;
};

// Heavy-ball SGD: v <- momentum * v + g; p <- p - lr * v.
class SgdOptimizer {
 public:
  SgdOptimizer(double learning_rate, double momentum)
      : learning_rate_(learning_rate), momentum_(momentum) {}

  // Gradient slices of masked filters are zeroed before the update, so
  // masked parameters never move.
  void step(Model& model, GradientSet grads);

 private:
  double learning_rate_;
  double momentum_;
  std::map<std::string, std::vector<double>> velocity_;
};

// One pass over `data` in an order shuffled by `rng`; returns the mean
// mini-batch loss. `epoch` only labels divergence errors.
double sgd_epoch(Model& model, const LabeledDataset& data, SgdOptimizer& optimizer,
                 std::mt19937_64& rng, std::size_t batch_size, std::size_t epoch);

struct TrainResult {
  Model model;
  // Mean mini-batch loss of each epoch.
  std::vector<double> epoch_loss;
};

// Mini-batch SGD on the mean cross-entropy. Shuffles with `cfg.seed` every
// epoch. Throws NumericError on a non-finite loss.
TrainResult train(Model model, const LabeledDataset& data, const SgdConfig& cfg);

// Mean cross-entropy of the model over the whole dataset.
double mean_loss(const Model& model, const LabeledDataset& data);

// Gradient of the mean cross-entropy over the whole dataset. Large sets are
// processed in fixed-size chunks whose gradients are combined with
// size weights, in chunk order.
GradientSet loss_gradients(const Model& model, const LabeledDataset& data);

// Logits for every sample, evaluated in fixed-size chunks.
Tensor predict_logits(const Model& model, const Tensor& images);

struct BackdoorTrainResult {
  Model model;
  PoisonedDataset poisoned;
  std::vector<double> epoch_loss;
};

// Builds `arch` with `cfg.seed`, poisons `clean` with the same seed, and
// trains on the poisoned set.
BackdoorTrainResult train_backdoored(const std::string& arch,
                                     const LabeledDataset& clean,
                                     const TriggerSpec& trigger,
                                     double poison_ratio, const SgdConfig& cfg);

}  // namespace gradprune

#endif  // GRADPRUNE_TRAINER_HPP_
