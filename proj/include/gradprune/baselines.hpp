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

#ifndef GRADPRUNE_BASELINES_HPP_
#define GRADPRUNE_BASELINES_HPP_

#include <vector>

#include "gradprune/data.hpp"
#include "gradprune/finetune.hpp"
#include "gradprune/model.hpp"

namespace gradprune {

// Fine-tuning only: clean_train for training, clean_val for early stopping.
// No backdoor data, no pruning.
FineTuneResult ft_defense(const Model& model, const DefenderDataset& defender,
                          const FineTuneConfig& cfg);

// Mean absolute output of every filter of the last conv layer over `data`.
std::vector<double> last_conv_activations(const Model& model,
                                          const LabeledDataset& data);

struct FinePruningResult {
  std::vector<FilterId> pruned;
  FineTuneResult tuned;
};

// Ranks the last conv layer's filters by mean absolute activation on
// clean_train (ascending, lower index first on ties), prunes the lowest
// floor(prune_fraction * filters), then runs ft_defense.
FinePruningResult fine_pruning_defense(const Model& model,
                                       const DefenderDataset& defender,
                                       double prune_fraction,
                                       const FineTuneConfig& cfg);

}  // namespace gradprune

#endif  // GRADPRUNE_BASELINES_HPP_
