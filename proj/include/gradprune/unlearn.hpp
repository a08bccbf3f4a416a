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

#ifndef GRADPRUNE_UNLEARN_HPP_
#define GRADPRUNE_UNLEARN_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gradprune/autograd.hpp"
#include "gradprune/data.hpp"
#include "gradprune/model.hpp"

// Backdoor removal by unlearning-gradient filter pruning.
//
// The unlearning loss is the cross-entropy of the backdoored model on
// triggered inputs against their true labels. Filters whose parameters carry
// the largest mean absolute gradient of that loss are the ones most
// responsible for routing triggered inputs to the target class; they are
// zeroed one at a time until clean accuracy or the loss says stop.
namespace gradprune {

// Mean cross-entropy over the backdoor set (triggered images, original
// labels). Throws InputError on an empty set.
double unlearning_loss(const Model& model, const LabeledDataset& backdoor_set);

using FilterScores = std::map<FilterId, double>;

// Mean absolute unlearning-loss gradient per unpruned conv filter:
//   score = (sum |dL/dw| [+ |dL/db|]) / (#weights [+ 1]).
// Pruned filters are absent from the map. Throws StateError when every
// filter is already pruned.
FilterScores filter_scores(const Model& model, const LabeledDataset& backdoor_set,
                           bool include_bias = true);

// Same score computed from a precomputed gradient set.
FilterScores filter_scores_from_gradients(const Model& model,
                                          const GradientSet& grads,
                                          bool include_bias = true);

// Highest score; ties go to the lowest (layer, filter).
FilterId select_filter(const FilterScores& scores);

// Prunes the selected filter of a copy of `model`.
std::pair<FilterId, Model> prune_round(const Model& model,
                                       const FilterScores& scores);

enum class AlphaMode { absolute, drop };
enum class StopReason { accuracy_floor, loss_plateau, filters_exhausted };

std::string to_string(AlphaMode mode);
std::string to_string(StopReason reason);
AlphaMode parse_alpha_mode(const std::string& text);

struct PruneConfig {
  AlphaMode alpha_mode = AlphaMode::drop;
  // Absolute floor on validation ACC, or the largest allowed drop from the
  // pre-pruning validation ACC.
  double alpha = 0.10;
  // Consecutive non-improving rounds tolerated before stopping.
  std::size_t patience = 10;
  // A round improves only if val loss < best - improvement_tol.
  double improvement_tol = 1e-4;
  bool include_bias = true;

  void validate() const;
};

struct PruneRound {
  std::size_t round = 0;  // 1-based
  FilterId filter;
  double score = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  bool reverted = false;
};

struct PruneTrace {
  double initial_val_loss = 0.0;
  double initial_val_acc = 0.0;
  double acc_floor = 0.0;
  std::vector<PruneRound> rounds;
  StopReason stop_reason = StopReason::filters_exhausted;
  // Round whose model was returned; 0 means the unpruned input model.
  std::size_t returned_round = 0;

  // Filters pruned in the returned model, in pruning order.
  std::vector<FilterId> kept_prunes() const;
  // One JSON record per round:
  // {"round","layer","filter","xi","val_loss","val_acc","reverted"}.
  std::string to_jsonl() const;
};

struct PruneResult {
  Model model;
  PruneTrace trace;
};

// Repeats {score on backdoor_train, prune the argmax filter, evaluate
// clean_val ACC and backdoor_val unlearning loss} until
//  - val ACC falls below the floor: that round is reverted; or
//  - val loss fails to improve for `patience` consecutive rounds: the model
//    is rolled back to the round with the lowest val loss; or
//  - no unpruned filter remains: rolled back as for a plateau.
PruneResult prune_loop(const Model& model, const DefenderDataset& defender,
                       const PruneConfig& cfg);

}  // namespace gradprune

#endif  // GRADPRUNE_UNLEARN_HPP_
