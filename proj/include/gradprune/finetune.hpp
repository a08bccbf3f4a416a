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

#ifndef GRADPRUNE_FINETUNE_HPP_
#define GRADPRUNE_FINETUNE_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "gradprune/data.hpp"
#include "gradprune/model.hpp"
#include "gradprune/trainer.hpp"

namespace gradprune {

struct FineTuneConfig {
  // `sgd.epochs` caps the number of epochs.
  SgdConfig sgd{0.01, 0.9, 16, 100, 0};
  // Consecutive non-improving epochs tolerated before stopping.
  std::size_t patience = 5;
  double improvement_tol = 1e-4;

  void validate() const;
};

struct FineTuneResult {
  Model model;
  // val_loss[0] is the loss before any training; val_loss[e] after epoch e.
  std::vector<double> val_loss;
  // train_loss[e - 1] is the mean mini-batch loss of epoch e.
  std::vector<double> train_loss;
  // Epoch of the returned checkpoint (0 = unchanged input model).
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;

  // One JSON record per epoch: {"epoch","train_loss","val_loss","best"}.
  std::string to_jsonl() const;
};

// SGD on `train` with early stopping on the mean loss over `val`: stops once
// `patience` consecutive epochs fail to beat the best loss by more than the
// tolerance, and returns the best checkpoint (earliest on ties). Masked
// filters stay exactly zero.
FineTuneResult train_with_early_stopping(const Model& model,
                                         const LabeledDataset& train,
                                         const LabeledDataset& val,
                                         const FineTuneConfig& cfg);

// Recovery after pruning: trains on clean_train + backdoor_train (original
// labels on both) and validates on clean_val + backdoor_val.
FineTuneResult fine_tune(const Model& model, const DefenderDataset& defender,
                         const FineTuneConfig& cfg);

}  // namespace gradprune

#endif  // GRADPRUNE_FINETUNE_HPP_
