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

#include "gradprune/finetune.hpp"

#include <random>

#include "json.hpp"

#include "gradprune/errors.hpp"

namespace gradprune {

void FineTuneConfig::validate() const {
  sgd.validate();
  if (patience < 1) throw ConfigError("fine-tuning patience must be >= 1");
  if (!(improvement_tol >= 0.0)) throw ConfigError("improvement_tol must be >= 0");
}

std::string FineTuneResult::to_jsonl() const {
  std::string out;
  for (std::size_t e = 0; e < val_loss.size(); ++e) {
    nlohmann::ordered_json j;
    j["epoch"] = e;
    if (e == 0) {
      j["train_loss"] = nullptr;
    } else {
      j["train_loss"] = train_loss[e - 1];
    }
    j["val_loss"] = val_loss[e];
    j["best"] = e == best_epoch;
    out += j.dump();
    out += '\n';
  }
  return out;
}

FineTuneResult train_with_early_stopping(const Model& model,
                                         const LabeledDataset& train,
                                         const LabeledDataset& val,
                                         const FineTuneConfig& cfg) {
  cfg.validate();
  if (train.empty() || val.empty()) {
    throw InputError("fine-tuning needs non-empty train and validation sets");
  }

  FineTuneResult result{model, {}, {}, 0, 0};
  Model current = model;
  double best_loss = mean_loss(current, val);
  result.val_loss.push_back(best_loss);

  SgdOptimizer optimizer(cfg.sgd.learning_rate, cfg.sgd.momentum);
  std::mt19937_64 rng(cfg.sgd.seed);
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.sgd.epochs; ++epoch) {
    result.train_loss.push_back(
        sgd_epoch(current, train, optimizer, rng, cfg.sgd.batch_size, epoch));
    const double loss = mean_loss(current, val);
    result.val_loss.push_back(loss);
    result.epochs_run = epoch;
    if (loss < best_loss - cfg.improvement_tol) {
      best_loss = loss;
      result.model = current;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

FineTuneResult fine_tune(const Model& model, const DefenderDataset& defender,
                         const FineTuneConfig& cfg) {
  return train_with_early_stopping(
      model, concat(defender.clean_train, defender.backdoor_train),
      concat(defender.clean_val, defender.backdoor_val), cfg);
}

}  // namespace gradprune
