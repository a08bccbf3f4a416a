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

#include <algorithm>

#include "doctest.h"
#include "gradprune/errors.hpp"
#include "gradprune/finetune.hpp"
#include "gradprune/metrics.hpp"
#include "gradprune/trainer.hpp"
#include "test_support.hpp"

using namespace gradprune;

TEST_CASE("zero learning rate with patience 1 stops after one epoch") {
  const auto& f = testing::small_backdoor();
  const DefenderDataset d = make_defender_split(f.pool, 10, f.trigger, 1);
  FineTuneConfig cfg;
  cfg.sgd.learning_rate = 0.0;
  cfg.patience = 1;
  const FineTuneResult r = fine_tune(f.model, d, cfg);
  CHECK(r.epochs_run == 1);
  CHECK(r.best_epoch == 0);
  CHECK(r.model == f.model);
  CHECK(r.val_loss.size() == 2);
  CHECK(r.val_loss[0] == r.val_loss[1]);
}

TEST_CASE("early stopping invariants on a pruned backdoored model") {
  const auto& f = testing::small_backdoor();
  for (std::uint64_t seed : {1u, 2u}) {
    const DefenderDataset d = make_defender_split(f.pool, 10, f.trigger, seed);
    Model pruned = f.model;
    pruned.prune_filter({1, 0});
    pruned.prune_filter({0, 3});
    FineTuneConfig cfg;
    cfg.sgd.seed = seed;
    cfg.patience = 3;
    const FineTuneResult r = fine_tune(pruned, d, cfg);
    CHECK(r.model.mask() == pruned.mask());
    CHECK_NOTHROW(r.model.forward(d.clean_val.images));
    for (const FilterId& id : r.model.mask()) {
      const Conv2dLayer& conv = r.model.conv(id.layer);
      const std::size_t per = conv.weight.size() / conv.weight.dim(0);
      for (std::size_t k = 0; k < per; ++k) CHECK(conv.weight[id.filter * per + k] == 0.0);
      CHECK(conv.bias[id.filter] == 0.0);
    }
    CHECK(r.val_loss[r.best_epoch] <= r.val_loss[0]);
    for (std::size_t e = 0; e < r.best_epoch; ++e) CHECK(r.val_loss[e] > r.val_loss[r.best_epoch]);
    CHECK(r.epochs_run <= r.best_epoch + cfg.patience);
    CHECK(r.val_loss.size() == r.epochs_run + 1);
    CHECK(r.train_loss.size() == r.epochs_run);
    const LabeledDataset val = concat(d.clean_val, d.backdoor_val);
    CHECK(mean_loss(r.model, val) == r.val_loss[r.best_epoch]);
  }
}

TEST_CASE("earliest checkpoint wins ties") {
  // A frozen learning rate keeps every epoch tied with epoch 0.
  const ImageShape shape{1, 8, 8};
  const Model m = testing::constant_predictor(0, 4, shape);
  const LabeledDataset data = generate_synthetic(4, 5, shape, 1);
  FineTuneConfig cfg;
  cfg.sgd.learning_rate = 0.0;
  cfg.patience = 4;
  const FineTuneResult r = train_with_early_stopping(m, data, data, cfg);
  CHECK(r.best_epoch == 0);
  CHECK(r.epochs_run == 4);
}

TEST_CASE("fine-tune trace has one record per evaluated epoch") {
  const auto& f = testing::small_backdoor();
  const DefenderDataset d = make_defender_split(f.pool, 2, f.trigger, 1);
  FineTuneConfig cfg;
  cfg.patience = 2;
  const FineTuneResult r = fine_tune(f.model, d, cfg);
  const std::string s = r.to_jsonl();
  CHECK(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) == r.epochs_run + 1);
  CHECK(s.find("\"train_loss\":null") != std::string::npos);
}

TEST_CASE("fine-tune config validation") {
  FineTuneConfig cfg;
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
