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
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradprune/errors.hpp"
#include "gradprune/metrics.hpp"
#include "test_support.hpp"

using namespace gradprune;

namespace {

const ImageShape kShape{1, 8, 8};
const std::vector<double> kLevels{0.2, 0.4, 0.6, 0.8};

// Darkens the bottom-right 2x2 block, aligned with both pooling grids.
TriggerSpec darkening_patch() { return TriggerSpec::bottom_right_patch(kShape, 0, 2, 0.0); }

}  // namespace

TEST_CASE("constant predictor: accuracy is the class share") {
  const Model m = testing::constant_predictor(0, 4, kShape);
  const LabeledDataset test = testing::level_dataset(kLevels, 5, kShape);
  CHECK(eval_acc(m, test) == 0.25);
}

TEST_CASE("trigger-invariant classifier: full accuracy, no attack success") {
  const Model m = testing::level_classifier(kLevels, kShape);
  const LabeledDataset test = testing::level_dataset(kLevels, 5, kShape);
  const MetricsReport r = evaluate(m, test, darkening_patch());
  CHECK(r.acc == 1.0);
  CHECK(r.asr == 0.0);
  CHECK(r.ra == 1.0);
  CHECK(r.n_clean_eval == 20);
  CHECK(r.n_trigger_eval == 15);
}

TEST_CASE("always-target predictor: full attack success, no robust accuracy") {
  const Model m = testing::constant_predictor(0, 4, kShape);
  const LabeledDataset test = testing::level_dataset(kLevels, 5, kShape);
  const MetricsReport r = evaluate(m, test, darkening_patch());
  CHECK(r.asr == 1.0);
  CHECK(r.ra == 0.0);
}

TEST_CASE("a test set made only of target-class samples cannot score ASR") {
  const Model m = testing::constant_predictor(0, 4, kShape);
  const LabeledDataset only_target =
      testing::level_dataset(kLevels, 3, kShape).subset(std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(eval_asr(m, only_target, darkening_patch()), InputError);
}

TEST_CASE("rates match direct counting on a backdoored model") {
  const auto& f = testing::small_backdoor();
  const std::vector<std::size_t> clean_pred = predict(f.model, f.test.images);
  const std::vector<std::size_t> trig_pred =
      predict(f.model, apply_trigger(f.test, f.trigger).images);
  std::size_t correct = 0, hit = 0, robust = 0, eligible = 0;
  for (std::size_t i = 0; i < f.test.size(); ++i) {
    correct += clean_pred[i] == f.test.labels[i];
    if (f.test.labels[i] == f.trigger.target) continue;
    ++eligible;
    hit += trig_pred[i] == f.trigger.target;
    robust += trig_pred[i] == f.test.labels[i];
  }
  const MetricsReport r = evaluate(f.model, f.test, f.trigger);
  CHECK(r.acc == static_cast<double>(correct) / static_cast<double>(f.test.size()));
  CHECK(r.asr == static_cast<double>(hit) / static_cast<double>(eligible));
  CHECK(r.ra == static_cast<double>(robust) / static_cast<double>(eligible));
}

TEST_CASE("ASR + RA never exceeds one") {
  const LabeledDataset test = generate_synthetic(4, 20, kShape, 5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Model m = build_model("cnn-small", 4, kShape, seed);
    const TriggerSpec trig = TriggerSpec::bottom_right_patch(kShape, seed % 4);
    CHECK(eval_asr(m, test, trig) + eval_ra(m, test, trig) <= 1.0);
  }
}

TEST_CASE("rates do not depend on test-set order") {
  const auto& f = testing::small_backdoor();
  std::vector<std::size_t> order(f.test.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(4));
  const LabeledDataset shuffled = f.test.subset(order);
  const MetricsReport a = evaluate(f.model, f.test, f.trigger);
  const MetricsReport b = evaluate(f.model, shuffled, f.trigger);
  CHECK(a.acc == b.acc);
  CHECK(a.asr == b.asr);
  CHECK(a.ra == b.ra);
}

TEST_CASE("report rendering") {
  MetricsReport r;
  r.acc = 0.5;
  r.asr = 0.125;
  r.ra = 1.0 / 3.0;
  r.stage = "post-prune";
  r.trial = 2;
  r.spc = 10;
  r.attack = "badnets";
  r.defense = "ours";
  CHECK(std::string(MetricsReport::csv_header()) == "stage,trial,spc,attack,defense,acc,asr,ra");
  CHECK(r.to_csv_row() == "post-prune,2,10,badnets,ours,0.500000,0.125000,0.333333");
  CHECK(r.to_json_line().find("\"stage\":\"post-prune\"") != std::string::npos);
  CHECK(format_rate(1.0) == "1.000000");
}
