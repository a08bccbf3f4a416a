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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "gradprune/errors.hpp"
#include "gradprune/metrics.hpp"
#include "gradprune/trainer.hpp"
#include "test_support.hpp"

using namespace gradprune;

namespace {

const ImageShape kShape{1, 8, 8};

}  // namespace

TEST_CASE("zero learning rate leaves every parameter unchanged") {
  const Model start = build_model("cnn-small", 4, kShape, 1);
  const LabeledDataset data = generate_synthetic(4, 10, kShape, 2);
  SgdConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  CHECK(train(start, data, cfg).model == start);
}

TEST_CASE("full-batch SGD drives a single sample's loss to ~0") {
  const LabeledDataset data = generate_synthetic(4, 1, kShape, 3).subset(std::vector<std::size_t>{2});
  SgdConfig cfg;
  cfg.batch_size = 1;
  cfg.epochs = 200;
  const TrainResult r = train(build_model("cnn-small", 4, kShape, 4), data, cfg);
  CHECK(mean_loss(r.model, data) < 0.01);
}

TEST_CASE("training is deterministic in the config seed") {
  const LabeledDataset data = generate_synthetic(4, 20, kShape, 2);
  SgdConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 9;
  const TrainResult a = train(build_model("cnn-small", 4, kShape, 1), data, cfg);
  const TrainResult b = train(build_model("cnn-small", 4, kShape, 1), data, cfg);
  CHECK(a.model == b.model);
  CHECK(a.epoch_loss == b.epoch_loss);
  cfg.seed = 10;
  CHECK_FALSE(train(build_model("cnn-small", 4, kShape, 1), data, cfg).model == a.model);
}

TEST_CASE("masked filters stay exactly zero through training") {
  Model m = build_model("cnn-small", 4, kShape, 1);
  m.prune_filter({0, 2});
  m.prune_filter({1, 7});
  SgdConfig cfg;
  cfg.epochs = 3;
  const Model trained = train(m, generate_synthetic(4, 20, kShape, 2), cfg).model;
  CHECK(trained.mask() == m.mask());
  for (const FilterId& id : trained.mask()) {
    const Conv2dLayer& conv = trained.conv(id.layer);
    const std::size_t per = conv.weight.size() / conv.weight.dim(0);
    for (std::size_t k = 0; k < per; ++k) CHECK(conv.weight[id.filter * per + k] == 0.0);
    CHECK(conv.bias[id.filter] == 0.0);
  }
}

TEST_CASE("a non-finite loss raises a numeric error naming the epoch") {
  LabeledDataset data = generate_synthetic(4, 20, kShape, 2);
  data.images[7] = std::numeric_limits<double>::quiet_NaN();
  SgdConfig cfg;
  cfg.epochs = 2;
  try {
    train(build_model("cnn-small", 4, kShape, 1), data, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("invalid SGD settings are config errors") {
  SgdConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SgdConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("chunked loss gradients equal a single-graph gradient") {
  const Model m = build_model("cnn-small", 4, kShape, 3);
  const LabeledDataset data = generate_synthetic(4, 80, kShape, 4);
  const GradientSet chunked = loss_gradients(m, data);
  Graph g;
  const GradientSet direct =
      g.backward(g.softmax_cross_entropy(m.forward(g, g.constant(data.images)), data.labels));
  for (const auto& [name, t] : direct)
    for (std::size_t i = 0; i < t.size(); ++i)
      CHECK(std::abs(chunked.at(name)[i] - t[i]) <= 1e-12 * std::max(1.0, std::abs(t[i])));
}

TEST_CASE("backdoor training plants a working backdoor") {
  const auto& f = testing::small_backdoor();
  const MetricsReport r = evaluate(f.model, f.test, f.trigger);
  CHECK(r.acc >= 0.85);
  CHECK(r.asr >= 0.95);
}
