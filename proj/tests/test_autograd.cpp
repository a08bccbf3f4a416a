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

#include "doctest.h"
#include "gradprune/autograd.hpp"
#include "gradprune/errors.hpp"
#include "gradprune/model.hpp"
#include "test_support.hpp"

using namespace gradprune;

TEST_CASE("sum of a parameter has an all-ones gradient") {
  Graph g;
  Var p = g.parameter("p", testing::random_tensor({2, 3}, 1));
  const GradientSet grads = g.backward(g.sum(p));
  for (double v : grads.at("p").data()) CHECK(v == 1.0);
}

TEST_CASE("a parameter unreachable from the loss gets a zero gradient") {
  Graph g;
  Var used = g.parameter("used", Tensor({3}, 2.0));
  g.parameter("unused", Tensor({4}, 5.0));
  const GradientSet grads = g.backward(g.sum(used));
  REQUIRE(grads.count("unused") == 1);
  for (double v : grads.at("unused").data()) CHECK(v == 0.0);
}

TEST_CASE("backward before any forward pass is a state error") {
  Graph g;
  CHECK_THROWS_AS(g.backward(Var{0}), StateError);
}

TEST_CASE("backward twice on the same graph is a state error") {
  Graph g;
  Var loss = g.sum(g.parameter("p", Tensor({2}, 1.0)));
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), StateError);
}

TEST_CASE("backward from a non-scalar is a dimension error") {
  Graph g;
  Var p = g.parameter("p", Tensor({2, 2}, 1.0));
  CHECK_THROWS_AS(g.backward(p), DimensionError);
}

TEST_CASE("graph forward equals the plain forward pass bit-for-bit") {
  const Model m = build_model("cnn-small", 4, {1, 8, 8}, 5);
  const Tensor x = testing::random_tensor({3, 1, 8, 8}, 6, 0.0, 1.0);
  Graph g;
  CHECK(g.value(m.forward(g, g.constant(x))) == m.forward(x));
}

TEST_CASE("whole-network gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto inst = testing::kink_free_instance(seed, {1, 8, 8}, 3, 2);
    const auto r = testing::finite_difference_check(inst.model, inst.batch, inst.labels);
    CHECK(r.entries_checked > 1000);
    CHECK(r.max_relative_error < 1e-4);
  }
}
