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

#include "gradprune/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradprune/errors.hpp"

namespace gradprune {

FineTuneResult ft_defense(const Model& model, const DefenderDataset& defender,
                          const FineTuneConfig& cfg) {
  return train_with_early_stopping(model, defender.clean_train, defender.clean_val,
                                   cfg);
}

std::vector<double> last_conv_activations(const Model& model,
                                          const LabeledDataset& data) {
  if (model.conv_layer_count() == 0) throw StateError("model has no conv layer");
  if (data.empty()) throw InputError("activation ranking needs clean samples");
  const std::size_t last = model.conv_layer_count() - 1;
  const std::size_t position = model.conv_layer_position(last);
  const std::size_t filters = model.filter_count(last);

  std::vector<double> sums(filters, 0.0);
  std::size_t per_filter_total = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < data.size(); begin += kChunk) {
    const std::size_t end = std::min(data.size(), begin + kChunk);
    const auto trace = model.forward_trace(data.batch(begin, end));
    const Tensor& act = trace[position];
    const std::size_t plane = act.dim(2) * act.dim(3);
    for (std::size_t n = 0; n < act.dim(0); ++n) {
      for (std::size_t f = 0; f < filters; ++f) {
        const auto values = act.data().subspan((n * filters + f) * plane, plane);
        for (double v : values) sums[f] += std::abs(v);
      }
    }
    per_filter_total += act.dim(0) * plane;
  }
  for (double& s : sums) s /= static_cast<double>(per_filter_total);
  return sums;
}

FinePruningResult fine_pruning_defense(const Model& model,
                                       const DefenderDataset& defender,
                                       double prune_fraction,
                                       const FineTuneConfig& cfg) {
  if (!(prune_fraction >= 0.0 && prune_fraction < 1.0)) {
    throw InputError("prune_fraction must lie in [0,1)");
  }
  const std::vector<double> activation =
      last_conv_activations(model, defender.clean_train);
  std::vector<std::size_t> order(activation.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return activation[a] < activation[b];
  });

  const auto count = static_cast<std::size_t>(
      std::floor(prune_fraction * static_cast<double>(order.size())));
  const std::size_t last = model.conv_layer_count() - 1;
  Model pruned = model;
  std::vector<FilterId> ids;
  for (std::size_t i = 0; i < count; ++i) {
    const FilterId id{last, order[i]};
    if (pruned.mask().contains(id)) continue;
    pruned.prune_filter(id);
    ids.push_back(id);
  }
  return {std::move(ids), ft_defense(pruned, defender, cfg)};
}

}  // namespace gradprune
