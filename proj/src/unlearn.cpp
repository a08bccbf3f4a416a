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

#include "gradprune/unlearn.hpp"

#include <cmath>

#include "json.hpp"

#include "gradprune/errors.hpp"
#include "gradprune/metrics.hpp"
#include "gradprune/trainer.hpp"

namespace gradprune {

namespace {

// Slack for comparing rates that are ratios of small integers.
constexpr double kRateSlack = 1e-12;

}  // namespace

double unlearning_loss(const Model& model, const LabeledDataset& backdoor_set) {
  if (backdoor_set.empty()) throw InputError("unlearning loss needs a non-empty backdoor set");
  return mean_loss(model, backdoor_set);
}

FilterScores filter_scores_from_gradients(const Model& model,
                                          const GradientSet& grads,
                                          bool include_bias) {
  FilterScores scores;
  for (std::size_t l = 0; l < model.conv_layer_count(); ++l) {
    const std::size_t pos = model.conv_layer_position(l);
    const auto w_it = grads.find(weight_name(pos));
    const auto b_it = grads.find(bias_name(pos));
    if (w_it == grads.end() || b_it == grads.end()) {
      throw StateError("gradient set lacks conv layer " + std::to_string(l));
    }
    const Tensor& gw = w_it->second;
    const Tensor& gb = b_it->second;
    const std::size_t per_filter = gw.size() / gw.dim(0);
    for (std::size_t f = 0; f < gw.dim(0); ++f) {
      const FilterId id{l, f};
      if (model.mask().contains(id)) continue;
      double l1 = 0.0;
      for (double g : gw.data().subspan(f * per_filter, per_filter)) l1 += std::abs(g);
      std::size_t entries = per_filter;
      if (include_bias) {
        l1 += std::abs(gb[f]);
        ++entries;
      }
      scores[id] = l1 / static_cast<double>(entries);
    }
  }
  return scores;
}

FilterScores filter_scores(const Model& model, const LabeledDataset& backdoor_set,
                           bool include_bias) {
  if (model.mask().size() >= model.total_filter_count()) {
    throw StateError("every conv filter is already pruned");
  }
  if (backdoor_set.empty()) throw InputError("filter scoring needs a non-empty backdoor set");
  return filter_scores_from_gradients(model, loss_gradients(model, backdoor_set),
                                      include_bias);
}

FilterId select_filter(const FilterScores& scores) {
  if (scores.empty()) throw InputError("no filter scores to select from");
  // Map iteration is ascending in (layer, filter); strict > keeps the first.
  auto best = scores.begin();
  for (auto it = scores.begin(); it != scores.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

std::pair<FilterId, Model> prune_round(const Model& model, const FilterScores& scores) {
  const FilterId id = select_filter(scores);
  return {id, prune_filter(model, id)};
}

std::string to_string(AlphaMode mode) {
  return mode == AlphaMode::absolute ? "absolute" : "drop";
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::accuracy_floor:
      return "accuracy_floor";
    case StopReason::loss_plateau:
      return "loss_plateau";
    case StopReason::filters_exhausted:
      return "filters_exhausted";
  }
  return "unknown";
}

AlphaMode parse_alpha_mode(const std::string& text) {
  if (text == "absolute") return AlphaMode::absolute;
  if (text == "drop") return AlphaMode::drop;
  throw ConfigError("alpha mode must be 'absolute' or 'drop', got '" + text + "'");
}

void PruneConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  if (patience < 1) throw ConfigError("pruning patience must be >= 1");
  if (!(improvement_tol >= 0.0)) throw ConfigError("improvement_tol must be >= 0");
}

std::vector<FilterId> PruneTrace::kept_prunes() const {
  std::vector<FilterId> out;
  for (const auto& r : rounds) {
    if (r.reverted || r.round > returned_round) continue;
    out.push_back(r.filter);
  }
  return out;
}

std::string PruneTrace::to_jsonl() const {
  std::string out;
  for (const auto& r : rounds) {
    nlohmann::ordered_json j;
    j["round"] = r.round;
    j["layer"] = r.filter.layer;
    j["filter"] = r.filter.filter;
    j["xi"] = r.score;
    j["val_loss"] = r.val_loss;
    j["val_acc"] = r.val_acc;
    j["reverted"] = r.reverted;
    out += j.dump();
    out += '\n';
  }
  return out;
}

PruneResult prune_loop(const Model& model, const DefenderDataset& defender,
                       const PruneConfig& cfg) {
  cfg.validate();
  if (defender.backdoor_train.empty() || defender.backdoor_val.empty() ||
      defender.clean_val.empty()) {
    throw InputError("prune_loop needs backdoor_train, backdoor_val and clean_val");
  }

  PruneTrace trace;
  trace.initial_val_acc = eval_acc(model, defender.clean_val);
  trace.initial_val_loss = unlearning_loss(model, defender.backdoor_val);
  trace.acc_floor = cfg.alpha_mode == AlphaMode::absolute
                        ? cfg.alpha
                        : trace.initial_val_acc - cfg.alpha;

  Model current = model;
  Model best = model;
  double best_loss = trace.initial_val_loss;
  std::size_t best_round = 0;
  std::size_t stale = 0;
  std::size_t round = 0;

  while (current.mask().size() < current.total_filter_count()) {
    const FilterScores scores =
        filter_scores(current, defender.backdoor_train, cfg.include_bias);
    auto [id, candidate] = prune_round(current, scores);
    ++round;
    PruneRound record{round, id, scores.at(id),
                      unlearning_loss(candidate, defender.backdoor_val),
                      eval_acc(candidate, defender.clean_val), false};

    if (record.val_acc < trace.acc_floor - kRateSlack) {
      record.reverted = true;
      trace.rounds.push_back(record);
      trace.stop_reason = StopReason::accuracy_floor;
      trace.returned_round = round - 1;
      return {std::move(current), std::move(trace)};
    }
    trace.rounds.push_back(record);
    current = std::move(candidate);

    if (record.val_loss < best_loss - cfg.improvement_tol) {
      best_loss = record.val_loss;
      best = current;
      best_round = round;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      trace.stop_reason = StopReason::loss_plateau;
      trace.returned_round = best_round;
      return {std::move(best), std::move(trace)};
    }
  }
  trace.stop_reason = StopReason::filters_exhausted;
  trace.returned_round = best_round;
  return {std::move(best), std::move(trace)};
}

}  // namespace gradprune
