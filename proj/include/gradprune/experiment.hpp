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

#ifndef GRADPRUNE_EXPERIMENT_HPP_
#define GRADPRUNE_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gradprune/config.hpp"
#include "gradprune/data.hpp"
#include "gradprune/finetune.hpp"
#include "gradprune/metrics.hpp"
#include "gradprune/model.hpp"
#include "gradprune/unlearn.hpp"

namespace gradprune {

inline constexpr const char* kToolVersion = "gradprune 0.1.0";

// Attacker training data, held-out test data and the defender's pool.
// The three never share samples.
struct ExperimentData {
  LabeledDataset train;
  LabeledDataset test;
  LabeledDataset pool;
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

struct AttackOutcome {
  Model model;
  MetricsReport baseline;
  std::string cache_key;
  bool from_cache = false;
};

// Trains the backdoored model, or loads it from the cache when a checkpoint
// for the same attack identity exists.
AttackOutcome run_attack(const ExperimentConfig& cfg, const ExperimentData& data,
                         bool use_cache = true);

// Result of one defense run on one defender split.
struct DefenseOutcome {
  // Model after the pruning stage (ours, fp); absent otherwise.
  std::optional<Model> pruned;
  // Final model; equals the input for defense "none".
  Model defended;
  std::optional<PruneTrace> trace;
  std::optional<FineTuneResult> finetune;
};

DefenseOutcome run_defense(const Model& attacked, const DefenderDataset& defender,
                           const ExperimentConfig& cfg, DefenseKind defense,
                           std::uint64_t trial_seed);

// Throws StateError unless every masked filter is bitwise zero.
void check_mask_frozen(const Model& model);

struct RunSummary {
  std::filesystem::path directory;
  std::vector<MetricsReport> reports;
  std::size_t trials_ok = 0;
  std::size_t trials_failed = 0;
};

// Full protocol: attack once, then for every spc x trial draw a defender
// split with seed base_seed + trial, run the configured defense and write
// metrics for each stage. Per-trial failures are logged to failures.jsonl
// and the run continues.
//
// Outputs in cfg.out: manifest.json, config.txt, metrics.jsonl, metrics.csv,
// summary.csv, traces/, checkpoints/.
RunSummary run_experiment(const ExperimentConfig& cfg);

// Per (stage, spc, attack, defense) cell: count, mean and sample standard
// deviation of ACC, ASR and RA. Stages ordered baseline, post-prune,
// post-finetune; other keys in first-seen order.
std::string summarize_csv(const std::vector<MetricsReport>& reports);

// Parses metrics.csv content written by run_experiment.
std::vector<MetricsReport> parse_metrics_csv(const std::string& text);

}  // namespace gradprune

#endif  // GRADPRUNE_EXPERIMENT_HPP_
