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

#ifndef GRADPRUNE_CONFIG_HPP_
#define GRADPRUNE_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gradprune/data.hpp"
#include "gradprune/finetune.hpp"
#include "gradprune/trainer.hpp"
#include "gradprune/unlearn.hpp"

namespace gradprune {

// Flat `key = value` text. '#' starts a comment; blank lines are ignored.
// Duplicate keys are an error.
std::map<std::string, std::string> parse_key_values(const std::string& text);

enum class DefenseKind { ours, ft, fp, none };
std::string to_string(DefenseKind kind);
DefenseKind parse_defense(const std::string& text);

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 200;
  std::size_t pool_per_class = 200;
  ImageShape shape{1, 16, 16};
  std::uint64_t data_seed = 1;
};

struct IdxSpec {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  // Samples per class held out of the training file as the defender pool.
  std::size_t pool_per_class = 200;
};

struct TriggerConfig {
  std::string kind = "patch";  // patch | blended
  std::size_t patch_size = 3;
  double patch_fill = 1.0;
  double blend_ratio = 0.1;
  std::uint64_t blend_seed = 7;
  std::size_t target = 0;

  TriggerSpec build(const ImageShape& shape) const;
  // Attack label used in reports: "badnets" or "blended".
  std::string attack_name() const;
};

struct ExperimentConfig {
  std::string dataset = "synthetic";  // synthetic | idx
  SyntheticSpec synthetic;
  IdxSpec idx;
  std::string arch = "cnn-small";
  TriggerConfig trigger;
  double poison_ratio = 0.10;
  SgdConfig attack{0.05, 0.9, 32, 30, 0};
  DefenseKind defense = DefenseKind::ours;
  PruneConfig prune;
  FineTuneConfig finetune;
  double fp_prune_fraction = 0.3;
  std::vector<std::size_t> spc{2, 10, 100};
  std::size_t trials = 5;
  std::uint64_t base_seed = 0;
  std::filesystem::path out = "runs/default";
  // Empty means <out>/cache.
  std::filesystem::path cache_dir;

  // Unknown keys and unparsable values throw ConfigError.
  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);

  void validate() const;
  // Every key with its current value, in a fixed order.
  std::string to_text() const;
  // Canonical description of what determines the attacked model.
  std::string attack_identity() const;
  std::filesystem::path resolved_cache_dir() const;
};

}  // namespace gradprune

#endif  // GRADPRUNE_CONFIG_HPP_
