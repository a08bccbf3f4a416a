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

#ifndef GRADPRUNE_DATA_HPP_
#define GRADPRUNE_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gradprune/model.hpp"
#include "gradprune/tensor.hpp"

namespace gradprune {

// Images N x C x H x W with values in [0,1] and one class index per image.
struct LabeledDataset {
  Tensor images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  ImageShape image_shape() const;
  // Single image as C x H x W.
  Tensor image(std::size_t index) const;

  LabeledDataset subset(std::span<const std::size_t> indices) const;
  // Samples [begin, end) as an NCHW batch.
  Tensor batch(std::size_t begin, std::size_t end) const;

  // Throws InputError if labels or pixel values are out of range.
  void validate() const;
};

// Concatenates datasets with identical image shape and class count.
LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

enum class TriggerKind { patch, blended };

struct PatchTrigger {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 3;
  std::size_t width = 3;
  double fill = 1.0;
};

struct BlendTrigger {
  Tensor image;  // C x H x W
  double ratio = 0.1;
};

struct TriggerSpec {
  TriggerKind kind = TriggerKind::patch;
  PatchTrigger patch;
  BlendTrigger blend;
  std::size_t target = 0;

  // 3x3 patch of 1.0 in the bottom-right corner.
  static TriggerSpec bottom_right_patch(const ImageShape& shape,
                                        std::size_t target = 0,
                                        std::size_t size = 3,
                                        double fill = 1.0);
  // Uniform-noise trigger image drawn from `pattern_seed`.
  static TriggerSpec noise_blend(const ImageShape& shape, double ratio,
                                 std::uint64_t pattern_seed,
                                 std::size_t target = 0);

  // Throws InputError if the trigger cannot apply to images of `shape`.
  void validate(const ImageShape& shape) const;
  // Canonical text used in cache keys and reports.
  std::string describe() const;
};

// Returns a triggered copy of a C x H x W image; the input is untouched.
Tensor apply_trigger(const Tensor& image, const TriggerSpec& trigger);
// Triggers every image, keeping the labels.
LabeledDataset apply_trigger(const LabeledDataset& data,
                             const TriggerSpec& trigger);

// Class-conditional images: each class has a fixed blocky base pattern
// (independent of `seed`, so splits drawn with different seeds share a
// distribution) plus Gaussian pixel noise drawn from `seed`, clamped to
// [0,1]. Samples are ordered class by class.
LabeledDataset generate_synthetic(std::size_t num_classes, std::size_t per_class,
                                  const ImageShape& shape, std::uint64_t seed);

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled by 1/255. `num_classes` 0 means max label + 1.
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path,
                        std::size_t num_classes = 0);

struct PoisonedDataset {
  LabeledDataset data;
  // For each output row: index of the clean sample it came from.
  std::vector<std::size_t> source;
  // For each output row: whether the trigger was applied and relabeled.
  std::vector<bool> triggered;
};

// Applies the trigger to a seeded ceil(ratio * N)-subset, relabels those
// samples to the target class, and shuffles the result with the same seed.
PoisonedDataset poison_training_set(const LabeledDataset& clean,
                                    const TriggerSpec& trigger,
                                    double poison_ratio, std::uint64_t seed);

// Data available to the defender. backdoor_* hold triggered copies of the
// matching clean_* rows with their original labels.
struct DefenderDataset {
  LabeledDataset clean_train;
  LabeledDataset clean_val;
  LabeledDataset backdoor_train;
  LabeledDataset backdoor_val;
  // Pool indices of the train and val rows.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

// Validation rows per class for a given samples-per-class budget:
// ceil(spc / 10), at least 1.
std::size_t validation_per_class(std::size_t spc);

// Draws `spc` samples per class from `pool`. Throws DataError if some class
// has fewer than `spc` samples.
DefenderDataset make_defender_split(const LabeledDataset& pool, std::size_t spc,
                                    const TriggerSpec& trigger,
                                    std::uint64_t seed);

}  // namespace gradprune

#endif  // GRADPRUNE_DATA_HPP_
