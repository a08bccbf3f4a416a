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

#ifndef GRADPRUNE_METRICS_HPP_
#define GRADPRUNE_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gradprune/data.hpp"
#include "gradprune/model.hpp"

namespace gradprune {

// Argmax predictions for every image, lowest class on ties.
std::vector<std::size_t> predict(const Model& model, const Tensor& images);

// Fraction of clean test samples classified correctly.
double eval_acc(const Model& model, const LabeledDataset& clean_test);

// Triggered test samples whose true label is not the target, classified as
// the target. Throws InputError if every sample belongs to the target class.
double eval_asr(const Model& model, const LabeledDataset& clean_test,
                const TriggerSpec& trigger);

// Same population as eval_asr, classified as their true label.
double eval_ra(const Model& model, const LabeledDataset& clean_test,
               const TriggerSpec& trigger);

struct MetricsReport {
  double acc = 0.0;
  double asr = 0.0;
  double ra = 0.0;
  std::size_t n_clean_eval = 0;
  std::size_t n_trigger_eval = 0;

  std::string stage;
  std::size_t trial = 0;
  std::size_t spc = 0;
  std::uint64_t seed = 0;
  std::string attack;
  std::string defense;

  // One JSON object, no trailing newline.
  std::string to_json_line() const;
  static const char* csv_header();
  std::string to_csv_row() const;
};

// ACC, ASR and RA from one pass over the test set. Checks ASR + RA <= 1
// and throws StateError otherwise.
MetricsReport evaluate(const Model& model, const LabeledDataset& clean_test,
                       const TriggerSpec& trigger);

// Fixed six-decimal rendering used in every CSV the tool writes.
std::string format_rate(double value);

}  // namespace gradprune

#endif  // GRADPRUNE_METRICS_HPP_
