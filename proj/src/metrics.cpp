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

#include "gradprune/metrics.hpp"

#include <cstdio>

#include "json.hpp"

#include "gradprune/errors.hpp"
#include "gradprune/ops.hpp"
#include "gradprune/trainer.hpp"

namespace gradprune {

namespace {

struct TriggerCounts {
  std::size_t evaluated = 0;
  std::size_t to_target = 0;
  std::size_t to_true = 0;
};

TriggerCounts count_triggered(const Model& model, const LabeledDataset& clean_test,
                              const TriggerSpec& trigger) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < clean_test.size(); ++i) {
    if (clean_test.labels[i] != trigger.target) keep.push_back(i);
  }
  if (keep.empty()) {
    throw InputError("every test sample belongs to the target class; "
                     "ASR/RA population is empty");
  }
  const LabeledDataset triggered = apply_trigger(clean_test.subset(keep), trigger);
  const auto predicted = predict(model, triggered.images);
  TriggerCounts counts;
  counts.evaluated = keep.size();
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == trigger.target) ++counts.to_target;
    if (predicted[i] == triggered.labels[i]) ++counts.to_true;
  }
  return counts;
}

double rate(std::size_t hits, std::size_t total) {
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

std::vector<std::size_t> predict(const Model& model, const Tensor& images) {
  return ops::argmax_rows(predict_logits(model, images));
}

double eval_acc(const Model& model, const LabeledDataset& clean_test) {
  if (clean_test.empty()) throw InputError("clean test set is empty");
  const auto predicted = predict(model, clean_test.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == clean_test.labels[i]) ++correct;
  }
  return rate(correct, predicted.size());
}

double eval_asr(const Model& model, const LabeledDataset& clean_test,
                const TriggerSpec& trigger) {
  const auto counts = count_triggered(model, clean_test, trigger);
  return rate(counts.to_target, counts.evaluated);
}

double eval_ra(const Model& model, const LabeledDataset& clean_test,
               const TriggerSpec& trigger) {
  const auto counts = count_triggered(model, clean_test, trigger);
  return rate(counts.to_true, counts.evaluated);
}

MetricsReport evaluate(const Model& model, const LabeledDataset& clean_test,
                       const TriggerSpec& trigger) {
  MetricsReport report;
  report.acc = eval_acc(model, clean_test);
  const auto counts = count_triggered(model, clean_test, trigger);
  // Target and true label differ on every evaluated sample, so the two
  // counts are disjoint.
  if (counts.to_target + counts.to_true > counts.evaluated) {
    throw StateError("ASR + RA exceeds 1");
  }
  report.asr = rate(counts.to_target, counts.evaluated);
  report.ra = rate(counts.to_true, counts.evaluated);
  report.n_clean_eval = clean_test.size();
  report.n_trigger_eval = counts.evaluated;
  return report;
}

std::string format_rate(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string MetricsReport::to_json_line() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["trial"] = trial;
  j["spc"] = spc;
  j["seed"] = seed;
  j["attack"] = attack;
  j["defense"] = defense;
  j["acc"] = acc;
  j["asr"] = asr;
  j["ra"] = ra;
  j["n_clean_eval"] = n_clean_eval;
  j["n_trigger_eval"] = n_trigger_eval;
  return j.dump();
}

const char* MetricsReport::csv_header() {
  return "stage,trial,spc,attack,defense,acc,asr,ra";
}

std::string MetricsReport::to_csv_row() const {
  return stage + "," + std::to_string(trial) + "," + std::to_string(spc) + "," +
         attack + "," + defense + "," + format_rate(acc) + "," +
         format_rate(asr) + "," + format_rate(ra);
}

}  // namespace gradprune
