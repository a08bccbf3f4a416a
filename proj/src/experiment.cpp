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

#include "gradprune/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "json.hpp"

#include "gradprune/baselines.hpp"
#include "gradprune/checkpoint.hpp"
#include "gradprune/errors.hpp"
#include "gradprune/io.hpp"
#include "gradprune/trainer.hpp"

namespace gradprune {

namespace fs = std::filesystem;

namespace {

void split_idx_pool(const LabeledDataset& full, std::size_t pool_per_class,
                    LabeledDataset& train, LabeledDataset& pool) {
  std::vector<std::size_t> taken(full.num_classes, 0);
  std::vector<std::size_t> train_idx, pool_idx;
  for (std::size_t i = 0; i < full.size(); ++i) {
    const std::size_t c = full.labels[i];
    if (taken[c] < pool_per_class) {
      ++taken[c];
      pool_idx.push_back(i);
    } else {
      train_idx.push_back(i);
    }
  }
  if (train_idx.empty()) throw DataError("IDX training file leaves no attacker data");
  train = full.subset(train_idx);
  pool = full.subset(pool_idx);
}

std::string trial_tag(std::size_t spc, std::size_t trial) {
  return "spc" + std::to_string(spc) + "_trial" + std::to_string(trial);
}

int stage_rank(const std::string& stage) {
  if (stage == "baseline") return 0;
  if (stage == "post-prune") return 1;
  if (stage == "post-finetune") return 2;
  return 3;
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentData data;
  if (cfg.dataset == "synthetic") {
    const auto& s = cfg.synthetic;
    data.train = generate_synthetic(s.classes, s.train_per_class, s.shape, s.data_seed);
    data.test = generate_synthetic(s.classes, s.test_per_class, s.shape, s.data_seed + 1);
    data.pool = generate_synthetic(s.classes, s.pool_per_class, s.shape, s.data_seed + 2);
    return data;
  }
  for (const auto& p : {cfg.idx.train_images, cfg.idx.train_labels, cfg.idx.test_images,
                        cfg.idx.test_labels}) {
    if (p.empty() || !fs::exists(p)) {
      throw ConfigError("IDX path '" + p.string() + "' does not exist");
    }
  }
  const LabeledDataset full = load_idx(cfg.idx.train_images, cfg.idx.train_labels);
  data.test = load_idx(cfg.idx.test_images, cfg.idx.test_labels, full.num_classes);
  split_idx_pool(full, cfg.idx.pool_per_class, data.train, data.pool);
  return data;
}

AttackOutcome run_attack(const ExperimentConfig& cfg, const ExperimentData& data,
                         bool use_cache) {
  const TriggerSpec trigger = cfg.trigger.build(data.train.image_shape());
  SgdConfig sgd = cfg.attack;
  sgd.seed = cfg.base_seed;
  const std::string key = hex64(fnv1a64(cfg.attack_identity()));
  const fs::path cached = cfg.resolved_cache_dir() / ("attack-" + key + ".ckpt");

  std::optional<Model> model;
  bool from_cache = false;
  if (use_cache && fs::exists(cached)) {
    model = load_checkpoint(cached);
    from_cache = true;
  } else {
    model = train_backdoored(cfg.arch, data.train, trigger, cfg.poison_ratio, sgd).model;
    if (use_cache) save_checkpoint(*model, cached);
  }
  MetricsReport baseline = evaluate(*model, data.test, trigger);
  baseline.stage = "baseline";
  baseline.attack = cfg.trigger.attack_name();
  baseline.defense = to_string(cfg.defense);
  baseline.seed = cfg.base_seed;
  return {std::move(*model), baseline, key, from_cache};
}

void check_mask_frozen(const Model& model) {
  for (const auto& id : model.mask()) {
    const Conv2dLayer& conv = model.conv(id.layer);
    const std::size_t per_filter = conv.weight.size() / conv.weight.dim(0);
    bool zero = conv.bias[id.filter] == 0.0;
    for (double w : conv.weight.data().subspan(id.filter * per_filter, per_filter)) {
      zero = zero && w == 0.0;
    }
    if (!zero) throw StateError("masked filter " + to_string(id) + " is not zero");
  }
}

DefenseOutcome run_defense(const Model& attacked, const DefenderDataset& defender,
                           const ExperimentConfig& cfg, DefenseKind defense,
                           std::uint64_t trial_seed) {
  FineTuneConfig ft = cfg.finetune;
  ft.sgd.seed = trial_seed;
  switch (defense) {
    case DefenseKind::none:
      return {std::nullopt, attacked, std::nullopt, std::nullopt};
    case DefenseKind::ours: {
      PruneResult pruned = prune_loop(attacked, defender, cfg.prune);
      FineTuneResult tuned = fine_tune(pruned.model, defender, ft);
      Model defended = tuned.model;
      return {std::move(pruned.model), std::move(defended), std::move(pruned.trace),
              std::move(tuned)};
    }
    case DefenseKind::ft: {
      FineTuneResult tuned = ft_defense(attacked, defender, ft);
      Model defended = tuned.model;
      return {std::nullopt, std::move(defended), std::nullopt, std::move(tuned)};
    }
    case DefenseKind::fp: {
      FinePruningResult result =
          fine_pruning_defense(attacked, defender, cfg.fp_prune_fraction, ft);
      Model pruned = attacked;
      for (const auto& id : result.pruned) pruned.prune_filter(id);
      Model defended = result.tuned.model;
      return {std::move(pruned), std::move(defended), std::nullopt,
              std::move(result.tuned)};
    }
  }
  throw ConfigError("unhandled defense");
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ExperimentData data = load_experiment_data(cfg);
  const TriggerSpec trigger = cfg.trigger.build(data.train.image_shape());
  AttackOutcome attack = run_attack(cfg, data);

  RunSummary summary;
  summary.directory = cfg.out;
  save_checkpoint(attack.model, cfg.out / "checkpoints" / "attack.ckpt");

  std::string failures;
  const std::string attack_name = cfg.trigger.attack_name();
  const std::string defense_name = to_string(cfg.defense);
  for (std::size_t spc : cfg.spc) {
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t trial_seed = cfg.base_seed + trial;
      const std::string tag = trial_tag(spc, trial);
      auto tagged = [&](MetricsReport r, const char* stage) {
        r.stage = stage;
        r.trial = trial;
        r.spc = spc;
        r.seed = trial_seed;
        r.attack = attack_name;
        r.defense = defense_name;
        return r;
      };
      try {
        const DefenderDataset defender =
            make_defender_split(data.pool, spc, trigger, trial_seed);
        DefenseOutcome outcome =
            run_defense(attack.model, defender, cfg, cfg.defense, trial_seed);
        std::vector<MetricsReport> rows;
        rows.push_back(tagged(attack.baseline, "baseline"));
        if (outcome.pruned) {
          check_mask_frozen(*outcome.pruned);
          rows.push_back(tagged(evaluate(*outcome.pruned, data.test, trigger), "post-prune"));
        }
        if (cfg.defense != DefenseKind::none) {
          check_mask_frozen(outcome.defended);
          rows.push_back(
              tagged(evaluate(outcome.defended, data.test, trigger), "post-finetune"));
        }
        if (cfg.defense == DefenseKind::ours) {
          write_file_atomic(cfg.out / "traces" / (tag + ".prune.jsonl"),
                            outcome.trace->to_jsonl());
        }
        if (outcome.finetune) {
          write_file_atomic(cfg.out / "traces" / (tag + ".finetune.jsonl"),
                            outcome.finetune->to_jsonl());
        }
        if (cfg.defense != DefenseKind::none) {
          save_checkpoint(outcome.defended, cfg.out / "checkpoints" / (tag + ".ckpt"));
        }
        summary.reports.insert(summary.reports.end(), rows.begin(), rows.end());
        ++summary.trials_ok;
      } catch (const Error& e) {
        ++summary.trials_failed;
        nlohmann::ordered_json j;
        j["spc"] = spc;
        j["trial"] = trial;
        j["error"] = e.what();
        failures += j.dump() + "\n";
      }
    }
  }

  std::string jsonl;
  std::string csv = std::string(MetricsReport::csv_header()) + "\n";
  for (const auto& r : summary.reports) {
    jsonl += r.to_json_line() + "\n";
    csv += r.to_csv_row() + "\n";
  }
  write_file_atomic(cfg.out / "metrics.jsonl", jsonl);
  write_file_atomic(cfg.out / "metrics.csv", csv);
  write_file_atomic(cfg.out / "summary.csv", summarize_csv(summary.reports));
  write_file_atomic(cfg.out / "failures.jsonl", failures);
  write_file_atomic(cfg.out / "config.txt", cfg.to_text());

  nlohmann::ordered_json manifest;
  manifest["version"] = kToolVersion;
  manifest["checkpoint_format_version"] = kCheckpointVersion;
  manifest["base_seed"] = cfg.base_seed;
  std::vector<std::uint64_t> seeds;
  for (std::size_t t = 0; t < cfg.trials; ++t) seeds.push_back(cfg.base_seed + t);
  manifest["trial_seeds"] = seeds;
  manifest["attack_cache_key"] = attack.cache_key;
  manifest["trigger"] = trigger.describe();
  manifest["trials_ok"] = summary.trials_ok;
  manifest["trials_failed"] = summary.trials_failed;
  manifest["config"] = cfg.to_text();
  write_file_atomic(cfg.out / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

std::string summarize_csv(const std::vector<MetricsReport>& reports) {
  struct Cell {
    std::string stage;
    std::size_t spc;
    std::string attack, defense;
    std::vector<const MetricsReport*> rows;
  };
  std::vector<Cell> cells;
  for (const auto& r : reports) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const Cell& c) {
      return c.stage == r.stage && c.spc == r.spc && c.attack == r.attack &&
             c.defense == r.defense;
    });
    if (it == cells.end()) {
      cells.push_back({r.stage, r.spc, r.attack, r.defense, {}});
      it = std::prev(cells.end());
    }
    it->rows.push_back(&r);
  }
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return stage_rank(a.stage) < stage_rank(b.stage);
  });

  auto stats = [](const std::vector<const MetricsReport*>& rows,
                  double MetricsReport::*field) {
    double mean = 0.0;
    for (const auto* r : rows) mean += r->*field;
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (const auto* r : rows) var += (r->*field - mean) * (r->*field - mean);
    const double sd =
        rows.size() > 1 ? std::sqrt(var / static_cast<double>(rows.size() - 1)) : 0.0;
    return format_rate(mean) + "," + format_rate(sd);
  };

  std::string out =
      "stage,spc,attack,defense,n,acc_mean,acc_std,asr_mean,asr_std,ra_mean,ra_std\n";
  for (const auto& c : cells) {
    out += c.stage + "," + std::to_string(c.spc) + "," + c.attack + "," + c.defense +
           "," + std::to_string(c.rows.size()) + "," +
           stats(c.rows, &MetricsReport::acc) + "," +
           stats(c.rows, &MetricsReport::asr) + "," +
           stats(c.rows, &MetricsReport::ra) + "\n";
  }
  return out;
}

std::vector<MetricsReport> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != MetricsReport::csv_header()) {
    throw FormatError("metrics CSV lacks the expected header");
  }
  std::vector<MetricsReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream row(line);
    std::string col;
    while (std::getline(row, col, ',')) cols.push_back(col);
    if (cols.size() != 8) {
      throw FormatError("metrics CSV line " + std::to_string(line_no) +
                        ": expected 8 columns");
    }
    try {
      MetricsReport r;
      r.stage = cols[0];
      r.trial = std::stoul(cols[1]);
      r.spc = std::stoul(cols[2]);
      r.attack = cols[3];
      r.defense = cols[4];
      r.acc = std::stod(cols[5]);
      r.asr = std::stod(cols[6]);
      r.ra = std::stod(cols[7]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw FormatError("metrics CSV line " + std::to_string(line_no) +
                        ": unparsable number");
    }
  }
  return out;
}

}  // namespace gradprune
