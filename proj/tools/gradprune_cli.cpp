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

// Command-line front end: attack, defend, eval, report and run.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradprune/checkpoint.hpp"
#include "gradprune/config.hpp"
#include "gradprune/errors.hpp"
#include "gradprune/experiment.hpp"
#include "gradprune/io.hpp"
#include "gradprune/metrics.hpp"

namespace {

using namespace gradprune;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "key = value config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "override one config key (key=value)")
      ->take_all();
  cmd->add_option("--seed", opts.seed, "base seed");
  cmd->add_option("-o,--out", opts.out, "output directory");
}

ExperimentConfig load_config(const CommonOptions& opts) {
  ExperimentConfig cfg =
      opts.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) cfg.base_seed = *opts.seed;
  if (opts.out) cfg.out = *opts.out;
  cfg.validate();
  return cfg;
}

MetricsReport labeled(MetricsReport r, const ExperimentConfig& cfg, const std::string& stage) {
  r.stage = stage;
  r.attack = cfg.trigger.attack_name();
  r.defense = to_string(cfg.defense);
  return r;
}

int cmd_attack(const CommonOptions& opts, const std::string& checkpoint) {
  const ExperimentConfig cfg = load_config(opts);
  const ExperimentData data = load_experiment_data(cfg);
  const AttackOutcome attack = run_attack(cfg, data);
  const std::filesystem::path path =
      checkpoint.empty() ? cfg.out / "checkpoints" / "attack.ckpt" : std::filesystem::path(checkpoint);
  save_checkpoint(attack.model, path);
  std::cerr << (attack.from_cache ? "loaded cached attack " : "trained attack ")
            << attack.cache_key << " -> " << path.string() << "\n";
  std::cout << labeled(attack.baseline, cfg, "baseline").to_json_line() << "\n";
  return 0;
}

int cmd_defend(const CommonOptions& opts, const std::string& checkpoint,
               const std::optional<std::string>& defense, std::size_t spc, std::size_t trial) {
  ExperimentConfig cfg = load_config(opts);
  if (defense) cfg.defense = parse_defense(*defense);
  const ExperimentData data = load_experiment_data(cfg);
  const TriggerSpec trigger = cfg.trigger.build(data.train.image_shape());
  const Model attacked = load_checkpoint(checkpoint);
  const std::uint64_t trial_seed = cfg.base_seed + trial;
  const DefenderDataset defender = make_defender_split(data.pool, spc, trigger, trial_seed);
  const DefenseOutcome outcome = run_defense(attacked, defender, cfg, cfg.defense, trial_seed);
  check_mask_frozen(outcome.defended);

  const std::string tag = "spc" + std::to_string(spc) + "_trial" + std::to_string(trial);
  if (outcome.trace) {
    write_file_atomic(cfg.out / "traces" / (tag + ".prune.jsonl"), outcome.trace->to_jsonl());
    std::cerr << "pruning stopped: " << to_string(outcome.trace->stop_reason) << ", kept "
              << outcome.trace->kept_prunes().size() << " prunes\n";
  }
  if (outcome.finetune) {
    write_file_atomic(cfg.out / "traces" / (tag + ".finetune.jsonl"),
                      outcome.finetune->to_jsonl());
  }
  save_checkpoint(outcome.defended, cfg.out / "checkpoints" / (tag + ".ckpt"));

  auto emit = [&](const Model& m, const char* stage) {
    MetricsReport r = labeled(evaluate(m, data.test, trigger), cfg, stage);
    r.spc = spc;
    r.trial = trial;
    r.seed = trial_seed;
    std::cout << r.to_json_line() << "\n";
  };
  if (outcome.pruned) emit(*outcome.pruned, "post-prune");
  emit(outcome.defended, "post-finetune");
  return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& checkpoint) {
  const ExperimentConfig cfg = load_config(opts);
  const ExperimentData data = load_experiment_data(cfg);
  const TriggerSpec trigger = cfg.trigger.build(data.train.image_shape());
  const Model model = load_checkpoint(checkpoint);
  std::cout << labeled(evaluate(model, data.test, trigger), cfg, "eval").to_json_line() << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  const auto reports = parse_metrics_csv(read_file(std::filesystem::path(run_dir) / "metrics.csv"));
  std::cout << summarize_csv(reports);
  return 0;
}

int cmd_run(const CommonOptions& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const RunSummary summary = run_experiment(cfg);
  std::cerr << "trials ok " << summary.trials_ok << ", failed " << summary.trials_failed
            << "; results in " << summary.directory.string() << "\n";
  std::cout << summarize_csv(summary.reports);
  return summary.trials_failed == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backdoor removal by gradient-guided filter pruning"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  CommonOptions attack_opts, defend_opts, eval_opts, run_opts;
  std::string attack_ckpt, defend_ckpt, eval_ckpt, report_dir;
  std::optional<std::string> defense;
  std::size_t spc = 10, trial = 0;

  CLI::App* attack = app.add_subcommand("attack", "train (or load cached) backdoored model");
  add_common(attack, attack_opts);
  attack->add_option("--checkpoint", attack_ckpt, "where to write the attacked model");

  CLI::App* defend = app.add_subcommand("defend", "run one defense trial on a checkpoint");
  add_common(defend, defend_opts);
  defend->add_option("--checkpoint", defend_ckpt, "attacked model")
      ->required()
      ->check(CLI::ExistingFile);
  defend->add_option("--defense", defense, "ours | ft | fp | none");
  defend->add_option("--spc", spc, "samples per class")->check(CLI::PositiveNumber);
  defend->add_option("--trial", trial, "trial index (seed = base seed + trial)");

  CLI::App* eval = app.add_subcommand("eval", "ACC, ASR and RA of a checkpoint");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_ckpt, "model to evaluate")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* report = app.add_subcommand("report", "summarize metrics.csv of a run");
  report->add_option("run_dir", report_dir, "run output directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI::App* run = app.add_subcommand("run", "full protocol: attack, then every spc x trial");
  add_common(run, run_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*attack) return cmd_attack(attack_opts, attack_ckpt);
    if (*defend) return cmd_defend(defend_opts, defend_ckpt, defense, spc, trial);
    if (*eval) return cmd_eval(eval_opts, eval_ckpt);
    if (*report) return cmd_report(report_dir);
    if (*run) return cmd_run(run_opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
