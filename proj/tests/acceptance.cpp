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

// End-to-end acceptance checks. Progress goes to stderr as criteria finish;
// stdout gets one PASS/FAIL line per criterion in order, and the exit code is
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gradprune/baselines.hpp"
#include "gradprune/checkpoint.hpp"
#include "gradprune/config.hpp"
#include "gradprune/errors.hpp"
#include "gradprune/experiment.hpp"
#include "gradprune/io.hpp"
#include "gradprune/metrics.hpp"
#include "gradprune/trainer.hpp"
#include "gradprune/unlearn.hpp"
#include "test_support.hpp"

namespace {

using namespace gradprune;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Line {
  int id;
  bool pass;
  std::string text;
};
std::vector<Line> g_results;

void report(int id, const char* title, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  char timing[32];
  std::snprintf(timing, sizeof(timing), " [%.1fs]", seconds_since(start));
  const std::string text = std::string(o.pass ? "PASS" : "FAIL") + " criterion " +
                           std::to_string(id) + " (" + title + "): " + o.detail + timing;
  std::fprintf(stderr, "%s\n", text.c_str());
  g_results.push_back({id, o.pass, text});
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// Every evaluation in the suite goes through here so the rate relation can
// be tallied across all of them.
struct EvalLedger {
  std::size_t evaluations = 0;
  std::size_t violations = 0;
  std::size_t frozen_checks = 0;
  std::size_t frozen_failures = 0;

  MetricsReport evaluate(const Model& m, const LabeledDataset& test, const TriggerSpec& trig) {
    ++evaluations;
    MetricsReport r;
    try {
      r = gradprune::evaluate(m, test, trig);
    } catch (const StateError&) {
      ++violations;
      r.acc = eval_acc(m, test);
      r.asr = eval_asr(m, test, trig);
      r.ra = eval_ra(m, test, trig);
      return r;
    }
    if (r.asr + r.ra > 1.0) ++violations;
    return r;
  }

  void check_frozen(const Model& m) {
    ++frozen_checks;
    try {
      check_mask_frozen(m);
    } catch (const StateError&) {
      ++frozen_failures;
    }
  }
};

EvalLedger g_ledger;

ExperimentConfig gate_config(std::uint64_t seed) {
  ExperimentConfig cfg;  // 4 classes, 1x16x16, 500/200 per class, cnn-small
  cfg.trigger.kind = "patch";
  cfg.trigger.patch_size = 3;
  cfg.trigger.target = 0;
  cfg.poison_ratio = 0.10;
  cfg.prune.alpha_mode = AlphaMode::drop;
  cfg.prune.alpha = 0.10;
  cfg.prune.patience = 10;
  cfg.finetune.patience = 5;
  cfg.base_seed = seed;
  return cfg;
}

constexpr std::size_t kSeeds = 5;

struct AttackedModel {
  ExperimentConfig cfg;
  Model model;
  MetricsReport baseline;
  double seconds = 0.0;
};

struct TrialResult {
  bool completed = false;
  double seconds = 0.0;
  MetricsReport defended;
  std::string error;
};

// --- criterion 1 -----------------------------------------------------------

Outcome gradient_correctness() {
  double worst = 0.0;
  std::size_t entries = 0;
  const std::size_t seeds = 20;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto inst = testing::kink_free_instance(seed, {1, 16, 16}, 4, 2);
    const auto r = testing::finite_difference_check(inst.model, inst.batch, inst.labels, 1e-5);
    worst = std::max(worst, r.max_relative_error);
    entries += r.entries_checked;
  }
  return {worst < 1e-4, std::to_string(seeds) + " seeds, " + std::to_string(entries) +
                            " parameter entries, max relative error " + fmt("%.3e", worst)};
}

// --- criterion 2 -----------------------------------------------------------

Outcome score_oracle_and_tiebreak() {
  double worst = 0.0;
  std::size_t models = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ImageShape shape{1, 8, 8};
    Model m = build_model(seed % 2 ? "cnn-medium" : "cnn-small", 4, shape, seed);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < 5; ++k) {
      const auto all = m.all_filters();
      const FilterId id = all[rng() % all.size()];
      if (!m.mask().contains(id)) m.prune_filter(id);
    }
    const LabeledDataset data = apply_trigger(generate_synthetic(4, 75, shape, seed + 50),
                                              TriggerSpec::bottom_right_patch(shape, 0));
    // Independent gradient: one graph over the whole set.
    Graph g;
    const GradientSet grads =
        g.backward(g.softmax_cross_entropy(m.forward(g, g.constant(data.images)), data.labels));
    for (bool bias : {true, false}) {
      const FilterScores got = filter_scores(m, data, bias);
      std::size_t expected = 0;
      for (std::size_t l = 0; l < m.conv_layer_count(); ++l) {
        const std::size_t pos = m.conv_layer_position(l);
        const Tensor& gw = grads.at(weight_name(pos));
        const Tensor& gb = grads.at(bias_name(pos));
        const std::size_t per = gw.size() / gw.dim(0);
        for (std::size_t f = 0; f < gw.dim(0); ++f) {
          if (m.mask().contains({l, f})) {
            if (got.count({l, f})) return {false, "pruned filter was scored"};
            continue;
          }
          double s = 0.0;
          for (std::size_t k = 0; k < per; ++k) s += std::abs(gw[f * per + k]);
          if (bias) s += std::abs(gb[f]);
          s /= static_cast<double>(per + (bias ? 1 : 0));
          worst = std::max(worst, std::abs(got.at({l, f}) - s));
          ++expected;
        }
      }
      if (got.size() != expected) return {false, "score map has the wrong size"};
    }
    ++models;
  }

  std::mt19937_64 rng(99);
  const std::size_t maps = 2000;
  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < maps; ++t) {
    FilterScores scores;
    const std::size_t n = 1 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i)
      scores[{rng() % 4, rng() % 32}] = static_cast<double>(rng() % 4) * 0.125;
    FilterId want{};
    double best = -1.0;
    for (std::size_t l = 0; l < 4; ++l)
      for (std::size_t f = 0; f < 32; ++f) {
        const auto it = scores.find({l, f});
        if (it != scores.end() && it->second > best) best = it->second, want = {l, f};
      }
    mismatches += !(select_filter(scores) == want);
  }
  return {worst <= 1e-12 && mismatches == 0,
          std::to_string(models) + " models, max |score - oracle| " + fmt("%.3e", worst) +
              "; " + std::to_string(maps) + " tie maps, " + std::to_string(mismatches) +
              " mismatches"};
}

// --- criterion 3 -----------------------------------------------------------

std::vector<AttackedModel> g_attacked;
ExperimentData g_data;

Outcome attack_gate() {
  g_data = load_experiment_data(gate_config(0));
  std::size_t ok = 0;
  double slowest = 0.0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const ExperimentConfig cfg = gate_config(seed);
    const auto start = Clock::now();
    AttackOutcome a = run_attack(cfg, g_data, /*use_cache=*/false);
    const double secs = seconds_since(start);
    const TriggerSpec trig = cfg.trigger.build(g_data.train.image_shape());
    const MetricsReport r = g_ledger.evaluate(a.model, g_data.test, trig);
    slowest = std::max(slowest, secs);
    const bool pass = r.acc >= 0.85 && r.asr >= 0.95 && secs < 180.0;
    ok += pass;
    detail += " s" + std::to_string(seed) + "=" + fmt("%.3f", r.acc) + "/" + fmt("%.3f", r.asr);
    g_attacked.push_back({cfg, std::move(a.model), r, secs});
  }
  return {ok >= 4, std::to_string(ok) + "/5 seeds with ACC>=0.85 and ASR>=0.95 (ACC/ASR:" +
                       detail + "), slowest " + fmt("%.1fs", slowest)};
}

// --- criteria 4 and 8 -------------------------------------------------------

TrialResult run_trial(std::size_t index, std::size_t spc, DefenseKind defense) {
  const AttackedModel& a = g_attacked.at(index);
  const TriggerSpec trig = a.cfg.trigger.build(g_data.train.image_shape());
  const std::uint64_t trial_seed = a.cfg.base_seed + index;
  TrialResult t;
  const auto start = Clock::now();
  try {
    const DefenderDataset d = make_defender_split(g_data.pool, spc, trig, trial_seed);
    const DefenseOutcome out = run_defense(a.model, d, a.cfg, defense, trial_seed);
    if (out.pruned) g_ledger.evaluate(*out.pruned, g_data.test, trig);
    g_ledger.check_frozen(out.defended);
    t.defended = g_ledger.evaluate(out.defended, g_data.test, trig);
    t.completed = true;
  } catch (const std::exception& e) {
    t.error = e.what();
  }
  t.seconds = seconds_since(start);
  return t;
}

std::vector<TrialResult> g_ours_spc10;

Outcome defense_gate() {
  if (g_attacked.size() != kSeeds) return {false, "attack models unavailable"};
  std::string detail;
  bool pass = true;
  double slowest = 0.0;
  for (std::size_t spc : {10u, 100u}) {
    std::size_t ok = 0;
    std::string cells;
    for (std::size_t i = 0; i < kSeeds; ++i) {
      const TrialResult t = run_trial(i, spc, DefenseKind::ours);
      slowest = std::max(slowest, t.seconds);
      const double drop = g_attacked[i].baseline.acc - t.defended.acc;
      ok += t.completed && t.defended.asr <= 0.15 && drop <= 0.10 + 1e-12 &&
            t.defended.ra >= 0.60 && t.seconds < 300.0;
      cells += " " + fmt("%.2f", t.defended.acc) + "/" + fmt("%.2f", t.defended.asr) + "/" +
               fmt("%.2f", t.defended.ra);
      if (spc == 10) g_ours_spc10.push_back(t);
    }
    pass = pass && ok >= 4;
    detail += "SPC=" + std::to_string(spc) + " " + std::to_string(ok) + "/5 (ACC/ASR/RA:" +
              cells + "); ";
  }
  std::size_t reduced = 0;
  std::string cells;
  for (std::size_t i = 0; i < kSeeds; ++i) {
    const TrialResult t = run_trial(i, 2, DefenseKind::ours);
    slowest = std::max(slowest, t.seconds);
    reduced += t.completed && t.defended.asr < g_attacked[i].baseline.asr && t.seconds < 300.0;
    cells += " " + fmt("%.2f", t.defended.asr);
  }
  pass = pass && reduced == kSeeds;
  detail += "SPC=2 completed with lower ASR " + std::to_string(reduced) + "/5 (ASR:" + cells +
            "); slowest trial " + fmt("%.1fs", slowest);
  return {pass, detail};
}

Outcome baseline_ordering() {
  if (g_ours_spc10.size() != kSeeds) return {false, "defense results unavailable"};
  std::size_t ok = 0;
  std::string cells;
  for (std::size_t i = 0; i < kSeeds; ++i) {
    const TrialResult ft = run_trial(i, 10, DefenseKind::ft);
    const TrialResult& ours = g_ours_spc10[i];
    ok += ft.completed && ours.completed && ours.defended.asr <= ft.defended.asr;
    cells += " " + fmt("%.2f", ours.defended.asr) + "<=" + fmt("%.2f", ft.defended.asr);
  }
  return {ok >= 4, std::to_string(ok) + "/5 trials with ours ASR <= fine-tuning ASR at SPC=10:" +
                       cells};
}

// --- criterion 6 -----------------------------------------------------------

Outcome stopping_semantics() {
  const ImageShape shape{1, 8, 8};
  const Model flat = testing::constant_predictor(1, 4, shape);
  const DefenderDataset flat_split = make_defender_split(
      generate_synthetic(4, 20, shape, 1), 10, TriggerSpec::bottom_right_patch(shape, 0), 1);

  // (a) floor above the reachable accuracy: the first round is reverted.
  PruneConfig floor_cfg;
  floor_cfg.alpha_mode = AlphaMode::absolute;
  floor_cfg.alpha = 1.0;
  const PruneResult a = prune_loop(flat, flat_split, floor_cfg);
  const bool a_ok = a.trace.stop_reason == StopReason::accuracy_floor &&
                    a.trace.rounds.size() == 1 && a.trace.rounds[0].reverted &&
                    a.trace.returned_round == 0 && a.model == flat;

  // Drop mode with zero tolerance reverts the first round that costs accuracy.
  const auto& f = testing::small_backdoor();
  const DefenderDataset split = make_defender_split(f.pool, 10, f.trigger, 4);
  PruneConfig strict;
  strict.alpha = 0.0;
  strict.patience = 1000;
  const PruneResult a2 = prune_loop(f.model, split, strict);
  Model replay_a2 = f.model;
  for (const FilterId& id : a2.trace.kept_prunes()) replay_a2.prune_filter(id);
  const bool a2_ok =
      a2.model == replay_a2 &&
      (a2.trace.stop_reason != StopReason::accuracy_floor ||
       (a2.trace.rounds.back().reverted &&
        a2.trace.rounds.back().val_acc < a2.trace.initial_val_acc &&
        eval_acc(a2.model, split.clean_val) >= a2.trace.initial_val_acc));

  // (b) plateau: rollback to the best round, exactly `patience` rounds later.
  bool b_ok = true;
  for (std::size_t patience : {1u, 3u, 5u}) {
    PruneConfig cfg;
    cfg.alpha_mode = AlphaMode::absolute;
    cfg.alpha = 0.0;
    cfg.patience = patience;
    const PruneResult flat_run = prune_loop(flat, flat_split, cfg);
    b_ok = b_ok && flat_run.trace.stop_reason == StopReason::loss_plateau &&
           flat_run.trace.rounds.size() == patience && flat_run.model == flat;

    const PruneResult r = prune_loop(f.model, split, cfg);
    if (r.trace.stop_reason != StopReason::loss_plateau) continue;
    std::size_t best_round = 0;
    double best = r.trace.initial_val_loss;
    for (const auto& round : r.trace.rounds)
      if (round.val_loss < best - cfg.improvement_tol) best = round.val_loss, best_round = round.round;
    Model replay = f.model;
    for (const FilterId& id : r.trace.kept_prunes()) replay.prune_filter(id);
    b_ok = b_ok && r.trace.returned_round == best_round &&
           r.trace.rounds.size() == best_round + patience && r.model == replay;
  }

  // (c) loop bound: never more rounds than filters.
  PruneConfig endless;
  endless.alpha_mode = AlphaMode::absolute;
  endless.alpha = 0.0;
  endless.patience = 100000;
  const PruneResult c = prune_loop(flat, flat_split, endless);
  const PruneResult c2 = prune_loop(f.model, split, endless);
  const bool c_ok = c.trace.rounds.size() == flat.total_filter_count() &&
                    c.trace.stop_reason == StopReason::filters_exhausted &&
                    c2.trace.rounds.size() <= f.model.total_filter_count();

  return {a_ok && a2_ok && b_ok && c_ok,
          std::string("floor revert ") + (a_ok && a2_ok ? "ok" : "BAD") + ", plateau rollback " +
              (b_ok ? "ok" : "BAD") + ", loop bound " + (c_ok ? "ok" : "BAD") + " (" +
              std::to_string(c2.trace.rounds.size()) + " rounds <= " +
              std::to_string(f.model.total_filter_count()) + " filters)"};
}

// --- criterion 7 -----------------------------------------------------------

Outcome determinism(const std::filesystem::path& root) {
  std::string sums[2];
  std::size_t failed = 0, rows = 0;
  for (int i = 0; i < 2; ++i) {
    ExperimentConfig cfg = gate_config(0);
    cfg.out = root / ("run" + std::to_string(i));
    cfg.cache_dir = root / ("cache" + std::to_string(i));
    const RunSummary s = run_experiment(cfg);
    failed += s.trials_failed;
    rows = s.reports.size();
    sums[i] = read_file(cfg.out / "summary.csv");
    const TriggerSpec trig = cfg.trigger.build(g_data.train.image_shape());
    for (const auto& entry : std::filesystem::directory_iterator(cfg.out / "checkpoints")) {
      const Model m = load_checkpoint(entry.path());
      g_ledger.check_frozen(m);
      g_ledger.evaluate(m, g_data.test, trig);
    }
  }
  return {sums[0] == sums[1] && failed == 0 && !sums[0].empty(),
          "two runs, " + std::to_string(rows) + " metric rows each, summary.csv " +
              (sums[0] == sums[1] ? "bit-identical" : "DIFFERS") + ", failed trials " +
              std::to_string(failed)};
}

}  // namespace

int main() {
  const auto root = std::filesystem::temp_directory_path() / "gradprune_acceptance";
  std::filesystem::remove_all(root);

  report(1, "gradient correctness", gradient_correctness);
  report(2, "filter score oracle and tie-break", score_oracle_and_tiebreak);
  report(3, "attack gate", attack_gate);
  report(4, "defense gate", defense_gate);
  report(6, "stopping semantics", stopping_semantics);
  report(7, "determinism", [&] { return determinism(root); });
  report(8, "ordering against fine-tuning", baseline_ordering);
  report(5, "metric relations and mask freeze", [] {
    const bool ok = g_ledger.evaluations > 0 && g_ledger.violations == 0 &&
                    g_ledger.frozen_checks > 0 && g_ledger.frozen_failures == 0;
    return Outcome{ok, std::to_string(g_ledger.evaluations) + " evaluations, " +
                           std::to_string(g_ledger.violations) + " with ASR+RA>1; " +
                           std::to_string(g_ledger.frozen_checks) + " defended models, " +
                           std::to_string(g_ledger.frozen_failures) + " with unfrozen filters"};
  });

  std::filesystem::remove_all(root);
  std::sort(g_results.begin(), g_results.end(),
            [](const Line& a, const Line& b) { return a.id < b.id; });
  std::size_t passed = 0;
  for (const Line& r : g_results) {
    std::printf("%s\n", r.text.c_str());
    passed += r.pass;
  }
  std::printf("%zu/%zu criteria passed\n", passed, g_results.size());
  return passed == g_results.size() ? 0 : 1;
}
