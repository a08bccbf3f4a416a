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

#include "gradprune/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "gradprune/errors.hpp"
#include "gradprune/io.hpp"

namespace gradprune {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
}

std::string fmt_double(double v) {
  // Shortest text that parses back to the same value.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    out.push_back(parse_number<std::size_t>(key, trim(item)));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "' is empty");
  return out;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define GP_SIZE(KEY, MEMBER)                                                   \
  Field {                                                                      \
    KEY,                                                                       \
        [](ExperimentConfig& c, const std::string& v) {                        \
          c.MEMBER = parse_number<std::size_t>(KEY, v);                        \
        },                                                                     \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }     \
  }
#define GP_U64(KEY, MEMBER)                                                    \
  Field {                                                                      \
    KEY,                                                                       \
        [](ExperimentConfig& c, const std::string& v) {                        \
          c.MEMBER = parse_number<std::uint64_t>(KEY, v);                      \
        },                                                                     \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }     \
  }
#define GP_REAL(KEY, MEMBER)                                                   \
  Field {                                                                      \
    KEY,                                                                       \
        [](ExperimentConfig& c, const std::string& v) {                        \
          c.MEMBER = parse_number<double>(KEY, v);                             \
        },                                                                     \
        [](const ExperimentConfig& c) { return fmt_double(c.MEMBER); }         \
  }
#define GP_STR(KEY, MEMBER)                                                    \
  Field {                                                                      \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = v; },      \
        [](const ExperimentConfig& c) { return std::string(c.MEMBER); }        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      GP_STR("dataset", dataset),
      GP_SIZE("synthetic.classes", synthetic.classes),
      GP_SIZE("synthetic.train_per_class", synthetic.train_per_class),
      GP_SIZE("synthetic.test_per_class", synthetic.test_per_class),
      GP_SIZE("synthetic.pool_per_class", synthetic.pool_per_class),
      GP_SIZE("synthetic.channels", synthetic.shape.channels),
      GP_SIZE("synthetic.height", synthetic.shape.height),
      GP_SIZE("synthetic.width", synthetic.shape.width),
      GP_U64("synthetic.seed", synthetic.data_seed),
      Field{"idx.train_images",
            [](ExperimentConfig& c, const std::string& v) { c.idx.train_images = v; },
            [](const ExperimentConfig& c) { return c.idx.train_images.string(); }},
      Field{"idx.train_labels",
            [](ExperimentConfig& c, const std::string& v) { c.idx.train_labels = v; },
            [](const ExperimentConfig& c) { return c.idx.train_labels.string(); }},
      Field{"idx.test_images",
            [](ExperimentConfig& c, const std::string& v) { c.idx.test_images = v; },
            [](const ExperimentConfig& c) { return c.idx.test_images.string(); }},
      Field{"idx.test_labels",
            [](ExperimentConfig& c, const std::string& v) { c.idx.test_labels = v; },
            [](const ExperimentConfig& c) { return c.idx.test_labels.string(); }},
      GP_SIZE("idx.pool_per_class", idx.pool_per_class),
      GP_STR("arch", arch),
      GP_STR("trigger.kind", trigger.kind),
      GP_SIZE("trigger.patch_size", trigger.patch_size),
      GP_REAL("trigger.patch_fill", trigger.patch_fill),
      GP_REAL("trigger.blend_ratio", trigger.blend_ratio),
      GP_U64("trigger.blend_seed", trigger.blend_seed),
      GP_SIZE("trigger.target", trigger.target),
      GP_REAL("poison_ratio", poison_ratio),
      GP_REAL("attack.lr", attack.learning_rate),
      GP_REAL("attack.momentum", attack.momentum),
      GP_SIZE("attack.batch_size", attack.batch_size),
      GP_SIZE("attack.epochs", attack.epochs),
      Field{"defense",
            [](ExperimentConfig& c, const std::string& v) { c.defense = parse_defense(v); },
            [](const ExperimentConfig& c) { return to_string(c.defense); }},
      Field{"prune.alpha_mode",
            [](ExperimentConfig& c, const std::string& v) {
              c.prune.alpha_mode = parse_alpha_mode(v);
            },
            [](const ExperimentConfig& c) { return to_string(c.prune.alpha_mode); }},
      GP_REAL("prune.alpha", prune.alpha),
      GP_SIZE("prune.patience", prune.patience),
      GP_REAL("prune.tol", prune.improvement_tol),
      Field{"prune.include_bias",
            [](ExperimentConfig& c, const std::string& v) {
              c.prune.include_bias = parse_bool("prune.include_bias", v);
            },
            [](const ExperimentConfig& c) {
              return std::string(c.prune.include_bias ? "true" : "false");
            }},
      GP_REAL("finetune.lr", finetune.sgd.learning_rate),
      GP_REAL("finetune.momentum", finetune.sgd.momentum),
      GP_SIZE("finetune.batch_size", finetune.sgd.batch_size),
      GP_SIZE("finetune.max_epochs", finetune.sgd.epochs),
      GP_SIZE("finetune.patience", finetune.patience),
      GP_REAL("finetune.tol", finetune.improvement_tol),
      GP_REAL("fp.prune_fraction", fp_prune_fraction),
      Field{"spc",
            [](ExperimentConfig& c, const std::string& v) { c.spc = parse_list("spc", v); },
            [](const ExperimentConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.spc.size(); ++i) {
                if (i != 0) out += ',';
                out += std::to_string(c.spc[i]);
              }
              return out;
            }},
      GP_SIZE("trials", trials),
      GP_U64("seed", base_seed),
      Field{"out", [](ExperimentConfig& c, const std::string& v) { c.out = v; },
            [](const ExperimentConfig& c) { return c.out.string(); }},
      Field{"cache_dir", [](ExperimentConfig& c, const std::string& v) { c.cache_dir = v; },
            [](const ExperimentConfig& c) { return c.cache_dir.string(); }},
  };
  return table;
}

#undef GP_SIZE
#undef GP_U64
#undef GP_REAL
#undef GP_STR

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    if (!out.emplace(key, value).second) {
      throw ConfigError("config key '" + key + "' given twice");
    }
  }
  return out;
}

std::string to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::ours:
      return "ours";
    case DefenseKind::ft:
      return "ft";
    case DefenseKind::fp:
      return "fp";
    case DefenseKind::none:
      return "none";
  }
  return "unknown";
}

DefenseKind parse_defense(const std::string& text) {
  if (text == "ours") return DefenseKind::ours;
  if (text == "ft") return DefenseKind::ft;
  if (text == "fp") return DefenseKind::fp;
  if (text == "none") return DefenseKind::none;
  throw ConfigError("defense must be one of ours, ft, fp, none; got '" + text + "'");
}

TriggerSpec TriggerConfig::build(const ImageShape& shape) const {
  if (kind == "patch") {
    return TriggerSpec::bottom_right_patch(shape, target, patch_size, patch_fill);
  }
  if (kind == "blended") {
    return TriggerSpec::noise_blend(shape, blend_ratio, blend_seed, target);
  }
  throw ConfigError("trigger.kind must be 'patch' or 'blended', got '" + kind + "'");
}

std::string TriggerConfig::attack_name() const {
  return kind == "patch" ? "badnets" : kind;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) cfg.set(key, value);
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const PersistenceError& e) {
    throw ConfigError(e.what());
  }
  return from_text(text);
}

void ExperimentConfig::validate() const {
  if (dataset != "synthetic" && dataset != "idx") {
    throw ConfigError("dataset must be 'synthetic' or 'idx', got '" + dataset + "'");
  }
  if (dataset == "synthetic") {
    if (synthetic.classes < 2) throw ConfigError("synthetic.classes must be >= 2");
    if (synthetic.train_per_class < 1 || synthetic.test_per_class < 1 ||
        synthetic.pool_per_class < 1) {
      throw ConfigError("synthetic per-class counts must be >= 1");
    }
    if (synthetic.shape.size() == 0) throw ConfigError("synthetic image shape has a zero axis");
    if (trigger.target >= synthetic.classes) {
      throw ConfigError("trigger.target outside the class range");
    }
  }
  bool known_arch = false;
  for (const auto& a : known_architectures()) known_arch = known_arch || a == arch;
  if (!known_arch) throw ConfigError("unknown architecture '" + arch + "'");
  if (trigger.kind != "patch" && trigger.kind != "blended") {
    throw ConfigError("trigger.kind must be 'patch' or 'blended'");
  }
  if (!(poison_ratio > 0.0 && poison_ratio < 1.0)) {
    throw ConfigError("poison_ratio must lie in (0,1)");
  }
  attack.validate();
  prune.validate();
  finetune.validate();
  if (!(fp_prune_fraction >= 0.0 && fp_prune_fraction < 1.0)) {
    throw ConfigError("fp.prune_fraction must lie in [0,1)");
  }
  if (trials < 1) throw ConfigError("trials must be >= 1");
  for (std::size_t s : spc) {
    if (s < 2) throw ConfigError("every spc value must be >= 2");
  }
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(*this);
    out += '\n';
  }
  return out;
}

std::string ExperimentConfig::attack_identity() const {
  static const char* kKeys[] = {
      "dataset",           "synthetic.classes", "synthetic.train_per_class",
      "synthetic.test_per_class", "synthetic.pool_per_class", "synthetic.channels",
      "synthetic.height",  "synthetic.width",   "synthetic.seed",
      "idx.train_images",  "idx.train_labels",  "idx.test_images",
      "idx.test_labels",   "idx.pool_per_class", "arch",
      "trigger.kind",      "trigger.patch_size", "trigger.patch_fill",
      "trigger.blend_ratio", "trigger.blend_seed", "trigger.target",
      "poison_ratio",      "attack.lr",         "attack.momentum",
      "attack.batch_size", "attack.epochs",     "seed"};
  std::string out;
  for (const char* key : kKeys) {
    for (const auto& f : fields()) {
      if (std::string(f.key) == key) out += std::string(key) + "=" + f.get(*this) + "\n";
    }
  }
  return out;
}

std::filesystem::path ExperimentConfig::resolved_cache_dir() const {
  return cache_dir.empty() ? out / "cache" : cache_dir;
}

}  // namespace gradprune
