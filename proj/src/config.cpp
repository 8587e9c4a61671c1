// Copyright 2026 The lapda Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lapda/config.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "lapda/errors.hpp"

namespace lapda {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Defaults double as the key whitelist.
ConfigMap default_config() {
  return {
      {"scenario", "two-moons-rotate"},
      {"seed", "1"},
      {"n_train", "1000"},
      {"n_test", "1000"},
      {"angle", "30"},
      {"noise", "0.1"},
      {"classes", "2"},
      {"shift_x", "0.15"},
      {"shift_y", "0.1"},
      {"source_images", ""},
      {"source_labels", ""},
      {"target_images", ""},
      {"target_labels", ""},
      {"alpha", "1"},
      {"gamma", "10"},
      {"lr", "0.01"},
      {"momentum", "0.9"},
      {"batch_source", "128"},
      {"batch_target", "128"},
      {"total_steps", "1000"},
      {"eval_every", "100"},
      {"validation_size", "200"},
      {"propagation", "closed"},
      {"truncation_steps", "20"},
      {"enable_dann", "true"},
      {"freeze_discriminator", "false"},
      {"arch", "mlp"},
      {"hidden", "64"},
      {"feature_dim", "8"},
      {"disc_hidden", "64"},
  };
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value '" + v + "' for key '" + key +
                      "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value '" + v + "' for key '" + key +
                      "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean value '" + v + "' for key '" + key +
                    "'");
}

}  // namespace

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file '" + path + "'");
  ConfigMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": empty key");
    }
    out[key] = value;
  }
  return out;
}

void apply_overrides(ConfigMap& cfg,
                     const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    std::size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("config: override '" + ov + "' is not key=value");
    }
    cfg[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
  }
}

ResolvedConfig resolve_config(const ConfigMap& cfg) {
  ConfigMap items = default_config();
  for (const auto& [key, value] : cfg) {
    if (items.find(key) == items.end()) {
      throw ConfigError("config: unknown key '" + key + "'");
    }
    items[key] = value;
  }

  ResolvedConfig rc;
  rc.items = items;
  rc.hash_hex = config_hash(items);

  ScenarioSpec& s = rc.scenario;
  s.kind = scenario_kind_from_name(items["scenario"]);
  s.seed = to_u64("seed", items["seed"]);
  s.n_train = to_u64("n_train", items["n_train"]);
  s.n_val = to_u64("validation_size", items["validation_size"]);
  s.n_test = to_u64("n_test", items["n_test"]);
  s.angle_deg = to_double("angle", items["angle"]);
  s.noise = to_double("noise", items["noise"]);
  s.classes = static_cast<int>(to_u64("classes", items["classes"]));
  s.shift = {to_double("shift_x", items["shift_x"]),
             to_double("shift_y", items["shift_y"])};
  s.source_images = items["source_images"];
  s.source_labels = items["source_labels"];
  s.target_images = items["target_images"];
  s.target_labels = items["target_labels"];
  if (s.kind == ScenarioKind::kIdxPair &&
      (s.source_images.empty() || s.source_labels.empty() ||
       s.target_images.empty() || s.target_labels.empty())) {
    throw ConfigError(
        "config: idx-pair scenario needs source_images/source_labels/"
        "target_images/target_labels");
  }

  TrainConfig& t = rc.train;
  t.alpha = to_double("alpha", items["alpha"]);
  t.gamma = to_double("gamma", items["gamma"]);
  t.lr = to_double("lr", items["lr"]);
  t.momentum = to_double("momentum", items["momentum"]);
  t.batch_source = to_u64("batch_source", items["batch_source"]);
  t.batch_target = to_u64("batch_target", items["batch_target"]);
  t.total_steps = to_u64("total_steps", items["total_steps"]);
  t.eval_every = to_u64("eval_every", items["eval_every"]);
  t.validation_size = s.n_val;
  t.seed = s.seed;
  t.propagation = propagation_mode_from_name(items["propagation"]);
  t.truncation_steps =
      static_cast<int>(to_u64("truncation_steps", items["truncation_steps"]));
  t.enable_dann = to_bool("enable_dann", items["enable_dann"]);
  t.freeze_discriminator =
      to_bool("freeze_discriminator", items["freeze_discriminator"]);
  t.arch = arch_from_name(items["arch"]);
  t.hidden = to_u64("hidden", items["hidden"]);
  t.feature_dim = to_u64("feature_dim", items["feature_dim"]);
  t.disc_hidden = to_u64("disc_hidden", items["disc_hidden"]);
  return rc;
}

std::string canonical_config(const ConfigMap& cfg) {
  std::ostringstream out;
  for (const auto& [key, value] : cfg) {
    out << key << "=" << value << "\n";
  }
  return out.str();
}

std::string config_hash(const ConfigMap& cfg) {
  const std::string text = canonical_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i) {
    hex[i] = digits[h & 0xf];
    h >>= 4;
  }
  return hex;
}

}  // namespace lapda
