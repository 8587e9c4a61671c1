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

#ifndef LAPDA_CONFIG_HPP_
#define LAPDA_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

#include "lapda/data.hpp"
#include "lapda/train.hpp"

namespace lapda {

// Ordered so canonical serialization and hashing are stable.
using ConfigMap = std::map<std::string, std::string>;

// Plain-text `key = value` lines; '#' starts a comment. Throws ConfigError
// on unreadable files or malformed lines.
ConfigMap parse_config_file(const std::string& path);

// Applies repeatable `key=value` override strings on top of `cfg`.
void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides);

/// Fully materialized run setup: every default resolved, ready to reproduce.
struct ResolvedConfig {
  ScenarioSpec scenario;
  TrainConfig train;
  ConfigMap items;        // every key, defaults included
  std::string hash_hex;   // content hash of the canonical serialization
};

// Precedence: built-in defaults < file < overrides. Unknown keys and
// unparsable values raise ConfigError.
ResolvedConfig resolve_config(const ConfigMap& cfg);

// Canonical "key=value" lines, sorted by key.
std::string canonical_config(const ConfigMap& cfg);

// FNV-1a 64-bit over the canonical form, as lowercase hex.
std::string config_hash(const ConfigMap& cfg);

}  // namespace lapda

#endif  // LAPDA_CONFIG_HPP_
