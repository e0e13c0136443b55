/*
 * Copyright 2026 The ARMIN Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "armin/training.hpp"

namespace armin {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;  // 0 for command-line overrides
};

/// Parses `key = value` lines; `#` starts a comment. Throws ConfigError with
/// the line number on malformed lines and duplicate keys.
std::vector<ConfigEntry> parse_config(std::istream& in);
/// Throws ConfigError naming `path` when it cannot be read.
std::vector<ConfigEntry> read_config_file(const std::string& path);
/// Parses a `key=value` override.
ConfigEntry parse_override(const std::string& text);

/// Applies entries in order, except that `task` is applied first so range keys
/// refine the task defaults. Unknown keys and bad values raise ConfigError.
void apply_config(TrainConfig& config, const std::vector<ConfigEntry>& entries);

/// Every recognised key.
std::vector<std::string> config_keys();

/// The full config in the file format, readable by parse_config.
std::string format_config(const TrainConfig& config);

}  // namespace armin
