// Copyright 2026 The repreval Authors
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

#pragma once

#include "repreval/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace repreval::config {

enum class ValueType { integer, real, text, boolean };

struct KeySpec {
  std::string key;
  ValueType type;
  std::string fallback;  // documented default
};

/// Every recognised key with its default.
const std::vector<KeySpec>& schema();

enum class Source { fallback, file, flag };

// Resolved values for every schema key, with the layer that set each one.
struct RunConfig {
  std::map<std::string, std::string> values;
  std::map<std::string, Source> source;
  std::vector<std::string> overridden;  // file values replaced by flags

  Index integer(const std::string& key) const;
  double real(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;  // comma separated
};

RunConfig defaults();

/// key=value lines; '#' starts a comment. Throws UnknownKey or TypeError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies a command-line value; a flag always wins over the file.
void set_flag(RunConfig& config, const std::string& key, const std::string& value);

/// Resolved values of keys starting with one of `prefixes` (all when empty).
std::map<std::string, std::string> resolved(const RunConfig& config, const std::vector<std::string>& prefixes = {});

}  // namespace repreval::config
