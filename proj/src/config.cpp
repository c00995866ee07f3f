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

#include "repreval/config.hpp"

#include "repreval/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace repreval::config {
namespace {

constexpr const char* kModule = "cli";

const KeySpec& find(const std::string& key) {
  for (const auto& k : schema())
    if (k.key == key) return k;
  throw Error(ErrorCode::UnknownKey, kModule, "unknown configuration key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_type(const KeySpec& spec, const std::string& value) {
  bool ok = true;
  switch (spec.type) {
    case ValueType::integer: {
      long long v = 0;
      const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      ok = ec == std::errc() && p == value.data() + value.size() && !value.empty();
      break;
    }
    case ValueType::real: {
      char* end = nullptr;
      std::strtod(value.c_str(), &end);
      ok = !value.empty() && end == value.c_str() + value.size();
      break;
    }
    case ValueType::boolean: ok = value == "true" || value == "false"; break;
    case ValueType::text: break;
  }
  if (!ok) throw Error(ErrorCode::TypeError, kModule, "value '" + value + "' has the wrong type for key '" + spec.key + "'");
}

}  // namespace

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"seed", ValueType::integer, "0"},
      {"bins", ValueType::integer, "20"},
      {"binning", ValueType::text, "equal_width"},
      {"metrics", ValueType::text, "mig,dci,sap,modularity,irs,betavae,factorvae"},
      {"train_fraction", ValueType::real, "0.8"},
      {"batches.train", ValueType::integer, "500"},
      {"batches.eval", ValueType::integer, "100"},
      {"batches.size", ValueType::integer, "64"},
      {"factorvae.prune_threshold", ValueType::real, "0.05"},
      {"forest.trees", ValueType::integer, "10"},
      {"forest.max_depth", ValueType::integer, "8"},
      {"predictor", ValueType::text, "mlp"},
      {"mlp.hidden_layers", ValueType::integer, "1"},
      {"mlp.hidden_size", ValueType::integer, "256"},
      {"mlp.slope", ValueType::real, "0.01"},
      {"train.learning_rate", ValueType::real, "0.001"},
      {"train.batch_size", ValueType::integer, "64"},
      {"train.max_steps", ValueType::integer, "6000"},
      {"train.halve_every", ValueType::integer, "2000"},
      {"train.eval_every", ValueType::integer, "250"},
      {"train.patience", ValueType::integer, "3"},
      {"train.min_delta", ValueType::real, "0.01"},
      {"train.val_fraction", ValueType::real, "0.1"},
      {"ood.factor", ValueType::text, "cube_hue"},
      {"ood.scenarios", ValueType::text, "ood1-a,ood1-b,ood1-c,ood2,id"},
      {"ood.train_rows", ValueType::integer, "10000"},
      {"ood.eval_rows", ValueType::integer, "5000"},
      {"ood.mlp_hidden_layers", ValueType::integer, "2"},
      {"ood.mix", ValueType::text, "identity"},
      {"ood.noise", ValueType::real, "0"},
      {"objects.matching", ValueType::text, "loss"},
      {"objects.layout", ValueType::text, "slotted"},
      {"objects.slots", ValueType::integer, "0"},
      {"objects.train_scenes", ValueType::integer, "10000"},
      {"objects.val_scenes", ValueType::integer, "1000"},
      {"objects.test_scenes", ValueType::integer, "2000"},
      {"objects.baseline_seeds", ValueType::integer, "10"},
      {"decompose.mc_samples", ValueType::integer, "20000"},
      {"gen.space", ValueType::text, "table31"},
      {"gen.mix", ValueType::text, "identity"},
      {"gen.factors", ValueType::text, "all"},
      {"gen.n", ValueType::integer, "10000"},
      {"gen.noise", ValueType::real, "0"},
      {"gen.extra_dims", ValueType::integer, "0"},
      {"gen.posterior_sigma", ValueType::real, "0"},
      {"gen.scenes", ValueType::integer, "0"},
  };
  return keys;
}

Index RunConfig::integer(const std::string& key) const {
  find(key);
  return static_cast<Index>(std::stoll(values.at(key)));
}

double RunConfig::real(const std::string& key) const {
  find(key);
  return std::strtod(values.at(key).c_str(), nullptr);
}

const std::string& RunConfig::text(const std::string& key) const {
  find(key);
  return values.at(key);
}

bool RunConfig::boolean(const std::string& key) const {
  find(key);
  return values.at(key) == "true";
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream in(text(key));
  std::string item;
  while (std::getline(in, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

RunConfig defaults() {
  RunConfig c;
  for (const auto& k : schema()) {
    c.values[k.key] = k.fallback;
    c.source[k.key] = Source::fallback;
  }
  return c;
}

RunConfig parse_config(const std::string& text) {
  RunConfig c = defaults();
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::TypeError, kModule, "config line without '=': " + line);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    check_type(find(key), value);
    c.values[key] = value;
    c.source[key] = Source::file;
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, kModule, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void set_flag(RunConfig& config, const std::string& key, const std::string& value) {
  check_type(find(key), value);
  if (config.source[key] == Source::file && config.values[key] != value) config.overridden.push_back(key);
  config.values[key] = value;
  config.source[key] = Source::flag;
}

std::map<std::string, std::string> resolved(const RunConfig& config, const std::vector<std::string>& prefixes) {
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : config.values) {
    const bool keep = prefixes.empty() || std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) { return key.rfind(p, 0) == 0; });
    if (keep) out[key] = value;
  }
  return out;
}

}  // namespace repreval::config
