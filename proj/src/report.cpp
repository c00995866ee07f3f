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

#include "repreval/report.hpp"

#include "repreval/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace repreval::io {

namespace {

void check_finite(const std::string& key, double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteMetric, "core-io", "metric '" + key + "' is not finite");
}

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

void write_reals(std::ostringstream& out, const std::map<std::string, double>& values, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  if (values.empty()) {
    out << "{}";
    return;
  }
  out << "{\n";
  std::size_t i = 0;
  for (const auto& [k, v] : values) {
    check_finite(k, v);
    out << pad << "  " << quote(k) << ": " << format_real(v) << (++i < values.size() ? ",\n" : "\n");
  }
  out << pad << "}";
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string serialize_report(const EvalReport& report) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"config\": ";
  if (report.config.empty()) {
    out << "{}";
  } else {
    out << "{\n";
    std::size_t i = 0;
    for (const auto& [k, v] : report.config) {
      out << "    " << quote(k) << ": " << quote(v) << (++i < report.config.size() ? ",\n" : "\n");
    }
    out << "  }";
  }
  out << ",\n  \"config_digest\": " << quote(report.config_digest);
  out << ",\n  \"flags\": [";
  std::size_t i = 0;
  for (const auto& f : report.flags) out << (i++ ? ", " : "") << quote(f);
  out << "]";
  out << ",\n  \"metrics\": ";
  write_reals(out, report.metrics, 2);
  out << ",\n  \"per_factor\": ";
  if (report.per_factor.empty()) {
    out << "{}";
  } else {
    out << "{\n";
    i = 0;
    for (const auto& [factor, values] : report.per_factor) {
      out << "    " << quote(factor) << ": ";
      write_reals(out, values, 4);
      out << (++i < report.per_factor.size() ? ",\n" : "\n");
    }
    out << "  }";
  }
  out << ",\n  \"seed\": " << report.seed;
  out << ",\n  \"timings\": ";
  write_reals(out, report.timings, 2);
  out << ",\n  \"version\": " << quote(report.version) << "\n}\n";
  return out.str();
}

void emit_report(const EvalReport& report, const std::filesystem::path& path) {
  const auto text = serialize_report(report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "core-io", "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "core-io", "short write to " + path.string());
}

EvalReport parse_report(const std::string& text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.version = j.at("version").get<std::string>();
    r.config_digest = j.at("config_digest").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
    for (const auto& [f, block] : j.at("per_factor").items()) {
      for (const auto& [k, v] : block.items()) r.per_factor[f][k] = v.get<double>();
    }
    for (const auto& [k, v] : j.at("timings").items()) r.timings[k] = v.get<double>();
    for (const auto& [k, v] : j.at("config").items()) r.config[k] = v.get<std::string>();
    for (const auto& f : j.at("flags")) r.flags.insert(f.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadHeader, "core-io", std::string("malformed report: ") + e.what());
  }
  return r;
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "core-io", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_report(buf.str());
}

EvalReport merge_reports(const std::vector<EvalReport>& reports) {
  EvalReport merged;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (i == 0) {
      merged.seed = r.seed;
      merged.version = r.version;
    } else if (r.seed != merged.seed) {
      merged.flags.insert("seed_mismatch");
    }
    for (const auto& [k, v] : r.metrics) merged.metrics[k] = v;
    for (const auto& [f, block] : r.per_factor) {
      for (const auto& [k, v] : block) merged.per_factor[f][k] = v;
    }
    for (const auto& [k, v] : r.timings) merged.timings[k] = v;
    for (const auto& [k, v] : r.config) merged.config[k] = v;
    merged.flags.insert(r.flags.begin(), r.flags.end());
  }
  merged.config_digest = config_digest(merged.config);
  return merged;
}

std::string config_digest(const std::map<std::string, std::string>& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : config) feed(k + "=" + v + "\n");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace repreval::io
