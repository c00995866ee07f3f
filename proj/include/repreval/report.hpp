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

namespace repreval::io {

/// Canonical JSON text: sorted keys, two-space indent, reals with 17
/// significant digits. Throws NonFiniteMetric on NaN or infinite values.
std::string serialize_report(const EvalReport& report);
void emit_report(const EvalReport& report, const std::filesystem::path& path);

EvalReport parse_report(const std::string& text);
EvalReport read_report(const std::filesystem::path& path);

/// Union of metrics, per-factor blocks, config and flags. Later reports win
/// on key collisions; seeds must agree or the result records "seed_mismatch".
EvalReport merge_reports(const std::vector<EvalReport>& reports);

/// FNV-1a 64-bit digest over "key=value\n" lines of the resolved config.
std::string config_digest(const std::map<std::string, std::string>& config);

std::string format_real(double value);

}  // namespace repreval::io
