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

// Sidecar record: UTF-8 "key=value" lines, written in sorted key order.
using Metadata = std::map<std::string, std::string>;

Metadata read_metadata(const std::filesystem::path& path);
void write_metadata(const std::filesystem::path& path, const Metadata& meta);

/// Conventional sidecar location: "<tensor path>.meta".
std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

Metadata describe(const FactorSpace& space);
FactorSpace factor_space_from(const Metadata& meta);

/// Factor grid indices as an i32 tensor plus the space description sidecar.
void save_factors(const std::filesystem::path& path, const FactorTable& table);
FactorTable load_factors(const std::filesystem::path& path);

void save_representation(const std::filesystem::path& path, const Representation& repr);
Representation load_representation(const std::filesystem::path& path);

// Property tables are stored as an f32 tensor (scenes, max objects, P + 2):
// the P properties, then an object state (0 absent, 1 visible, 2 occluded)
// and the object OOD flag. Schema and canonical order go to the sidecar.
void save_properties(const std::filesystem::path& path, const PropertyTable& table);
PropertyTable load_properties(const std::filesystem::path& path);

void save_masks(const std::filesystem::path& path, const MaskSet& masks);
MaskSet load_masks(const std::filesystem::path& path);

}  // namespace repreval::io
