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

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace repreval::io {

enum class Dtype { f32, f64, i32, u8 };

std::string to_string(Dtype dtype);
std::size_t dtype_size(Dtype dtype);

// In-memory RTAB1 tensor: row-major payload of one of the supported dtypes.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::variant<std::vector<float>, std::vector<double>, std::vector<std::int32_t>, std::vector<std::uint8_t>> data;

  Dtype dtype() const { return static_cast<Dtype>(data.index()); }
  std::size_t size() const;
  std::int64_t dim(std::size_t axis) const { return shape.at(axis); }

  /// Element i converted to double.
  double at(std::size_t i) const;

  /// First axis as rows, remaining axes flattened into columns.
  Matrix to_matrix() const;
};

// File layout: "RTAB1\n", one header line "shape=a,b dtype=f32 order=rowmajor\n",
// then the little-endian payload.
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

Tensor make_tensor(std::vector<std::int64_t> shape, Dtype dtype, std::vector<double> values);

/// Doubles narrowed to f32 on disk.
Tensor from_matrix(const Matrix& m);
Tensor from_matrix(const Matrix& m, std::vector<std::int64_t> shape);

Tensor from_masks(const MaskSet& masks);
/// Rank-3 i32 tensor (images, H, W); label 0 is background.
MaskSet to_masks(const Tensor& tensor);

}  // namespace repreval::io
