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

#include "repreval/tensor_io.hpp"

#include "repreval/error.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace repreval::io {

namespace {

constexpr std::string_view kMagic = "RTAB1\n";

[[noreturn]] void fail(ErrorCode code, const std::string& what) { throw Error(code, "core-io", what); }

template <typename T>
void to_little_endian(std::vector<T>& values) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return;
  } else {
    for (auto& v : values) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      std::reverse(std::begin(bytes), std::end(bytes));
      std::memcpy(&v, bytes, sizeof(T));
    }
  }
}

Dtype parse_dtype(const std::string& s) {
  if (s == "f32") return Dtype::f32;
  if (s == "f64") return Dtype::f64;
  if (s == "i32") return Dtype::i32;
  if (s == "u8") return Dtype::u8;
  fail(ErrorCode::UnsupportedDtype, "dtype '" + s + "'");
}

std::size_t element_count(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

template <typename T>
std::vector<T> decode(const std::string& payload) {
  std::vector<T> values(payload.size() / sizeof(T));
  std::memcpy(values.data(), payload.data(), payload.size());
  to_little_endian(values);
  return values;
}

}  // namespace

std::string to_string(Dtype dtype) {
  switch (dtype) {
    case Dtype::f32: return "f32";
    case Dtype::f64: return "f64";
    case Dtype::i32: return "i32";
    case Dtype::u8: return "u8";
  }
  return "?";
}

std::size_t dtype_size(Dtype dtype) {
  switch (dtype) {
    case Dtype::f32: return 4;
    case Dtype::f64: return 8;
    case Dtype::i32: return 4;
    case Dtype::u8: return 1;
  }
  return 0;
}

std::size_t Tensor::size() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

double Tensor::at(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, data);
}

Matrix Tensor::to_matrix() const {
  if (shape.empty()) fail(ErrorCode::ShapeMismatch, "rank-0 tensor has no matrix view");
  const auto rows = static_cast<Index>(shape[0]);
  Index cols = 1;
  for (std::size_t a = 1; a < shape.size(); ++a) cols *= static_cast<Index>(shape[a]);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = at(static_cast<std::size_t>(r * cols + c));
  }
  return m;
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string magic(kMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kMagic) fail(ErrorCode::BadMagic, path.string());

  std::string header;
  if (!std::getline(in, header)) fail(ErrorCode::BadHeader, "missing header line in " + path.string());
  std::istringstream fields(header);
  std::string field;
  Tensor t;
  bool have_shape = false, have_dtype = false;
  Dtype dtype = Dtype::f32;
  while (fields >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) fail(ErrorCode::BadHeader, "field '" + field + "'");
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "shape") {
      std::istringstream dims(value);
      std::string d;
      while (std::getline(dims, d, ',')) {
        try {
          const long long v = std::stoll(d);
          if (v < 0) fail(ErrorCode::BadHeader, "negative dimension");
          t.shape.push_back(v);
        } catch (const std::logic_error&) {
          fail(ErrorCode::BadHeader, "dimension '" + d + "'");
        }
      }
      have_shape = !t.shape.empty();
    } else if (key == "dtype") {
      dtype = parse_dtype(value);
      have_dtype = true;
    } else if (key == "order") {
      if (value != "rowmajor") fail(ErrorCode::BadHeader, "order '" + value + "'");
    } else {
      fail(ErrorCode::BadHeader, "unknown key '" + key + "'");
    }
  }
  if (!have_shape || !have_dtype) fail(ErrorCode::BadHeader, "header needs shape= and dtype=");
  if (t.shape.size() > 4) fail(ErrorCode::BadHeader, "rank above 4");

  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = element_count(t.shape) * dtype_size(dtype);
  if (payload.size() != expected) {
    fail(ErrorCode::ShapeMismatch, path.string() + ": payload has " + std::to_string(payload.size()) +
                                       " bytes, header implies " + std::to_string(expected));
  }
  switch (dtype) {
    case Dtype::f32: t.data = decode<float>(payload); break;
    case Dtype::f64: t.data = decode<double>(payload); break;
    case Dtype::i32: t.data = decode<std::int32_t>(payload); break;
    case Dtype::u8: t.data = decode<std::uint8_t>(payload); break;
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  if (tensor.shape.empty() || tensor.shape.size() > 4) fail(ErrorCode::ShapeMismatch, "rank must be 1..4");
  if (element_count(tensor.shape) != tensor.size()) {
    fail(ErrorCode::ShapeMismatch, "data length does not match shape");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << kMagic << "shape=";
  for (std::size_t a = 0; a < tensor.shape.size(); ++a) out << (a ? "," : "") << tensor.shape[a];
  out << " dtype=" << to_string(tensor.dtype()) << " order=rowmajor\n";
  std::visit(
      [&out](auto values) {
        to_little_endian(values);
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(values[0])));
      },
      tensor.data);
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

Tensor make_tensor(std::vector<std::int64_t> shape, Dtype dtype, std::vector<double> values) {
  Tensor t;
  t.shape = std::move(shape);
  auto convert = [&values](auto tag) {
    using T = decltype(tag);
    return std::vector<T>(values.begin(), values.end());
  };
  switch (dtype) {
    case Dtype::f32: t.data = convert(float{}); break;
    case Dtype::f64: t.data = std::move(values); break;
    case Dtype::i32: t.data = convert(std::int32_t{}); break;
    case Dtype::u8: t.data = convert(std::uint8_t{}); break;
  }
  if (element_count(t.shape) != t.size()) fail(ErrorCode::ShapeMismatch, "data length does not match shape");
  return t;
}

Tensor from_matrix(const Matrix& m) { return from_matrix(m, {m.rows(), m.cols()}); }

Tensor from_matrix(const Matrix& m, std::vector<std::int64_t> shape) {
  std::vector<float> values(static_cast<std::size_t>(m.size()));
  std::size_t i = 0;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) values[i++] = static_cast<float>(m(r, c));
  }
  Tensor t{std::move(shape), std::move(values)};
  if (element_count(t.shape) != t.size()) fail(ErrorCode::ShapeMismatch, "matrix size does not match shape");
  return t;
}

Tensor from_masks(const MaskSet& masks) {
  const std::int64_t h = masks.maps.empty() ? 0 : masks.maps[0].rows();
  const std::int64_t w = masks.maps.empty() ? 0 : masks.maps[0].cols();
  std::vector<std::int32_t> values;
  values.reserve(static_cast<std::size_t>(masks.images() * h * w));
  for (const auto& m : masks.maps) {
    if (m.rows() != h || m.cols() != w) fail(ErrorCode::ShapeMismatch, "mask maps differ in size");
    values.insert(values.end(), m.data(), m.data() + m.size());
  }
  return Tensor{{masks.images(), h, w}, std::move(values)};
}

MaskSet to_masks(const Tensor& tensor) {
  if (tensor.shape.size() != 3) fail(ErrorCode::ShapeMismatch, "mask tensor must have rank 3");
  if (tensor.dtype() != Dtype::i32 && tensor.dtype() != Dtype::u8) {
    fail(ErrorCode::UnsupportedDtype, "mask tensor must hold integer labels");
  }
  const auto n = tensor.shape[0], h = tensor.shape[1], w = tensor.shape[2];
  std::vector<LabelMap> maps(static_cast<std::size_t>(n), LabelMap(h, w));
  std::size_t i = 0;
  for (auto& m : maps) {
    for (Index r = 0; r < h; ++r) {
      for (Index c = 0; c < w; ++c) m(r, c) = static_cast<std::int32_t>(tensor.at(i++));
    }
  }
  return MaskSet::with_background_zero(std::move(maps));
}

}  // namespace repreval::io
