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

#include "repreval/error.hpp"
#include "repreval/parallel.hpp"
#include "repreval/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace repreval {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NonFiniteMetric: return "NonFiniteMetric";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptySpace: return "EmptySpace";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::TooManyObjects: return "TooManyObjects";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::SingleFactorSpace: return "SingleFactorSpace";
    case ErrorCode::AllDimsPruned: return "AllDimsPruned";
    case ErrorCode::InsufficientRepetition: return "InsufficientRepetition";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewElements: return "TooFewElements";
    case ErrorCode::NoForegroundPixels: return "NoForegroundPixels";
    case ErrorCode::EmptyUnion: return "EmptyUnion";
    case ErrorCode::NoForegroundMasks: return "NoForegroundMasks";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::NonFiniteCost: return "NonFiniteCost";
    case ErrorCode::InsufficientCardinality: return "InsufficientCardinality";
    case ErrorCode::MissingPredictor: return "MissingPredictor";
    case ErrorCode::NonPositiveBeta: return "NonPositiveBeta";
    case ErrorCode::NegativeCapacity: return "NegativeCapacity";
    case ErrorCode::SingleSample: return "SingleSample";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::TypeError: return "TypeError";
  }
  return "Unknown";
}

namespace {

std::atomic<std::size_t> g_threads{1};

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "core-io", what);
}

}  // namespace

std::size_t thread_count() {
  const std::size_t n = g_threads.load();
  if (n == 0) return std::max(1u, std::thread::hardware_concurrency());
  return n;
}

void set_thread_count(std::size_t n) { g_threads.store(n); }

FactorSpec FactorSpec::categorical(std::string name, int cardinality, bool ood) {
  FactorSpec spec{std::move(name), FactorKind::categorical, {}, ood};
  for (int c = 0; c < cardinality; ++c) spec.grid.push_back(c);
  return spec;
}

FactorSpec FactorSpec::numerical(std::string name, std::vector<double> grid, bool ood) {
  return FactorSpec{std::move(name), FactorKind::numerical, std::move(grid), ood};
}

FactorSpec FactorSpec::linspace(std::string name, double lo, double hi, int count, bool ood) {
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] =
        count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return numerical(std::move(name), std::move(grid), ood);
}

double FactorSpec::normalize(double value) const {
  if (degenerate()) return 0.5;
  return (value - grid_min()) / (grid_max() - grid_min());
}

Index FactorSpec::nearest(double value) const {
  const auto it = std::lower_bound(grid.begin(), grid.end(), value);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return cardinality() - 1;
  const auto hi = static_cast<Index>(it - grid.begin());
  return (value - grid[static_cast<std::size_t>(hi - 1)] <= grid[static_cast<std::size_t>(hi)] - value)
             ? hi - 1
             : hi;
}

void validate(const FactorSpace& space) {
  std::set<std::string> names;
  for (const auto& f : space) {
    if (f.grid.empty()) invalid("factor '" + f.name + "' has an empty grid");
    if (!names.insert(f.name).second) invalid("duplicate factor name '" + f.name + "'");
    if (f.kind == FactorKind::categorical && f.grid.size() < 2) {
      invalid("categorical factor '" + f.name + "' needs cardinality >= 2");
    }
    for (std::size_t i = 1; i < f.grid.size(); ++i) {
      if (!(f.grid[i] > f.grid[i - 1])) invalid("grid of '" + f.name + "' is not strictly increasing");
    }
  }
}

Index factor_index(const FactorSpace& space, const std::string& name) {
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (space[i].name == name) return static_cast<Index>(i);
  }
  invalid("unknown factor '" + name + "'");
}

FactorSpace table31_space() {
  return {
      FactorSpec::linspace("upper_joint", -0.65, 0.65, 30),
      FactorSpec::linspace("middle_joint", -0.5, 0.5, 30),
      FactorSpec::linspace("lower_joint", -0.8, 0.8, 30),
      FactorSpec::linspace("cube_x", -0.11, 0.11, 30),
      FactorSpec::linspace("cube_y", -0.11, 0.11, 30),
      FactorSpec::linspace("cube_rotation", 0.0, 81.0, 10),
      FactorSpec::linspace("cube_hue", 0.0, 330.0, 12, /*ood=*/true),
  };
}

FactorTable FactorTable::from_codes(FactorSpace space, IndexMatrix codes) {
  validate(space);
  if (codes.cols() != static_cast<Index>(space.size())) invalid("code table width does not match factor space");
  if (codes.rows() < 1) invalid("factor table needs at least one row");
  FactorTable t;
  t.values.resize(codes.rows(), codes.cols());
  t.normalized.resize(codes.rows(), codes.cols());
  for (Index f = 0; f < codes.cols(); ++f) {
    const auto& spec = space[static_cast<std::size_t>(f)];
    if (spec.degenerate()) t.flags.insert("degenerate_grid:" + spec.name);
    for (Index n = 0; n < codes.rows(); ++n) {
      const Index c = codes(n, f);
      if (c < 0 || c >= spec.cardinality()) invalid("code out of range for factor '" + spec.name + "'");
      t.values(n, f) = spec.grid[static_cast<std::size_t>(c)];
      t.normalized(n, f) = spec.normalize(t.values(n, f));
    }
  }
  t.space = std::move(space);
  t.codes = std::move(codes);
  return t;
}

FactorTable FactorTable::from_values(FactorSpace space, const Matrix& values) {
  validate(space);
  if (values.cols() != static_cast<Index>(space.size())) invalid("value table width does not match factor space");
  IndexMatrix codes(values.rows(), values.cols());
  for (Index f = 0; f < values.cols(); ++f) {
    for (Index n = 0; n < values.rows(); ++n) {
      if (!std::isfinite(values(n, f))) invalid("non-finite factor value");
      codes(n, f) = space[static_cast<std::size_t>(f)].nearest(values(n, f));
    }
  }
  return from_codes(std::move(space), std::move(codes));
}

Representation Representation::flat(Matrix data) {
  if (!data.allFinite()) invalid("representation has non-finite entries");
  return Representation{std::move(data), 0, 0};
}

Representation Representation::slotted(Matrix data, Index slots, Index slot_dim) {
  if (slots < 1 || slot_dim < 1 || data.cols() != slots * slot_dim) {
    invalid("slotted representation needs D = K*d");
  }
  if (!data.allFinite()) invalid("representation has non-finite entries");
  return Representation{std::move(data), slots, slot_dim};
}

MaskSet MaskSet::with_background_zero(std::vector<LabelMap> maps) {
  std::int32_t top = 0;
  for (const auto& m : maps) {
    if (m.size() == 0) continue;
    if (m.minCoeff() < 0) invalid("negative mask label");
    top = std::max(top, m.maxCoeff());
  }
  MaskSet set;
  set.maps = std::move(maps);
  set.foreground.assign(static_cast<std::size_t>(top) + 1, true);
  set.foreground[0] = false;
  return set;
}

Index PropertyTable::max_objects() const {
  Index m = 0;
  for (const auto& s : scenes) m = std::max(m, s.objects());
  return m;
}

void PropertyTable::validate() const {
  const Index p = property_count();
  std::vector<Index> order = canonical_order;
  std::sort(order.begin(), order.end());
  for (Index i = 0; i < static_cast<Index>(order.size()); ++i) {
    if (order[static_cast<std::size_t>(i)] != i) invalid("canonical order is not a permutation");
  }
  if (static_cast<Index>(order.size()) != p) invalid("canonical order has wrong length");
  if (!ood_property.empty() && static_cast<Index>(ood_property.size()) != p) invalid("ood_property has wrong length");
  for (const auto& s : scenes) {
    if (s.values.cols() != p) invalid("scene property width mismatch");
    if (static_cast<Index>(s.visible.size()) != s.objects() || static_cast<Index>(s.ood.size()) != s.objects()) {
      invalid("scene flag length mismatch");
    }
    for (Index j = 0; j < p; ++j) {
      const auto& spec = properties[static_cast<std::size_t>(j)];
      if (spec.kind != FactorKind::categorical) continue;
      for (Index m = 0; m < s.objects(); ++m) {
        const double v = s.values(m, j);
        if (v < 0 || v >= spec.classes || v != std::floor(v)) invalid("invalid class index in '" + spec.name + "'");
      }
    }
  }
}

}  // namespace repreval
