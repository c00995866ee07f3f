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

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace repreval {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;
using IndexVector = Eigen::Matrix<Index, Eigen::Dynamic, 1>;
using LabelMap = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FactorKind { categorical, numerical };

// One factor of variation. Categorical factors use the grid {0, ..., C-1};
// numerical factors carry their value grid (strictly increasing, in units).
struct FactorSpec {
  std::string name;
  FactorKind kind = FactorKind::numerical;
  std::vector<double> grid;
  bool ood = false;

  static FactorSpec categorical(std::string name, int cardinality, bool ood = false);
  static FactorSpec numerical(std::string name, std::vector<double> grid, bool ood = false);
  static FactorSpec linspace(std::string name, double lo, double hi, int count, bool ood = false);

  Index cardinality() const { return static_cast<Index>(grid.size()); }
  double grid_min() const { return grid.front(); }
  double grid_max() const { return grid.back(); }
  bool degenerate() const { return grid.size() == 1; }
  double normalize(double value) const;
  /// Grid index closest to value (ties to the lower index).
  Index nearest(double value) const;
};

using FactorSpace = std::vector<FactorSpec>;

/// Throws InvalidArgument on duplicate names, empty or non-increasing grids.
void validate(const FactorSpace& space);
Index factor_index(const FactorSpace& space, const std::string& name);

/// The 7-factor robotic-scene space: 30-value joint/position grids, 10 cube
/// rotations in [0, 81] degrees and 12 hues in [0, 330] degrees (hue is OOD).
FactorSpace table31_space();

// Ground-truth factor values. codes holds grid indices, values the grid
// values in units, normalized the [0, 1] rescaling by grid range.
struct FactorTable {
  FactorSpace space;
  IndexMatrix codes;
  Matrix values;
  Matrix normalized;
  std::set<std::string> flags;

  static FactorTable from_codes(FactorSpace space, IndexMatrix codes);
  /// Snaps each value to its nearest grid point.
  static FactorTable from_values(FactorSpace space, const Matrix& values);

  Index rows() const { return codes.rows(); }
  Index factors() const { return codes.cols(); }
};

// Per-sample latent vectors. Slot-structured data stores slot k of row n in
// columns [k*slot_dim, (k+1)*slot_dim).
struct Representation {
  Matrix data;
  Index slots = 0;
  Index slot_dim = 0;

  static Representation flat(Matrix data);
  static Representation slotted(Matrix data, Index slots, Index slot_dim);

  bool is_slotted() const { return slots > 0; }
  Index rows() const { return data.rows(); }
  Index dims() const { return data.cols(); }
  auto slot(Index row, Index k) const { return data.row(row).segment(k * slot_dim, slot_dim); }
};

// Diagonal Gaussian moments per sample.
struct GaussianPosterior {
  Matrix mean;
  Matrix log_var;

  Index rows() const { return mean.rows(); }
  Index dims() const { return mean.cols(); }
  Matrix variance() const { return log_var.array().exp().matrix(); }
};

// Integer segmentation maps; label l is foreground iff foreground[l].
struct MaskSet {
  std::vector<LabelMap> maps;
  std::vector<bool> foreground;

  Index images() const { return static_cast<Index>(maps.size()); }
  Index labels() const { return static_cast<Index>(foreground.size()); }
  /// Labels 0 .. max_label found in the maps; label 0 background, others foreground.
  static MaskSet with_background_zero(std::vector<LabelMap> maps);
};

struct PropertySpec {
  std::string name;
  FactorKind kind = FactorKind::numerical;
  int classes = 0;  // categorical only
};

// Per-scene object properties. Numerical entries are stored normalized to
// [0, 1] over the generating grid; categorical entries are class indices.
struct PropertyTable {
  struct Scene {
    Matrix values;               // objects x properties
    std::vector<bool> visible;   // false when fully occluded
    std::vector<bool> ood;       // object-level distribution shift
    Index objects() const { return values.rows(); }
  };

  std::vector<PropertySpec> properties;
  std::vector<Index> canonical_order;  // sort-key priority, most significant first
  std::vector<bool> ood_property;      // properties that are OOD for OOD objects
  std::vector<Scene> scenes;

  Index scene_count() const { return static_cast<Index>(scenes.size()); }
  Index property_count() const { return static_cast<Index>(properties.size()); }
  Index max_objects() const;
  /// Throws InvalidArgument when class indices are out of range or the
  /// canonical order is not a permutation.
  void validate() const;
};

struct EvalReport {
  std::string version = "0.1.0";
  std::string config_digest;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  std::map<std::string, std::map<std::string, double>> per_factor;
  std::map<std::string, double> timings;
  std::map<std::string, std::string> config;
  std::set<std::string> flags;
};

}  // namespace repreval
