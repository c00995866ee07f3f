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
#include <map>
#include <string>
#include <vector>

namespace repreval::synth {

/// Allowed grid indices per factor; factors not listed range over the full grid.
using ValueRestrictions = std::map<Index, std::vector<Index>>;

/// Independent uniform draws over each factor's grid (or its restriction).
FactorTable sample_factors(const FactorSpace& space, Index n, std::uint64_t seed,
                           const ValueRestrictions& allowed = {});

enum class MixingMode { identity, permute_monotone, linear_rotation, random_nonlinear, duplicate_dims, drop_dim };

/// "identity", "permute_monotone", "linear_rotation", "random_nonlinear", "duplicate_dims", "drop_dim".
MixingMode parse_mixing(const std::string& text);
std::string to_string(MixingMode mode);

struct MixingSpec {
  MixingMode mode = MixingMode::identity;
  Index extra_dims = 0;     // uniform [0, 1) noise latents appended after the mixed block
  double noise_sigma = 0.0;  // Gaussian noise added to every latent last
  std::uint64_t seed = 0;
  std::vector<Index> permutation;  // permute_monotone: column j encodes factor permutation[j]
  Index target = 0;                // duplicate_dims / drop_dim: affected factor
};

Representation mix(const FactorTable& factors, const MixingSpec& spec);

/// Haar-distributed orthonormal matrix (QR of a Gaussian matrix, signs fixed).
Matrix rotation_matrix(Index dim, std::uint64_t seed);

/// Wraps point representations as diagonal Gaussians with variance sigma^2.
GaussianPosterior make_posteriors(const Representation& repr, double sigma);

enum class Shape { rectangle, disc, triangle };

// Scene objects are squares, discs or triangles with half-extent `size`
// centred on integer pixel corners. Depth order is the object order.
struct SceneObject {
  Shape shape = Shape::rectangle;
  int color = 0;
  double size = 2;
  double x = 0;
  double y = 0;
};

struct SceneSpec {
  Index height = 32;
  Index width = 32;
  Index min_objects = 1;
  Index max_objects = 4;
  Index slots = 4;  // K declared downstream; max_objects must not exceed it
  std::vector<Shape> shapes{Shape::rectangle, Shape::disc, Shape::triangle};
  int colors = 4;
  std::vector<double> sizes{2, 3, 4};
};

struct Scenes {
  MaskSet masks;
  PropertyTable properties;
  std::vector<std::vector<SceneObject>> objects;
};

/// Property columns: shape, color (categorical), size, x, y (normalized).
std::vector<PropertySpec> scene_properties(const SceneSpec& spec);

/// Pixel-centre containment test.
bool covers(const SceneObject& object, double px, double py);

/// Paints objects back to front; object m gets label m + 1, background 0.
LabelMap rasterize(Index height, Index width, const std::vector<SceneObject>& objects);

Scenes render_scenes(const SceneSpec& spec, Index n, std::uint64_t seed);

/// Builds the property table of explicit object lists (visibility taken from rasterization).
Scenes compose_scenes(const SceneSpec& spec, std::vector<std::vector<SceneObject>> objects);

/// Slot k of scene n encodes object k: one-hot categorical properties, then
/// numerical properties clipped to [0, 1]. Slots without an object are zero.
Representation oracle_slots(const PropertyTable& properties, Index slots);

enum class PerturbKind { oversegment, merge, shift, random };

struct Perturbation {
  PerturbKind kind = PerturbKind::oversegment;
  int dx = 0;
  int dy = 0;
  double p = 0.0;
};

MaskSet perturb_masks(const MaskSet& gt, const Perturbation& perturbation, std::uint64_t seed);

}  // namespace repreval::synth
