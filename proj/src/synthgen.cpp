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

#include "repreval/synthgen.hpp"

#include "repreval/error.hpp"
#include "repreval/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace repreval::synth {

namespace {

constexpr const char* kModule = "synthgen";

[[noreturn]] void fail(ErrorCode code, const std::string& what) { throw Error(code, kModule, what); }

double position_lo(const SceneSpec& spec) { return *std::max_element(spec.sizes.begin(), spec.sizes.end()); }
double position_hi(const SceneSpec& spec, Index extent) { return static_cast<double>(extent) - position_lo(spec); }

double normalize(double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }

}  // namespace

FactorTable sample_factors(const FactorSpace& space, Index n, std::uint64_t seed, const ValueRestrictions& allowed) {
  if (space.empty()) fail(ErrorCode::EmptySpace, "factor space has no factors");
  if (n < 1) fail(ErrorCode::InvalidArgument, "n must be >= 1");
  validate(space);
  const auto f_count = static_cast<Index>(space.size());
  std::vector<std::vector<Index>> choices(space.size());
  for (Index f = 0; f < f_count; ++f) {
    auto& c = choices[static_cast<std::size_t>(f)];
    if (const auto it = allowed.find(f); it != allowed.end()) {
      c = it->second;
      if (c.empty()) fail(ErrorCode::InvalidArgument, "empty value restriction for '" + space[static_cast<std::size_t>(f)].name + "'");
      for (Index v : c) {
        if (v < 0 || v >= space[static_cast<std::size_t>(f)].cardinality()) fail(ErrorCode::InvalidArgument, "restriction outside grid");
      }
    } else {
      for (Index v = 0; v < space[static_cast<std::size_t>(f)].cardinality(); ++v) c.push_back(v);
    }
  }
  IndexMatrix codes(n, f_count);
  for (Index f = 0; f < f_count; ++f) {
    CounterRng rng(seed, static_cast<std::uint64_t>(f));
    const auto& c = choices[static_cast<std::size_t>(f)];
    for (Index i = 0; i < n; ++i) codes(i, f) = c[rng.below(c.size())];
  }
  return FactorTable::from_codes(space, std::move(codes));
}

Matrix rotation_matrix(Index dim, std::uint64_t seed) {
  CounterRng rng(seed, 0x71);
  Matrix g(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

namespace {
const std::array<std::pair<MixingMode, const char*>, 6> kMixingNames{{
    {MixingMode::identity, "identity"},
    {MixingMode::permute_monotone, "permute_monotone"},
    {MixingMode::linear_rotation, "linear_rotation"},
    {MixingMode::random_nonlinear, "random_nonlinear"},
    {MixingMode::duplicate_dims, "duplicate_dims"},
    {MixingMode::drop_dim, "drop_dim"},
}};
}  // namespace

MixingMode parse_mixing(const std::string& text) {
  for (const auto& [mode, name] : kMixingNames)
    if (text == name) return mode;
  fail(ErrorCode::InvalidArgument, "unknown mixing mode '" + text + "'");
}

std::string to_string(MixingMode mode) {
  for (const auto& [m, name] : kMixingNames)
    if (m == mode) return name;
  return "identity";
}

Representation mix(const FactorTable& factors, const MixingSpec& spec) {
  const Matrix& g = factors.normalized;
  const Index n = g.rows();
  const Index f = g.cols();
  if (spec.extra_dims < 0 || spec.noise_sigma < 0) fail(ErrorCode::InvalidArgument, "negative extra_dims or noise_sigma");
  CounterRng rng(spec.seed, 0x6d6978);
  Matrix z;
  switch (spec.mode) {
    case MixingMode::identity:
      z = g;
      break;
    case MixingMode::permute_monotone: {
      std::vector<Index> perm = spec.permutation;
      if (perm.empty()) {
        for (long p : rng.permutation(f)) perm.push_back(p);
      }
      if (static_cast<Index>(perm.size()) != f) fail(ErrorCode::DimMismatch, "permutation length differs from factor count");
      std::vector<Index> sorted = perm;
      std::sort(sorted.begin(), sorted.end());
      for (Index i = 0; i < f; ++i) {
        if (sorted[static_cast<std::size_t>(i)] != i) fail(ErrorCode::DimMismatch, "not a permutation");
      }
      z.resize(n, f);
      for (Index j = 0; j < f; ++j) {
        // h(x) = expm1(a x) / expm1(a), strictly increasing on [0, 1].
        const double a = rng.uniform(0.5, 3.0);
        const double denom = std::expm1(a);
        for (Index i = 0; i < n; ++i) z(i, j) = std::expm1(a * g(i, perm[static_cast<std::size_t>(j)])) / denom;
      }
      break;
    }
    case MixingMode::linear_rotation:
      z = g * rotation_matrix(f, spec.seed).transpose();
      break;
    case MixingMode::random_nonlinear: {
      const Index width = 4 * f;
      Matrix w1(f, width), w2(width, f);
      Vector b1(width);
      for (Index i = 0; i < w1.size(); ++i) w1.data()[i] = rng.normal() * std::sqrt(4.0 / static_cast<double>(f));
      for (Index i = 0; i < width; ++i) b1(i) = rng.normal() * 0.5;
      for (Index i = 0; i < w2.size(); ++i) w2.data()[i] = rng.normal() / std::sqrt(static_cast<double>(width));
      const Matrix pre = ((g.array() - 0.5).matrix() * w1).rowwise() + b1.transpose();
      z = pre.array().tanh().matrix() * w2;
      break;
    }
    case MixingMode::duplicate_dims:
      if (spec.target < 0 || spec.target >= f) fail(ErrorCode::DimMismatch, "duplicate target outside factor range");
      z.resize(n, f + 1);
      z.leftCols(f) = g;
      z.col(f) = g.col(spec.target);
      break;
    case MixingMode::drop_dim:
      if (f < 2) fail(ErrorCode::DimMismatch, "drop_dim needs at least two factors");
      if (spec.target < 0 || spec.target >= f) fail(ErrorCode::DimMismatch, "drop target outside factor range");
      z.resize(n, f - 1);
      for (Index j = 0, out = 0; j < f; ++j) {
        if (j != spec.target) z.col(out++) = g.col(j);
      }
      break;
  }
  if (spec.extra_dims > 0) {
    Matrix wide(n, z.cols() + spec.extra_dims);
    wide.leftCols(z.cols()) = z;
    for (Index j = z.cols(); j < wide.cols(); ++j) {
      for (Index i = 0; i < n; ++i) wide(i, j) = rng.uniform();
    }
    z = std::move(wide);
  }
  if (spec.noise_sigma > 0) {
    CounterRng noise(spec.seed, 0x6e6f6973);
    for (Index j = 0; j < z.cols(); ++j) {
      for (Index i = 0; i < n; ++i) z(i, j) += spec.noise_sigma * noise.normal();
    }
  }
  return Representation::flat(std::move(z));
}

GaussianPosterior make_posteriors(const Representation& repr, double sigma) {
  if (!(sigma > 0)) fail(ErrorCode::NonPositiveSigma, "sigma must be positive");
  GaussianPosterior post;
  post.mean = repr.data;
  post.log_var = Matrix::Constant(repr.rows(), repr.dims(), 2.0 * std::log(sigma));
  return post;
}

bool covers(const SceneObject& o, double px, double py) {
  const double dx = px - o.x, dy = py - o.y, s = o.size;
  switch (o.shape) {
    case Shape::rectangle:
      return std::abs(dx) < s && std::abs(dy) < s;
    case Shape::disc:
      return dx * dx + dy * dy <= s * s;
    case Shape::triangle: {
      // Apex (x, y - s), base corners (x - s, y + s) and (x + s, y + s).
      if (dy > s) return false;
      const double half_width = (dy + s) / 2.0;
      return dy >= -s && std::abs(dx) <= half_width;
    }
  }
  return false;
}

LabelMap rasterize(Index height, Index width, const std::vector<SceneObject>& objects) {
  LabelMap map = LabelMap::Zero(height, width);
  for (std::size_t m = 0; m < objects.size(); ++m) {
    const auto& o = objects[m];
    const auto r0 = std::max<Index>(0, static_cast<Index>(std::floor(o.y - o.size)) - 1);
    const auto r1 = std::min<Index>(height, static_cast<Index>(std::ceil(o.y + o.size)) + 1);
    const auto c0 = std::max<Index>(0, static_cast<Index>(std::floor(o.x - o.size)) - 1);
    const auto c1 = std::min<Index>(width, static_cast<Index>(std::ceil(o.x + o.size)) + 1);
    for (Index r = r0; r < r1; ++r) {
      for (Index c = c0; c < c1; ++c) {
        if (covers(o, static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5)) {
          map(r, c) = static_cast<std::int32_t>(m + 1);
        }
      }
    }
  }
  return map;
}

std::vector<PropertySpec> scene_properties(const SceneSpec& spec) {
  return {
      {"shape", FactorKind::categorical, 3},
      {"color", FactorKind::categorical, spec.colors},
      {"size", FactorKind::numerical, 0},
      {"x", FactorKind::numerical, 0},
      {"y", FactorKind::numerical, 0},
  };
}

Representation oracle_slots(const PropertyTable& properties, Index slots) {
  if (properties.max_objects() > slots) fail(ErrorCode::TooManyObjects, "more objects than slots");
  Index width = 0;
  for (const auto& p : properties.properties) width += p.kind == FactorKind::categorical ? p.classes : 1;
  Matrix data = Matrix::Zero(properties.scene_count(), slots * width);
  for (Index n = 0; n < properties.scene_count(); ++n) {
    const auto& scene = properties.scenes[static_cast<std::size_t>(n)];
    for (Index m = 0; m < scene.objects(); ++m) {
      Index at = m * width;
      for (Index j = 0; j < properties.property_count(); ++j) {
        const auto& p = properties.properties[static_cast<std::size_t>(j)];
        if (p.kind == FactorKind::categorical) {
          data(n, at + static_cast<Index>(scene.values(m, j))) = 1.0;
          at += p.classes;
        } else {
          data(n, at++) = std::clamp(scene.values(m, j), 0.0, 1.0);
        }
      }
    }
  }
  return Representation::slotted(std::move(data), slots, width);
}

Scenes compose_scenes(const SceneSpec& spec, std::vector<std::vector<SceneObject>> objects) {
  if (spec.sizes.empty() || spec.shapes.empty() || spec.colors < 1) fail(ErrorCode::InvalidArgument, "empty scene vocabulary");
  const double size_lo = *std::min_element(spec.sizes.begin(), spec.sizes.end());
  const double size_hi = *std::max_element(spec.sizes.begin(), spec.sizes.end());
  Scenes out;
  out.properties.properties = scene_properties(spec);
  out.properties.canonical_order = {0, 1, 2, 3, 4};
  out.properties.ood_property.assign(5, false);
  std::vector<LabelMap> maps;
  for (const auto& scene_objects : objects) {
    if (static_cast<Index>(scene_objects.size()) > spec.slots) {
      fail(ErrorCode::TooManyObjects, "scene has more objects than declared slots");
    }
    LabelMap map = rasterize(spec.height, spec.width, scene_objects);
    PropertyTable::Scene scene;
    const auto m = static_cast<Index>(scene_objects.size());
    scene.values.resize(m, 5);
    std::vector<bool> seen(scene_objects.size(), false);
    for (Index i = 0; i < map.size(); ++i) {
      if (map.data()[i] > 0) seen[static_cast<std::size_t>(map.data()[i] - 1)] = true;
    }
    for (Index o = 0; o < m; ++o) {
      const auto& obj = scene_objects[static_cast<std::size_t>(o)];
      scene.values(o, 0) = static_cast<double>(obj.shape);
      scene.values(o, 1) = obj.color;
      scene.values(o, 2) = normalize(obj.size, size_lo, size_hi);
      scene.values(o, 3) = normalize(obj.x, position_lo(spec), position_hi(spec, spec.width));
      scene.values(o, 4) = normalize(obj.y, position_lo(spec), position_hi(spec, spec.height));
      scene.visible.push_back(seen[static_cast<std::size_t>(o)]);
      scene.ood.push_back(false);
    }
    out.properties.scenes.push_back(std::move(scene));
    maps.push_back(std::move(map));
  }
  out.masks.maps = std::move(maps);
  out.masks.foreground.assign(static_cast<std::size_t>(spec.slots) + 1, true);
  out.masks.foreground[0] = false;
  out.objects = std::move(objects);
  return out;
}

Scenes render_scenes(const SceneSpec& spec, Index n, std::uint64_t seed) {
  if (spec.min_objects < 0 || spec.min_objects > spec.max_objects) fail(ErrorCode::InvalidArgument, "bad object count range");
  if (spec.max_objects > spec.slots) fail(ErrorCode::TooManyObjects, "max_objects exceeds declared slots");
  if (spec.sizes.empty() || spec.shapes.empty()) fail(ErrorCode::InvalidArgument, "empty scene vocabulary");
  const auto lo = static_cast<Index>(position_lo(spec));
  const auto hi_x = static_cast<Index>(position_hi(spec, spec.width));
  const auto hi_y = static_cast<Index>(position_hi(spec, spec.height));
  if (hi_x < lo || hi_y < lo) fail(ErrorCode::InvalidArgument, "objects do not fit in the grid");
  CounterRng rng(seed, 0x7363656e);
  std::vector<std::vector<SceneObject>> objects(static_cast<std::size_t>(n));
  for (auto& scene : objects) {
    const auto count = spec.min_objects + static_cast<Index>(rng.below(static_cast<std::uint64_t>(spec.max_objects - spec.min_objects + 1)));
    for (Index m = 0; m < count; ++m) {
      SceneObject o;
      o.shape = spec.shapes[rng.below(spec.shapes.size())];
      o.color = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.colors)));
      o.size = spec.sizes[rng.below(spec.sizes.size())];
      o.x = static_cast<double>(lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(hi_x - lo + 1))));
      o.y = static_cast<double>(lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(hi_y - lo + 1))));
      scene.push_back(o);
    }
  }
  return compose_scenes(spec, std::move(objects));
}

MaskSet perturb_masks(const MaskSet& gt, const Perturbation& perturbation, std::uint64_t seed) {
  MaskSet out = gt;
  const auto labels = static_cast<std::int32_t>(gt.labels());
  switch (perturbation.kind) {
    case PerturbKind::oversegment: {
      // Foreground label l gains a partner label labels + rank(l) for its right half.
      std::vector<std::int32_t> partner(static_cast<std::size_t>(labels), -1);
      std::int32_t next = labels;
      for (std::int32_t l = 0; l < labels; ++l) {
        if (gt.foreground[static_cast<std::size_t>(l)]) partner[static_cast<std::size_t>(l)] = next++;
      }
      out.foreground.resize(static_cast<std::size_t>(next), true);
      for (auto& map : out.maps) {
        std::vector<Index> c0(static_cast<std::size_t>(labels), map.cols()), c1(static_cast<std::size_t>(labels), -1);
        for (Index r = 0; r < map.rows(); ++r) {
          for (Index c = 0; c < map.cols(); ++c) {
            const auto l = static_cast<std::size_t>(map(r, c));
            c0[l] = std::min(c0[l], c);
            c1[l] = std::max(c1[l], c);
          }
        }
        for (Index r = 0; r < map.rows(); ++r) {
          for (Index c = 0; c < map.cols(); ++c) {
            const auto l = static_cast<std::size_t>(map(r, c));
            if (partner[l] < 0) continue;
            const Index width = c1[l] - c0[l] + 1;
            if (c >= c0[l] + std::max<Index>(1, width / 2)) map(r, c) = partner[l];
          }
        }
      }
      break;
    }
    case PerturbKind::merge:
      for (auto& map : out.maps) {
        for (Index i = 0; i < map.size(); ++i) {
          map.data()[i] = gt.foreground[static_cast<std::size_t>(map.data()[i])] ? 1 : 0;
        }
      }
      out.foreground = {false, true};
      break;
    case PerturbKind::shift:
      for (std::size_t k = 0; k < out.maps.size(); ++k) {
        const auto& src = gt.maps[k];
        auto& dst = out.maps[k];
        dst.setZero();
        for (Index r = 0; r < src.rows(); ++r) {
          for (Index c = 0; c < src.cols(); ++c) {
            const Index sr = r - perturbation.dy, sc = c - perturbation.dx;
            if (sr >= 0 && sr < src.rows() && sc >= 0 && sc < src.cols()) dst(r, c) = src(sr, sc);
          }
        }
      }
      break;
    case PerturbKind::random: {
      CounterRng rng(seed, 0x72616e64);
      for (auto& map : out.maps) {
        for (Index i = 0; i < map.size(); ++i) {
          if (rng.uniform() < perturbation.p) map.data()[i] = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(labels)));
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace repreval::synth
