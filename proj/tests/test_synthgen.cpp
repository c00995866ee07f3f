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
#include "repreval/infotheory.hpp"
#include "repreval/synthgen.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace repreval;
using namespace repreval::synth;

namespace {

// Average ranks (ties share their mean rank).
Vector ranks(const Vector& v) {
  std::vector<Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) < v(b); });
  Vector r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v(order[j + 1]) == v(order[i])) ++j;
    const double mean = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r(order[k]) = mean;
    i = j + 1;
  }
  return r;
}

double spearman(const Vector& a, const Vector& b) {
  const Vector ra = ranks(a), rb = ranks(b);
  const Vector ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

// Upper 0.001 tail of chi-square for the degrees of freedom used below.
double chi2_critical_0001(Index df) {
  switch (df) {
    case 9: return 27.877;
    case 11: return 31.264;
    case 29: return 58.301;
    default: FAIL("no critical value tabulated"); return 0;
  }
}

Index count_labels(const LabelMap& m) {
  std::set<std::int32_t> s(m.data(), m.data() + m.size());
  return static_cast<Index>(s.size());
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("the robotic space has 2,916,000,000 combinations") {
  const FactorSpace space = table31_space();
  REQUIRE(space.size() == 7);
  std::uint64_t combos = 1;
  for (const auto& f : space) combos *= static_cast<std::uint64_t>(f.cardinality());
  CHECK(combos == 2916000000ULL);
  CHECK(space[6].name == "cube_hue");
  CHECK(space[6].ood);
  CHECK(space[6].grid.front() == 0.0);
  CHECK(space[6].grid.back() == 330.0);
  CHECK(space[5].grid.back() == 81.0);
}

TEST_CASE("single binary factor draw is reproducible") {
  const FactorSpace space{FactorSpec::categorical("b", 2)};
  const FactorTable a = sample_factors(space, 1, 42), b = sample_factors(space, 1, 42);
  CHECK(a.codes == b.codes);
  CHECK(a.rows() == 1);
}

TEST_CASE("changing the seed changes the draw") {
  const FactorTable a = sample_factors(table31_space(), 100, 1), b = sample_factors(table31_space(), 100, 2);
  CHECK(a.codes != b.codes);
}

TEST_CASE("per-factor draws pass a chi-square uniformity test") {
  const FactorSpace space = table31_space();
  const Index n = 100000;
  const FactorTable t = sample_factors(space, n, 2024);
  for (Index f = 0; f < t.factors(); ++f) {
    const Index k = space[static_cast<std::size_t>(f)].cardinality();
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Index i = 0; i < n; ++i) counts[static_cast<std::size_t>(t.codes(i, f))] += 1;
    const double expected = static_cast<double>(n) / static_cast<double>(k);
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < chi2_critical_0001(k - 1));
  }
}

TEST_CASE("value restrictions confine the draw") {
  const FactorSpace space = table31_space();
  const FactorTable t = sample_factors(space, 500, 3, {{6, {1, 2, 3, 8}}});
  for (Index i = 0; i < t.rows(); ++i) {
    const Index c = t.codes(i, 6);
    CHECK((c == 1 || c == 2 || c == 3 || c == 8));
  }
}

TEST_CASE("identity mixing returns the normalized factors exactly") {
  const FactorTable t = sample_factors(table31_space(), 300, 8);
  const Representation z = mix(t, MixingSpec{});
  CHECK(repreval::testing::bit_equal(z.data, t.normalized));
}

TEST_CASE("monotone permutation keeps rank order per matched pair") {
  const FactorSpace space{FactorSpec::linspace("a", 0, 1, 30), FactorSpec::linspace("b", 0, 1, 30),
                          FactorSpec::linspace("c", 0, 1, 30)};
  const FactorTable t = sample_factors(space, 2000, 4);
  MixingSpec spec;
  spec.mode = MixingMode::permute_monotone;
  spec.permutation = {2, 0, 1};
  spec.seed = 5;
  const Representation z = mix(t, spec);
  for (Index j = 0; j < 3; ++j) {
    CHECK(std::abs(spearman(z.data.col(j), t.normalized.col(spec.permutation[static_cast<std::size_t>(j)]))) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rotation preserves row norms") {
  const FactorTable t = sample_factors(table31_space(), 500, 9);
  MixingSpec spec;
  spec.mode = MixingMode::linear_rotation;
  spec.seed = 3;
  const Representation z = mix(t, spec);
  for (Index i = 0; i < t.rows(); ++i) CHECK(std::abs(z.data.row(i).norm() - t.normalized.row(i).norm()) < 1e-9);
  const Matrix q = rotation_matrix(7, 3);
  CHECK((q.transpose() * q - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("duplicate, drop and extra dims shape the output") {
  const FactorTable t = sample_factors(table31_space(), 50, 1);
  MixingSpec spec;
  spec.mode = MixingMode::duplicate_dims;
  spec.target = 2;
  Representation z = mix(t, spec);
  CHECK(z.dims() == 8);
  CHECK(z.data.col(7) == t.normalized.col(2));
  spec.mode = MixingMode::drop_dim;
  CHECK(mix(t, spec).dims() == 6);
  spec.mode = MixingMode::identity;
  spec.extra_dims = 3;
  CHECK(mix(t, spec).dims() == 10);
  spec.mode = MixingMode::random_nonlinear;
  spec.extra_dims = 0;
  CHECK(mix(t, spec).data.allFinite());
  CHECK(parse_mixing("linear_rotation") == MixingMode::linear_rotation);
  CHECK_THROWS_AS(parse_mixing("swirl"), Error);
}

TEST_CASE("posterior wrapping") {
  const Representation z = Representation::flat(Matrix::Random(4, 3));
  const GaussianPosterior p1 = make_posteriors(z, 1.0);
  CHECK(p1.log_var.isZero(0));
  const GaussianPosterior p5 = make_posteriors(z, 0.5);
  CHECK((p5.variance().array() - 0.25).abs().maxCoeff() < 1e-15);
  CHECK(info::gaussian_kl(p5.mean.row(0).array(), p5.variance().row(0).array(), p5.mean.row(0).array(),
                          p5.variance().row(0).array()) == 0.0);
  CHECK_THROWS_AS(make_posteriors(z, 0.0), Error);
}

TEST_CASE("a lone disc covers the lattice points inside its radius") {
  SceneSpec spec;
  for (double r : {2.0, 3.0, 4.0}) {
    const SceneObject disc{Shape::disc, 0, r, 16, 16};
    const Scenes s = compose_scenes(spec, {{disc}});
    const LabelMap& m = s.masks.maps[0];
    CHECK(count_labels(m) == 2);
    Index expected = 0;
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) {
        const double dx = i + 0.5 - 16, dy = j + 0.5 - 16;
        if (dx * dx + dy * dy <= r * r) ++expected;
      }
    CHECK((m.array() == 1).count() == expected);
  }
  CHECK((compose_scenes(spec, {{SceneObject{Shape::disc, 0, 3, 16, 16}}}).masks.maps[0].array() == 1).count() == 32);
  CHECK((compose_scenes(spec, {{SceneObject{Shape::disc, 0, 2, 16, 16}}}).masks.maps[0].array() == 1).count() == 12);
}

TEST_CASE("zero objects give background-only scenes") {
  SceneSpec spec;
  spec.min_objects = 0;
  spec.max_objects = 0;
  const Scenes s = render_scenes(spec, 5, 1);
  for (const auto& m : s.masks.maps) CHECK((m.array() == 0).all());
  for (const auto& sc : s.properties.scenes) CHECK(sc.objects() == 0);
}

TEST_CASE("fully covered objects are invisible") {
  const SceneObject a{Shape::rectangle, 1, 3, 10, 10};
  const Scenes s = compose_scenes(SceneSpec{}, {{a, a}});
  const auto& scene = s.properties.scenes[0];
  CHECK_FALSE(scene.visible[0]);
  CHECK(scene.visible[1]);
}

TEST_CASE("rendered masks tile the image with declared labels") {
  const Scenes s = render_scenes(SceneSpec{}, 40, 6);
  for (std::size_t i = 0; i < s.masks.maps.size(); ++i) {
    const auto& m = s.masks.maps[i];
    CHECK(m.minCoeff() >= 0);
    CHECK(m.maxCoeff() < s.masks.labels());
    const auto& sc = s.properties.scenes[i];
    for (Index o = 0; o < sc.objects(); ++o) {
      const bool seen = (m.array() == static_cast<std::int32_t>(o + 1)).any();
      CHECK(seen == sc.visible[static_cast<std::size_t>(o)]);
    }
  }
  CHECK_FALSE(s.masks.foreground[0]);
  const Scenes again = render_scenes(SceneSpec{}, 40, 6);
  for (std::size_t i = 0; i < s.masks.maps.size(); ++i) CHECK(again.masks.maps[i] == s.masks.maps[i]);
}

TEST_CASE("oversegmenting a 4-pixel-wide rectangle halves it") {
  const Scenes s = compose_scenes(SceneSpec{}, {{SceneObject{Shape::rectangle, 0, 2, 8, 8}}});
  const MaskSet over = perturb_masks(s.masks, {PerturbKind::oversegment}, 0);
  const auto& m = over.maps[0];
  const Index a = (m.array() == 1).count(), b = (m.array() > 1).count();
  CHECK(a == 8);
  CHECK(b == 8);
}

TEST_CASE("identity perturbations") {
  const Scenes s = render_scenes(SceneSpec{}, 4, 2);
  const MaskSet shifted = perturb_masks(s.masks, {PerturbKind::shift, 0, 0}, 0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(shifted.maps[i] == s.masks.maps[i]);
  MaskSet one;
  one.maps = {LabelMap::Zero(5, 5)};
  one.foreground = {false};
  const MaskSet r = perturb_masks(one, {PerturbKind::random, 0, 0, 1.0}, 3);
  CHECK(r.maps[0] == one.maps[0]);
}

TEST_CASE("oracle slots encode each object's properties") {
  SceneSpec spec;
  const SceneObject o{Shape::disc, 2, 3, 10, 20};
  const Scenes s = compose_scenes(spec, {{o}});
  const Representation z = oracle_slots(s.properties, 4);
  REQUIRE(z.slots == 4);
  REQUIRE(z.slot_dim == 3 + spec.colors + 3);
  const auto slot = z.slot(0, 0);
  CHECK(slot(1) == 1.0);
  CHECK(slot(3 + 2) == 1.0);
  CHECK(slot.sum() == doctest::Approx(2.0 + s.properties.scenes[0].values.row(0).tail(3).sum()));
  CHECK(z.slot(0, 1).isZero(0));
}

}  // TEST_SUITE
