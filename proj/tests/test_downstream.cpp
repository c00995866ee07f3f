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


#include "repreval/downstream.hpp"
#include "repreval/error.hpp"
#include "repreval/matching.hpp"
#include "repreval/rng.hpp"
#include "repreval/synthgen.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace repreval;
using namespace repreval::objects;

namespace {

DownstreamConfig small_config() {
  DownstreamConfig c;
  c.predictor.hidden_size = 64;
  c.protocol.learning_rate = 0.003;
  c.protocol.batch_size = 32;
  c.protocol.max_steps = 6000;
  c.protocol.halve_every = 2000;
  c.protocol.min_delta = 1e-4;
  c.train_scenes = 1000;
  c.val_scenes = 100;
  c.test_scenes = 200;
  c.baseline_seeds = 2;
  return c;
}

const synth::Scenes& fixture() {
  static const synth::Scenes s = synth::render_scenes(synth::SceneSpec{}, 1300, 77);
  return s;
}

Representation shuffled_slots(const Representation& r, std::uint64_t seed) {
  Representation out = r;
  CounterRng rng(seed);
  for (Index n = 0; n < r.rows(); ++n) {
    const auto perm = rng.permutation(static_cast<long>(r.slots));
    for (Index k = 0; k < r.slots; ++k) out.data.row(n).segment(k * r.slot_dim, r.slot_dim) = r.slot(n, perm[static_cast<std::size_t>(k)]);
  }
  return out;
}

void check_same_scores(const DownstreamResult& a, const DownstreamResult& b) {
  REQUIRE(a.scores.size() == b.scores.size());
  for (std::size_t i = 0; i < a.scores.size(); ++i) CHECK(a.scores[i].all == b.scores[i].all);
}

}  // namespace

TEST_SUITE("downstream-objects") {

TEST_CASE("scene split shrinks in ratio") {
  DownstreamConfig c;
  const SceneSplit full = split_scenes(c, 20000);
  CHECK(full.train == 10000);
  CHECK(full.val == 1000);
  CHECK(full.test == 2000);
  const SceneSplit half = split_scenes(c, 6500);
  CHECK(half.val == 500);
  CHECK(half.test == 1000);
  CHECK(half.train == 5000);
  CHECK_THROWS_AS(split_scenes(c, 1), Error);
}

TEST_CASE("oracle slots are decoded perfectly") {
  const auto& s = fixture();
  const Representation z = synth::oracle_slots(s.properties, 4);
  const DownstreamResult r = eval_slotted(z, s.properties, small_config(), 3);
  REQUIRE(r.scores.size() == 5);
  for (const auto& p : r.scores) {
    if (p.categorical) {
      CHECK(p.all == 1.0);
    } else {
      CHECK(p.all >= 0.999);
    }
  }
  REQUIRE(r.baseline.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(r.baseline[i].all < r.scores[i].all);

  EvalReport report;
  add_to_report(r, "objects", report);
  CHECK(report.metrics.count("objects.shape") == 1);
  CHECK(report.metrics.count("objects.baseline.x") == 1);
  CHECK(report.metrics.count("objects.test_objects") == 1);
}

TEST_CASE("slot order does not change scores") {
  const auto& s = fixture();
  DownstreamConfig c = small_config();
  c.protocol.max_steps = 500;
  c.baseline = false;
  const Representation z = synth::oracle_slots(s.properties, 4);
  check_same_scores(eval_slotted(z, s.properties, c, 5), eval_slotted(shuffled_slots(z, 9), s.properties, c, 5));
}

TEST_CASE("mask matching on exact masks agrees with loss matching") {
  const auto& s = fixture();
  DownstreamConfig c = small_config();
  c.protocol.max_steps = 500;
  c.baseline = false;
  const Representation z = synth::oracle_slots(s.properties, 4);
  c.matching = Matching::mask;
  // Predicted label k marks slot k; slot k holds object k, ground truth labels it k + 1.
  MaskSet pred = s.masks;
  for (auto& map : pred.maps) map.array() -= 1;
  const DownstreamResult m = eval_slotted(z, s.properties, c, 5, &pred, &s.masks);
  CHECK(m.test_objects > 0);
  for (const auto& p : m.scores) CHECK(p.all > 0.5);
}

TEST_CASE("flat deterministic decoding of sorted properties") {
  const auto& s = fixture();
  // Concatenated objects sorted by the canonical keys, zero padded.
  const Index p = s.properties.property_count();
  Matrix flat = Matrix::Zero(s.properties.scene_count(), 4 * p);
  for (Index n = 0; n < s.properties.scene_count(); ++n) {
    const auto& sc = s.properties.scenes[static_cast<std::size_t>(n)];
    std::vector<Index> vis;
    for (Index m = 0; m < sc.objects(); ++m)
      if (sc.visible[static_cast<std::size_t>(m)]) vis.push_back(m);
    Matrix objs(static_cast<Index>(vis.size()), p);
    for (std::size_t i = 0; i < vis.size(); ++i) objs.row(static_cast<Index>(i)) = sc.values.row(vis[i]);
    const auto a = match::match_deterministic(objs, s.properties.canonical_order, 4);
    for (const auto& [slot, obj] : a.pairs) flat.row(n).segment(slot * p, p) = objs.row(obj);
  }
  DownstreamConfig c = small_config();
  c.matching = Matching::deterministic;
  c.protocol.max_steps = 4000;
  const DownstreamResult det = eval_flat(Representation::flat(flat), 4, s.properties, c, 2);
  for (const auto& q : det.scores) CHECK(q.all >= 0.95);

  // The constant guess beats chance on the most significant key (shape, 3 classes).
  CHECK(det.baseline[0].all > 1.0 / 3.0);

  c.matching = Matching::loss;
  const DownstreamResult loss = eval_flat(Representation::flat(flat), 4, s.properties, c, 2);
  for (std::size_t i = 0; i < loss.scores.size(); ++i) CHECK(loss.scores[i].all >= det.baseline[i].all);
}

TEST_CASE("loss-matched constant beats the unmatched constant") {
  // Three objects per scene: shapes 0, 1, 2 at fixed positions.
  std::vector<std::vector<synth::SceneObject>> objs;
  CounterRng rng(4);
  for (int n = 0; n < 130; ++n) {
    std::vector<synth::SceneObject> scene;
    for (int k = 0; k < 3; ++k)
      scene.push_back({static_cast<synth::Shape>(k), k, 2, 5.0 + 10 * k, 6.0 + 10.0 * static_cast<double>(rng.below(2))});
    objs.push_back(scene);
  }
  const synth::Scenes s = synth::compose_scenes(synth::SceneSpec{}, objs);
  DownstreamConfig c = small_config();
  c.train_scenes = 100;
  c.val_scenes = 10;
  c.test_scenes = 20;
  c.matching = Matching::loss;
  c.protocol.max_steps = 200;
  const Matrix zeros = Matrix::Zero(130, 1);
  const DownstreamResult matched = eval_flat(Representation::flat(zeros), 3, s.properties, c, 1);
  const DownstreamResult unmatched = eval_slotted(Representation::slotted(Matrix::Zero(130, 3), 3, 1), s.properties, c, 1);
  CHECK(matched.baseline[0].all >= unmatched.baseline[0].all);
  CHECK(matched.baseline[3].all >= unmatched.baseline[3].all);
}

TEST_CASE("retraining without a shift reproduces the fresh run") {
  const auto& s = fixture();
  DownstreamConfig c = small_config();
  c.protocol.max_steps = 400;
  c.baseline = false;
  const Representation z = synth::oracle_slots(s.properties, 4);
  const SlottedModel m = train_slotted(z, s.properties, c, 6);
  const ShiftComparison cmp = retrain_after_shift(m, z, s.properties, 6);
  check_same_scores(cmp.zero_shot, cmp.retrained);
  check_same_scores(cmp.retrained, eval_slotted(z, s.properties, c, 6));
}

TEST_CASE("matching names") {
  for (auto m : {Matching::loss, Matching::mask, Matching::deterministic}) CHECK(parse_matching(to_string(m)) == m);
  CHECK_THROWS_AS(parse_matching("greedy"), Error);
}

}  // TEST_SUITE
