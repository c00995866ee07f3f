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
#include "repreval/ood_protocol.hpp"
#include "repreval/rng.hpp"
#include "repreval/synthgen.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace repreval;
using namespace repreval::ood;

namespace {

std::vector<double> values_of(const FactorSpec& f, const std::vector<Index>& idx) {
  std::vector<double> v;
  for (Index i : idx) v.push_back(f.grid[static_cast<std::size_t>(i)]);
  return v;
}

FactorSpace eight_values() {
  return {FactorSpec::linspace("a", 0, 1, 10), FactorSpec::linspace("b", 0, 1, 10), FactorSpec::linspace("o", 0, 7, 8)};
}

OodConfig small_config() {
  OodConfig c;
  c.train_rows = 2000;
  c.eval_rows = 1000;
  c.predictor.hidden_size = 32;
  c.protocol.learning_rate = 0.005;
  c.protocol.max_steps = 3000;
  return c;
}

ReprProvider identity_encoder(double noise) {
  return [noise](const FactorTable& t) {
    synth::MixingSpec spec;
    spec.noise_sigma = noise;
    spec.seed = static_cast<std::uint64_t>(t.rows());
    return synth::mix(t, spec).data;
  };
}

}  // namespace

TEST_SUITE("ood-protocol") {

TEST_CASE("hue grid OOD2 holds out 30, 60, 90 and 240 degrees") {
  const FactorSpace space = table31_space();
  const SplitPlan p = build_split(space, "cube_hue", Scenario::ood2, 0);
  const auto& hue = space[6];
  CHECK(values_of(hue, p.eval) == std::vector<double>{30, 60, 90, 240});
  CHECK(values_of(hue, p.repr_train) == std::vector<double>{0, 120, 150, 180, 210, 270, 300, 330});
  CHECK(p.downstream_train == p.repr_train);
}

TEST_CASE("OOD1-B and OOD1-C on eight sorted values") {
  const FactorSpace space = eight_values();
  const SplitPlan b = build_split(space, "o", Scenario::ood1_b, 0);
  CHECK(b.downstream_train == std::vector<Index>{4, 5, 6, 7});
  CHECK(b.eval == std::vector<Index>{0, 1, 2, 3});
  const SplitPlan c = build_split(space, "o", Scenario::ood1_c, 0);
  CHECK(c.downstream_train == std::vector<Index>{0, 2, 4, 6});
  CHECK(c.eval == std::vector<Index>{1, 3, 5, 7});
  const SplitPlan a = build_split(space, "o", Scenario::ood1_a, 0);
  CHECK(a.downstream_train.size() == 1);
  CHECK(a.eval.size() == 7);
  const SplitPlan id = build_split(space, "o", Scenario::in_distribution, 0);
  CHECK(id.eval == id.downstream_train);
}

TEST_CASE("every plan satisfies its set algebra") {
  const FactorSpace space = table31_space();
  for (const auto& name : {"cube_hue", "cube_rotation", "cube_x"})
    for (auto s : {Scenario::ood1_a, Scenario::ood1_b, Scenario::ood1_c, Scenario::ood2, Scenario::in_distribution}) {
      const SplitPlan p = build_split(space, name, s, 3);
      CHECK_NOTHROW(p.check());
      const auto& r = p.repr_train;
      if (s == Scenario::ood2) {
        for (Index v : p.eval) CHECK(std::find(r.begin(), r.end(), v) == r.end());
      } else {
        for (Index v : p.eval) CHECK(std::find(r.begin(), r.end(), v) != r.end());
        for (Index v : p.downstream_train) CHECK(std::find(r.begin(), r.end(), v) != r.end());
      }
      CHECK(parse_scenario(to_string(s)) == s);
    }
  const FactorSpace tiny{FactorSpec::linspace("a", 0, 1, 3), FactorSpec::linspace("b", 0, 1, 3)};
  CHECK_THROWS_AS(build_split(tiny, "a", Scenario::ood1_b, 0), Error);
}

TEST_CASE("transfer of perfect and constant-midpoint predictions") {
  const FactorSpace space{FactorSpec::linspace("a", 0, 1, 10001), FactorSpec::linspace("b", 0, 1, 10001),
                          FactorSpec::linspace("o", 0, 1, 5)};
  const FactorTable t = synth::sample_factors(space, 10000, 4);
  CHECK(transfer_from_predictions(t.normalized, t, 2) == 0.0);
  std::vector<double> per;
  const double mid = transfer_from_predictions(Matrix::Constant(t.rows(), 3, 0.5), t, 2, &per);
  CHECK(std::abs(mid - 0.25) <= 0.01);
  CHECK(per.size() == 3);

  // Invariant to factor order.
  const FactorSpace swapped{space[1], space[0], space[2]};
  IndexMatrix codes(t.rows(), 3);
  codes << t.codes.col(1), t.codes.col(0), t.codes.col(2);
  const FactorTable u = FactorTable::from_codes(swapped, codes);
  Matrix pred = Matrix::Constant(t.rows(), 3, 0.3);
  pred.col(0).setConstant(0.6);
  Matrix pred_u(t.rows(), 3);
  pred_u << pred.col(1), pred.col(0), pred.col(2);
  CHECK(std::abs(transfer_from_predictions(pred, t, 2) - transfer_from_predictions(pred_u, u, 2)) < 1e-15);
}

TEST_CASE("generalization score is the negated transfer") {
  CHECK(generalization_score(0.0) == 0.0);
  CHECK(generalization_score(0.25) == -0.25);
  CHECK(generalization_score(0.1) > generalization_score(0.2));
}

TEST_CASE("missing predictors are reported") {
  const FactorSpace space = eight_values();
  const FactorTable t = synth::sample_factors(space, 10, 1);
  CHECK_THROWS_AS(transfer_score({nullptr, nullptr, nullptr}, t.normalized, t, 2), Error);
}

TEST_CASE("identity oracle transfers on OOD1-B and OOD2 match in-distribution") {
  const FactorSpace space = eight_values();
  const OodConfig cfg = small_config();
  const auto enc = identity_encoder(0.0);
  const OodResult b = run_ood_eval(space, enc, cfg, build_split(space, "o", Scenario::ood1_b, 1), 1);
  CHECK(b.transfer <= 0.05);
  CHECK(b.gs == -b.transfer);
  const OodResult two = run_ood_eval(space, enc, cfg, build_split(space, "o", Scenario::ood2, 1), 1);
  const OodResult id = run_ood_eval(space, enc, cfg, build_split(space, "o", Scenario::in_distribution, 1), 1);
  CHECK(std::abs(two.transfer - id.transfer) <= 0.02);
  CHECK(std::abs(id.transfer - id.transfer_id) <= 0.01);

  EvalReport report;
  add_to_report(b, report);
  CHECK(report.metrics.count("transfer_ood1_b") == 1);
  CHECK(report.metrics.count("gs_ood1_b") == 1);
  CHECK(report.per_factor.at("mae_ood1_b").size() == 2);
}

}  // TEST_SUITE
