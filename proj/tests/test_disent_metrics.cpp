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


#include "repreval/disent_metrics.hpp"
#include "repreval/error.hpp"
#include "repreval/rng.hpp"
#include "repreval/synthgen.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>

using namespace repreval;
using namespace repreval::disent;

namespace {

FactorSpace small_space() {
  return {FactorSpec::linspace("a", 0, 1, 5), FactorSpec::linspace("b", -1, 1, 4), FactorSpec::categorical("c", 6)};
}

// Every combination of grid values, `reps` times over.
FactorTable full_factorial(const FactorSpace& space, Index reps) {
  Index combos = 1;
  for (const auto& f : space) combos *= f.cardinality();
  IndexMatrix codes(combos * reps, static_cast<Index>(space.size()));
  for (Index r = 0; r < codes.rows(); ++r) {
    Index rest = r % combos;
    for (Index j = 0; j < codes.cols(); ++j) {
      const Index k = space[static_cast<std::size_t>(j)].cardinality();
      codes(r, j) = rest % k;
      rest /= k;
    }
  }
  return FactorTable::from_codes(space, codes);
}

Matrix rotate(const Matrix& z, std::uint64_t seed) { return z * synth::rotation_matrix(z.cols(), seed).transpose(); }

Matrix permute_cols(const Matrix& z, const std::vector<Index>& perm) {
  Matrix out(z.rows(), z.cols());
  for (Index j = 0; j < z.cols(); ++j) out.col(j) = z.col(perm[static_cast<std::size_t>(j)]);
  return out;
}

BatchOptions quick() {
  BatchOptions o;
  o.train_batches = 200;
  o.eval_batches = 100;
  return o;
}

}  // namespace

TEST_SUITE("disent-metrics") {

TEST_CASE("BetaVAE score") {
  const FactorTable t = synth::sample_factors(small_space(), 4000, 1);
  const Matrix& z = t.normalized;
  CHECK(betavae_score(t, z, 2, quick()).score == 1.0);

  CounterRng rng(3);
  Matrix noise(t.rows(), 3);
  for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
  BatchOptions o = quick();
  o.eval_batches = 500;
  const double chance = betavae_score(t, noise, 2, o).score;
  CHECK(std::abs(chance - 1.0 / 3.0) <= 0.1);

  const FactorSpace two{FactorSpec::linspace("a", 0, 1, 10), FactorSpec::linspace("b", 0, 1, 10)};
  const FactorTable t2 = synth::sample_factors(two, 4000, 4);
  const MetricResult only0 = betavae_score(t2, t2.normalized.col(0), 5, quick());
  CHECK(only0.per_factor[0] >= 0.95);
}

TEST_CASE("FactorVAE score") {
  const FactorTable t = synth::sample_factors(small_space(), 4000, 1);
  CHECK(factorvae_score(t, t.normalized, 2, quick()).score == 1.0);

  synth::MixingSpec dup;
  dup.mode = synth::MixingMode::duplicate_dims;
  dup.target = 1;
  CHECK(factorvae_score(t, synth::mix(t, dup).data, 2, quick()).score == 1.0);

  Matrix with_const(t.rows(), 4);
  with_const << t.normalized, Matrix::Constant(t.rows(), 1, 0.3);
  const MetricResult r = factorvae_score(t, with_const, 2, quick());
  CHECK(r.score == 1.0);
  CHECK(r.flags.count("pruned_dims") == 1);

  Matrix affine = t.normalized;
  affine.col(0) = affine.col(0) * 3.0 + Eigen::VectorXd::Constant(t.rows(), 7.0);
  affine.col(2) *= 2.0;
  CHECK(factorvae_score(t, affine, 2, quick()).score == factorvae_score(t, t.normalized, 2, quick()).score);
}

TEST_CASE("MIG") {
  const FactorTable t = full_factorial(small_space(), 3);
  const MetricResult id = mig(t, t.normalized);
  CHECK(std::abs(id.score - 1.0) < 1e-12);

  synth::MixingSpec dup;
  dup.mode = synth::MixingMode::duplicate_dims;
  dup.target = 0;
  const MetricResult d = mig(t, synth::mix(t, dup).data);
  CHECK(std::abs(d.per_factor[0]) < 1e-12);

  const FactorSpace two{FactorSpec::linspace("a", 0, 1, 10), FactorSpec::linspace("b", 0, 1, 10)};
  const FactorTable t2 = synth::sample_factors(two, 5000, 2);
  Matrix r45(2, 2);
  const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);
  r45 << c, -s, s, c;
  CHECK(mig(t2, t2.normalized * r45.transpose()).score < mig(t2, t2.normalized).score);
}

TEST_CASE("MIG and modularity ignore monotone reparameterization under quantile binning") {
  const FactorTable t = synth::sample_factors(small_space(), 3000, 6);
  CounterRng rng(1);
  Matrix z = t.normalized;
  for (Index i = 0; i < z.size(); ++i) z.data()[i] += 0.05 * rng.normal();
  Matrix w = z;
  w.col(0) = z.col(0).array().exp();
  w.col(1) = z.col(1).array().cube() * 5.0;
  w.col(2) = -(-z.col(2).array()).exp();
  CHECK(mig(t, z, 20, info::Binning::quantile).score == mig(t, w, 20, info::Binning::quantile).score);
  CHECK(modularity_explicitness(t, z, 1, 20, 0.8, info::Binning::quantile).modularity ==
        modularity_explicitness(t, w, 1, 20, 0.8, info::Binning::quantile).modularity);
}

TEST_CASE("DCI importance summaries") {
  CHECK(dci_disentanglement(Matrix::Identity(4, 4)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dci_completeness(Matrix::Identity(4, 4)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(dci_disentanglement(Matrix::Ones(4, 4))) < 1e-12);
  CHECK(std::abs(dci_completeness(Matrix::Ones(4, 4))) < 1e-12);

  const FactorTable t = synth::sample_factors(small_space(), 3000, 3);
  const DciResult r = dci(t, t.normalized, 4);
  CHECK(r.disentanglement >= 0.95);
  CHECK(r.completeness >= 0.95);
  CHECK(r.informativeness >= 0.9);
  CHECK(dci(t, rotate(t.normalized, 2), 4).disentanglement < r.disentanglement);
}

TEST_CASE("SAP") {
  Matrix s(1, 3);
  s << 0.9, 0.1, 0.1;
  CHECK(sap_from_scores(s) == doctest::Approx(0.8).epsilon(1e-15));
  Matrix same(2, 3);
  same << 0.7, 0.7, 0.1, 0.2, 0.2, 0.2;
  CHECK(sap_from_scores(same) == 0.0);

  const FactorTable t = synth::sample_factors(small_space(), 3000, 3);
  const SapResult r = sap(t, t.normalized, 4);
  CHECK(r.score >= 0.8);
  Matrix twin(t.rows(), 4);
  twin << t.normalized, t.normalized.col(0);
  CHECK(sap(t, twin, 4).per_factor[0] == 0.0);
}

TEST_CASE("modularity and explicitness") {
  const FactorTable t = full_factorial(small_space(), 3);
  const ModularityResult r = modularity_explicitness(t, t.normalized, 2);
  CHECK(std::abs(r.modularity - 1.0) < 1e-12);
  CHECK(r.explicitness >= 0.95);

  for (Index f : {3, 4, 6}) {
    Matrix mi = Matrix::Zero(1, f);
    mi(0, 0) = mi(0, 1) = 0.7;
    CHECK(modularity_from_mi(mi)[0] == doctest::Approx(1.0 - 1.0 / static_cast<double>(f - 1)).epsilon(1e-12));
  }
}

TEST_CASE("IRS") {
  const FactorTable t = full_factorial(small_space(), 4);
  CHECK(std::abs(irs(t, t.normalized).score - 1.0) < 1e-12);

  Matrix mixed(t.rows(), 2);
  mixed.col(0) = t.normalized.col(0) + t.normalized.col(1);
  mixed.col(1) = t.normalized.col(2);
  CHECK(irs(t, mixed).per_factor[0] < 1.0);

  const FactorTable s = synth::sample_factors(small_space(), 5000, 9);
  synth::MixingSpec noise;
  noise.noise_sigma = 0.02;
  noise.seed = 3;
  const Matrix z = synth::mix(s, noise).data;
  CounterRng rng(5);
  Matrix wide(z.rows(), z.cols() + 3);
  wide.leftCols(z.cols()) = z;
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = z.cols(); j < wide.cols(); ++j) wide(i, j) = rng.uniform();
  const MetricResult a = irs(s, z), b = irs(s, wide);
  for (std::size_t f = 0; f < a.per_factor.size(); ++f) CHECK(std::abs(a.per_factor[f] - b.per_factor[f]) <= 0.02);

  FactorTable once = synth::sample_factors(small_space(), 3, 1);
  CHECK_THROWS_AS(irs(once, once.normalized), Error);
}

TEST_CASE("all metrics lie in [0, 1] and prefer the disentangled oracle") {
  const FactorTable t = synth::sample_factors(small_space(), 3000, 12);
  synth::MixingSpec spec;
  spec.noise_sigma = 0.01;
  spec.seed = 1;
  const Matrix z = synth::mix(t, spec).data;
  const Matrix r = rotate(z, 7);
  auto scores = [&](const Matrix& m) {
    const auto mod = modularity_explicitness(t, m, 3);
    return std::vector<double>{mig(t, m).score,          dci(t, m, 3).disentanglement, sap(t, m, 3).score,
                               factorvae_score(t, m, 3, quick()).score, betavae_score(t, m, 3, quick()).score,
                               mod.modularity,            irs(t, m).score};
  };
  const auto a = scores(z), b = scores(r);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] >= 0);
    CHECK(a[i] <= 1);
    CHECK(b[i] >= 0);
    CHECK(b[i] <= 1);
    CHECK(a[i] >= b[i]);
  }
}

TEST_CASE("metrics do not depend on latent dimension order") {
  const FactorTable t = synth::sample_factors(small_space(), 2000, 8);
  synth::MixingSpec spec;
  spec.noise_sigma = 0.05;
  spec.extra_dims = 2;
  spec.seed = 4;
  const Matrix z = synth::mix(t, spec).data;
  const Matrix p = permute_cols(z, {3, 0, 4, 2, 1});
  CHECK(mig(t, z).score == mig(t, p).score);
  CHECK(dci(t, z, 3).disentanglement == dci(t, p, 3).disentanglement);
  CHECK(sap(t, z, 3).score == sap(t, p, 3).score);
  CHECK(factorvae_score(t, z, 3, quick()).score == factorvae_score(t, p, 3, quick()).score);
  CHECK(betavae_score(t, z, 3, quick()).score == betavae_score(t, p, 3, quick()).score);
  CHECK(modularity_explicitness(t, z, 3).modularity == modularity_explicitness(t, p, 3).modularity);
  CHECK(irs(t, z).score == irs(t, p).score);
}

TEST_CASE("single-factor spaces are rejected where a gap is needed") {
  const FactorSpace one{FactorSpec::linspace("a", 0, 1, 5)};
  const FactorTable t = synth::sample_factors(one, 200, 1);
  CHECK_THROWS_AS(betavae_score(t, t.normalized, 1, quick()), Error);
}

}  // TEST_SUITE
