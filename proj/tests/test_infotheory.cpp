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
#include "repreval/rng.hpp"
#include "support.hpp"

#include <cmath>
#include <map>
#include <set>
#include <numbers>

using namespace repreval;
using namespace repreval::info;

namespace {

IndexVector codes(std::initializer_list<Index> v) {
  IndexVector c(static_cast<Index>(v.size()));
  Index i = 0;
  for (Index x : v) c(i++) = x;
  return c;
}

// Direct plug-in sum over the joint histogram.
double brute_mi(const IndexVector& a, const IndexVector& b) {
  std::map<std::pair<Index, Index>, double> joint;
  std::map<Index, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    joint[{a(i), b(i)}] += 1 / n;
    pa[a(i)] += 1 / n;
    pb[b(i)] += 1 / n;
  }
  double mi = 0;
  for (const auto& [k, p] : joint) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  return mi;
}

GaussianPosterior random_posterior(Index n, Index d, CounterRng& rng) {
  GaussianPosterior p;
  p.mean.resize(n, d);
  p.log_var.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) {
      p.mean(i, j) = rng.normal(0, 1.5);
      p.log_var(i, j) = rng.uniform(-2.0, 0.5);
    }
  return p;
}

}  // namespace

TEST_SUITE("infotheory") {

TEST_CASE("equal-width bins put the maximum in the last bin") {
  Matrix v(3, 1);
  v << 0, 0.5, 1;
  const auto d = discretize(v, 2);
  CHECK(d.codes(0, 0) == 0);
  CHECK(d.codes(1, 0) == 1);
  CHECK(d.codes(2, 0) == 1);
}

TEST_CASE("constant columns code to zero and are flagged") {
  const Matrix v = Matrix::Constant(10, 1, 3.0);
  const auto d = discretize(v, 20);
  CHECK((d.codes.array() == 0).all());
  CHECK(d.constant[0]);
}

TEST_CASE("a 20-value grid with 20 bins codes bijectively") {
  Matrix v(20, 1);
  for (Index i = 0; i < 20; ++i) v(i, 0) = static_cast<double>(i) / 19.0;
  for (auto binning : {Binning::equal_width, Binning::quantile}) {
    const auto d = discretize(v, 20, binning);
    std::set<Index> seen(d.codes.data(), d.codes.data() + 20);
    CHECK(seen.size() == 20);
  }
}

TEST_CASE("quantile codes ignore strictly increasing maps") {
  CounterRng rng(1);
  Matrix v(500, 2);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform();
  const Matrix w = v.array().cube().exp();
  CHECK(discretize(v, 20, Binning::quantile).codes == discretize(w, 20, Binning::quantile).codes);
}

TEST_CASE("entropy of simple codes") {
  CHECK(entropy(codes({2, 2, 2, 2})) == 0.0);
  CHECK(entropy(codes({0, 1, 0, 1})) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  // Counts 1, 2, 3, 4 over four symbols.
  const IndexVector c = codes({0, 1, 1, 2, 2, 2, 3, 3, 3, 3});
  double h = 0;
  for (double k : {1.0, 2.0, 3.0, 4.0}) h -= k / 10 * std::log(k / 10);
  CHECK(std::abs(entropy(c, 4) - h) < 1e-12);
}

TEST_CASE("mutual information identities") {
  const IndexVector a = codes({0, 1, 2, 0, 1, 2, 2, 1});
  CHECK(std::abs(mutual_information(a, a) - entropy(a)) < 1e-12);
  CHECK(std::abs(mutual_information(codes({0, 0, 1, 1}), codes({0, 0, 1, 1})) - std::numbers::ln2) < 1e-12);

  CounterRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    IndexVector x(30), y(30);
    for (Index i = 0; i < 30; ++i) {
      x(i) = static_cast<Index>(rng.below(4));
      y(i) = rng.uniform() < 0.5 ? x(i) : static_cast<Index>(rng.below(3));
    }
    const double ixy = mutual_information(x, y);
    CHECK(std::abs(ixy - mutual_information(y, x)) < 1e-12);
    CHECK(std::abs(ixy - brute_mi(x, y)) < 1e-12);
    CHECK(ixy >= 0);
    CHECK(ixy <= std::min(entropy(x), entropy(y)) + 1e-12);
  }
}

TEST_CASE("independent uniform codes have near-zero information") {
  CounterRng rng(17);
  IndexVector x(100000), y(100000);
  for (Index i = 0; i < x.size(); ++i) {
    x(i) = static_cast<Index>(rng.below(10));
    y(i) = static_cast<Index>(rng.below(10));
  }
  CHECK(mutual_information(x, y) <= 0.01);
}

TEST_CASE("gaussian KL closed forms") {
  Eigen::ArrayXd mu1(1), v1(1), mu0(1), v0(1);
  mu1 << 1;
  v1 << 1;
  mu0 << 0;
  v0 << 1;
  CHECK(gaussian_kl(mu1, v1, mu0, v0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(gaussian_kl(mu1, v1, mu1, v1) == 0.0);
  CHECK(symmetrized_kl(mu1, v1, mu0, v0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(symmetrized_kl(mu1, v1, mu0, v0) == symmetrized_kl(mu0, v0, mu1, v1));
  v0 << 0;
  CHECK_THROWS_AS(gaussian_kl(mu1, v1, mu0, v0), Error);
}

TEST_CASE("gaussian KL is non-negative on 1e6 random pairs") {
  CounterRng rng(99);
  Eigen::ArrayXd a(1), b(1), c(1), d(1);
  double worst = 0;
  for (int i = 0; i < 1000000; ++i) {
    a << rng.normal(0, 3);
    c << rng.normal(0, 3);
    b << std::exp(rng.uniform(-4, 4));
    d << std::exp(rng.uniform(-4, 4));
    worst = std::min(worst, gaussian_kl(a, b, c, d));
  }
  CHECK(worst >= 0.0);
}

TEST_CASE("single posterior decomposition is exact") {
  CounterRng rng(3);
  const GaussianPosterior p = random_posterior(1, 3, rng);
  const auto d = kl_decomposition(p, 2000, 4);
  CHECK(d.index_code_mi == 0.0);
  CHECK(d.total_correlation == 0.0);
  CHECK(d.dimwise_kl == kl_to_standard_normal(p)(0));
}

TEST_CASE("identical posteriors carry no index-code information") {
  CounterRng rng(8);
  const GaussianPosterior one = random_posterior(1, 2, rng);
  GaussianPosterior p;
  p.mean = one.mean.replicate(20, 1);
  p.log_var = one.log_var.replicate(20, 1);
  const auto d = kl_decomposition(p, 2000, 4);
  CHECK(std::abs(d.index_code_mi) < 1e-12);
}

TEST_CASE("decomposition sums to the analytic mean KL within 3 standard errors") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CounterRng rng(seed, 9);
    const GaussianPosterior p = random_posterior(50, 2, rng);
    const auto d = kl_decomposition(p, 20000, seed);
    CHECK(d.analytic_mean_kl == doctest::Approx(kl_to_standard_normal(p).mean()).epsilon(1e-12));
    CHECK(std::abs(d.index_code_mi + d.total_correlation + d.dimwise_kl - d.analytic_mean_kl) <= 3 * d.standard_error);
  }
}

}  // TEST_SUITE
