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

#include "repreval/infotheory.hpp"

#include "repreval/parallel.hpp"
#include "repreval/rng.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

namespace repreval::info {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(const double* v, Index n, Index stride) {
  double m = v[0];
  for (Index i = 1; i < n; ++i) m = std::max(m, v[i * stride]);
  double s = 0.0;
  for (Index i = 0; i < n; ++i) s += std::exp(v[i * stride] - m);
  return m + std::log(s);
}

}  // namespace

DiscretizedTable discretize(const Matrix& values, Index bins, Binning binning) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "infotheory", "bins must be >= 2");
  if (values.rows() == 0) throw Error(ErrorCode::EmptyInput, "infotheory", "discretize of an empty table");
  DiscretizedTable t;
  const Index n = values.rows();
  t.codes.resize(n, values.cols());
  for (Index j = 0; j < values.cols(); ++j) {
    const double lo = values.col(j).minCoeff(), hi = values.col(j).maxCoeff();
    if (!(hi > lo)) {
      t.codes.col(j).setZero();
      t.edges.push_back({lo, lo});
      t.alphabet.push_back(1);
      t.constant.push_back(true);
      continue;
    }
    t.constant.push_back(false);
    t.alphabet.push_back(bins);
    if (binning == Binning::equal_width) {
      std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
      for (Index b = 0; b <= bins; ++b) edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
      for (Index i = 0; i < n; ++i) {
        const double u = (values(i, j) - lo) / (hi - lo);
        t.codes(i, j) = std::min(bins - 1, static_cast<Index>(std::floor(u * static_cast<double>(bins))));
      }
      t.edges.push_back(std::move(edges));
    } else {
      // Rank-based bins; tied values share the rank of their first occurrence.
      std::vector<Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values(a, j) < values(b, j); });
      Index rank = 0;
      for (Index k = 0; k < n; ++k) {
        if (k > 0 && values(order[static_cast<std::size_t>(k)], j) != values(order[static_cast<std::size_t>(k - 1)], j)) rank = k;
        t.codes(order[static_cast<std::size_t>(k)], j) = rank * bins / n;
      }
      t.edges.emplace_back();
    }
  }
  return t;
}

Matrix mutual_information_matrix(const IndexMatrix& latent_codes, const IndexMatrix& factor_codes) {
  Matrix mi(latent_codes.cols(), factor_codes.cols());
  for (Index j = 0; j < latent_codes.cols(); ++j) {
    for (Index i = 0; i < factor_codes.cols(); ++i) mi(j, i) = mutual_information(latent_codes.col(j), factor_codes.col(i));
  }
  return mi;
}

Vector kl_to_standard_normal(const GaussianPosterior& post) {
  const Eigen::ArrayXXd var = post.log_var.array().exp();
  if (!(var > 0).all()) throw Error(ErrorCode::NonPositiveVariance, "infotheory", "variances must be positive");
  return (0.5 * (var + post.mean.array().square() - 1.0 - post.log_var.array())).rowwise().sum().matrix();
}

KlDecomposition kl_decomposition(const GaussianPosterior& post, Index mc_samples, std::uint64_t seed) {
  const Index n = post.rows(), d = post.dims();
  if (n < 1) throw Error(ErrorCode::EmptyInput, "infotheory", "decomposition needs at least one posterior");
  if (mc_samples < 1) throw Error(ErrorCode::InvalidArgument, "infotheory", "mc_samples must be >= 1");
  if (!post.log_var.allFinite()) throw Error(ErrorCode::NonPositiveVariance, "infotheory", "non-finite log-variance");
  const Eigen::ArrayXXd sd = (0.5 * post.log_var.array()).exp();
  if (!(sd > 0).all()) throw Error(ErrorCode::NonPositiveVariance, "infotheory", "variance underflow");

  KlDecomposition out;
  out.samples = mc_samples;
  out.analytic_mean_kl = kl_to_standard_normal(post).mean();

  // Fixed shard layout so the reduction order never depends on thread count.
  constexpr Index kShard = 1024;
  const Index shards = (mc_samples + kShard - 1) / kShard;
  struct Partial {
    double mi = 0, tc = 0, dw = 0, sum = 0, sum_sq = 0;
  };
  std::vector<Partial> partial(static_cast<std::size_t>(shards));
  const double log_n = std::log(static_cast<double>(n));

  parallel_for(static_cast<std::size_t>(shards), [&](std::size_t s) {
    CounterRng rng(seed, s);
    Eigen::ArrayXXd log_comp(n, d);  // log N(z_d; mu_nd, sd_nd)
    Eigen::ArrayXd z(d);
    Partial p;
    const Index begin = static_cast<Index>(s) * kShard, end = std::min(mc_samples, begin + kShard);
    for (Index m = begin; m < end; ++m) {
      const auto src = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      for (Index k = 0; k < d; ++k) z(k) = post.mean(src, k) + sd(src, k) * rng.normal();
      for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < d; ++k) {
          const double u = (z(k) - post.mean(i, k)) / sd(i, k);
          log_comp(i, k) = -0.5 * (kLog2Pi + u * u) - std::log(sd(i, k));
        }
      }
      Eigen::ArrayXd joint(n);
      for (Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Index k = 0; k < d; ++k) acc += log_comp(i, k);
        joint(i) = acc;
      }
      const double log_q_cond = joint(src);
      const double log_q = log_sum_exp(joint.data(), n, 1) - log_n;
      double log_marginals = 0.0, log_prior = 0.0;
      for (Index k = 0; k < d; ++k) {
        log_marginals += log_sum_exp(log_comp.data() + k * n, n, 1) - log_n;
        log_prior += -0.5 * (kLog2Pi + z(k) * z(k));
      }
      p.mi += log_q_cond - log_q;
      p.tc += log_q - log_marginals;
      p.dw += log_marginals - log_prior;
      const double total = log_q_cond - log_prior;
      p.sum += total;
      p.sum_sq += total * total;
    }
    partial[s] = p;
  });

  Partial acc;
  for (const auto& p : partial) {
    acc.mi += p.mi;
    acc.tc += p.tc;
    acc.dw += p.dw;
    acc.sum += p.sum;
    acc.sum_sq += p.sum_sq;
  }
  const double m = static_cast<double>(mc_samples);
  out.index_code_mi = acc.mi / m;
  out.total_correlation = acc.tc / m;
  out.dimwise_kl = acc.dw / m;
  out.estimated_mean_kl = acc.sum / m;
  const double var = mc_samples > 1 ? std::max(0.0, (acc.sum_sq - acc.sum * acc.sum / m) / (m - 1.0)) : 0.0;
  out.standard_error = std::sqrt(var / m);
  if (n == 1) {
    // The aggregate is the single posterior itself: its marginals are the
    // posterior's own Gaussians, so the dimension-wise term is closed-form.
    out.dimwise_kl = out.analytic_mean_kl;
  }
  return out;
}

}  // namespace repreval::info
