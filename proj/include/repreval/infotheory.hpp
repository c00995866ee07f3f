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

#include "repreval/error.hpp"
#include "repreval/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

namespace repreval::info {

enum class Binning { equal_width, quantile };

// Per-dimension bin codes. Equal-width bins span [min, max] of the column
// with the maximum mapped to the last bin; quantile bins use ranks, so they
// are unchanged by any strictly increasing reparameterization.
struct DiscretizedTable {
  IndexMatrix codes;
  std::vector<std::vector<double>> edges;  // equal-width only
  std::vector<Index> alphabet;             // bins per column (1 for constant columns)
  std::vector<bool> constant;
};

/// Default bin count for continuous latents.
inline constexpr Index kDefaultBins = 20;

DiscretizedTable discretize(const Matrix& values, Index bins, Binning binning = Binning::equal_width);

namespace detail {

inline double plug_in_entropy(const std::vector<Index>& counts, Index total) {
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (Index c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

template <typename Derived>
Index alphabet_of(const Eigen::DenseBase<Derived>& codes) {
  if (codes.size() == 0) return 0;
  if (codes.minCoeff() < 0) throw Error(ErrorCode::InvalidArgument, "infotheory", "negative code");
  return static_cast<Index>(codes.maxCoeff()) + 1;
}

}  // namespace detail

/// Plug-in entropy in nats of integer codes drawn from [0, k).
template <typename Derived>
double entropy(const Eigen::DenseBase<Derived>& codes, Index k) {
  if (codes.size() == 0) throw Error(ErrorCode::EmptyInput, "infotheory", "entropy of an empty sample");
  std::vector<Index> counts(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < codes.size(); ++i) {
    const auto c = static_cast<Index>(codes.derived().coeff(i));
    if (c < 0 || c >= k) throw Error(ErrorCode::InvalidArgument, "infotheory", "code outside alphabet");
    ++counts[static_cast<std::size_t>(c)];
  }
  return detail::plug_in_entropy(counts, codes.size());
}

template <typename Derived>
double entropy(const Eigen::DenseBase<Derived>& codes) {
  return entropy(codes, detail::alphabet_of(codes));
}

/// I(a; b) = H(a) + H(b) - H(a, b), clamped at 0.
template <typename DerivedA, typename DerivedB>
double mutual_information(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "infotheory", "code vectors differ in length");
  if (a.size() == 0) throw Error(ErrorCode::EmptyInput, "infotheory", "mutual information of an empty sample");
  const Index ka = detail::alphabet_of(a), kb = detail::alphabet_of(b);
  std::vector<Index> ca(static_cast<std::size_t>(ka), 0), cb(static_cast<std::size_t>(kb), 0),
      cab(static_cast<std::size_t>(ka * kb), 0);
  for (Index i = 0; i < a.size(); ++i) {
    const auto x = static_cast<Index>(a.derived().coeff(i)), y = static_cast<Index>(b.derived().coeff(i));
    ++ca[static_cast<std::size_t>(x)];
    ++cb[static_cast<std::size_t>(y)];
    ++cab[static_cast<std::size_t>(x * kb + y)];
  }
  const Index n = a.size();
  const double mi = detail::plug_in_entropy(ca, n) + detail::plug_in_entropy(cb, n) - detail::plug_in_entropy(cab, n);
  return mi > 0.0 ? mi : 0.0;
}

/// D x F matrix of I(latent code j; factor code i).
Matrix mutual_information_matrix(const IndexMatrix& latent_codes, const IndexMatrix& factor_codes);

/// KL(N(mu1, var1) || N(mu0, var0)) summed over dimensions.
template <typename D1, typename D2, typename D3, typename D4>
double gaussian_kl(const Eigen::ArrayBase<D1>& mu1, const Eigen::ArrayBase<D2>& var1, const Eigen::ArrayBase<D3>& mu0,
                   const Eigen::ArrayBase<D4>& var0) {
  if ((var1 <= 0).any() || (var0 <= 0).any()) {
    throw Error(ErrorCode::NonPositiveVariance, "infotheory", "variances must be positive");
  }
  return (0.5 * (var1 / var0 + (mu1 - mu0).square() / var0 - 1.0 + (var0 / var1).log())).sum();
}

/// (KL(p||q) + KL(q||p)) / 2.
template <typename D1, typename D2, typename D3, typename D4>
double symmetrized_kl(const Eigen::ArrayBase<D1>& mu_p, const Eigen::ArrayBase<D2>& var_p,
                      const Eigen::ArrayBase<D3>& mu_q, const Eigen::ArrayBase<D4>& var_q) {
  return 0.5 * gaussian_kl(mu_p, var_p, mu_q, var_q) + 0.5 * gaussian_kl(mu_q, var_q, mu_p, var_p);
}

/// Per-row KL(q(z|x) || N(0, I)) from means and log-variances.
Vector kl_to_standard_normal(const GaussianPosterior& post);

// Three-term split of E_x KL(q(z|x) || N(0, I)) into index-code mutual
// information, total correlation and dimension-wise KL, estimated by Monte
// Carlo against the exact N-component aggregate posterior.
struct KlDecomposition {
  double index_code_mi = 0;
  double total_correlation = 0;
  double dimwise_kl = 0;
  double estimated_mean_kl = 0;  // MC estimate of the sum of the three terms
  double standard_error = 0;     // of estimated_mean_kl
  double analytic_mean_kl = 0;
  Index samples = 0;
};

KlDecomposition kl_decomposition(const GaussianPosterior& post, Index mc_samples, std::uint64_t seed);

}  // namespace repreval::info
