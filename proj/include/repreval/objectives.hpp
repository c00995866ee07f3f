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

#include "repreval/infotheory.hpp"
#include "repreval/types.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace repreval::objectives {

// recon_ll[n] = log p(x_n | z) evaluated by the caller; prior is N(0, I).
struct ObjectiveInputs {
  Vector recon_ll;
  GaussianPosterior posterior;
  void validate() const;
};

struct ObjectiveValue {
  Vector per_sample;
  double mean = 0;
};

/// Per-sample KL(q(z|x) || N(0, I)), clamped at 0 against rounding.
Vector sample_kl(const GaussianPosterior& posterior);

/// recon_ll - beta * KL.
ObjectiveValue beta_vae_objective(const ObjectiveInputs& inputs, double beta);

/// recon_ll - gamma * |KL - c|.
ObjectiveValue annealvae_objective(const ObjectiveInputs& inputs, double gamma, double c);

/// Linear ramp from 0 to c_max over anneal_steps, constant afterwards.
double capacity_schedule(Index step, double c_max, Index anneal_steps);

struct TcObjective {
  double value = 0;      // mean ELBO - (gamma - 1) * TC
  double mean_elbo = 0;
  info::KlDecomposition decomposition;
};

TcObjective tc_scaled_objective(const ObjectiveInputs& inputs, double gamma, Index mc_samples, std::uint64_t seed);

enum class DipVariant { i, ii };

/// Aggregate-posterior covariance: covariance of the means (i), plus the mean
/// posterior variance on the diagonal (ii). Population (1/N) normalization.
Matrix aggregate_covariance(const GaussianPosterior& posterior, DipVariant variant);

/// lambda_od * sum_{i != j} Cov_ij^2 + lambda_d * sum_i (Cov_ii - 1)^2.
double dip_regularizer(const GaussianPosterior& posterior, double lambda_od, double lambda_d, DipVariant variant);

// One diagonal Gaussian posterior (variances, not log-variances).
struct DiagGaussian {
  Vector mean;
  Vector var;
};

/// Symmetrized KL per dimension.
Vector per_dim_divergence(const DiagGaussian& a, const DiagGaussian& b);

/// Top-k dims by per-dim symmetrized KL (ties to the lower index), sorted
/// ascending. Without k, dims whose divergence exceeds the mean over dims.
std::vector<Index> select_changed_dims(const DiagGaussian& a, const DiagGaussian& b, std::optional<Index> k = std::nullopt);

/// Shared dims of both outputs become (mean of means, mean of variances).
std::pair<DiagGaussian, DiagGaussian> aggregate_posteriors(const DiagGaussian& a, const DiagGaussian& b,
                                                           const std::vector<Index>& changed);

/// sum over the pair of recon_ll - beta * KL(posterior || N(0, I)).
double paired_weak_objective(double recon_ll_a, double recon_ll_b, const DiagGaussian& a, const DiagGaussian& b,
                             double beta);

}  // namespace repreval::objectives
