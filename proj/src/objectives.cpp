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

#include "repreval/objectives.hpp"

#include "repreval/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace repreval::objectives {
namespace {

constexpr const char* kModule = "objectives-weaksup";

void check_beta(double beta) {
  if (!(beta > 0)) throw Error(ErrorCode::NonPositiveBeta, kModule, "beta must be positive");
}

double kl_standard(const DiagGaussian& p) {
  if ((p.var.array() <= 0).any()) throw Error(ErrorCode::NonPositiveVariance, kModule, "variances must be positive");
  const double kl = 0.5 * (p.mean.array().square() + p.var.array() - 1.0 - p.var.array().log()).sum();
  return std::max(0.0, kl);
}

}  // namespace

void ObjectiveInputs::validate() const {
  if (recon_ll.size() != posterior.rows() || posterior.mean.rows() != posterior.log_var.rows() ||
      posterior.mean.cols() != posterior.log_var.cols())
    throw Error(ErrorCode::LengthMismatch, kModule, "objective inputs have inconsistent lengths");
  if (!recon_ll.allFinite()) throw Error(ErrorCode::InvalidArgument, kModule, "reconstruction terms must be finite");
}

Vector sample_kl(const GaussianPosterior& posterior) {
  return info::kl_to_standard_normal(posterior).cwiseMax(0.0);
}

ObjectiveValue beta_vae_objective(const ObjectiveInputs& inputs, double beta) {
  check_beta(beta);
  inputs.validate();
  ObjectiveValue v;
  v.per_sample = inputs.recon_ll - beta * sample_kl(inputs.posterior);
  v.mean = v.per_sample.mean();
  return v;
}

ObjectiveValue annealvae_objective(const ObjectiveInputs& inputs, double gamma, double c) {
  check_beta(gamma);
  if (c < 0) throw Error(ErrorCode::NegativeCapacity, kModule, "capacity must be non-negative");
  inputs.validate();
  ObjectiveValue v;
  v.per_sample = inputs.recon_ll - gamma * (sample_kl(inputs.posterior).array() - c).abs().matrix();
  v.mean = v.per_sample.mean();
  return v;
}

double capacity_schedule(Index step, double c_max, Index anneal_steps) {
  if (c_max < 0) throw Error(ErrorCode::NegativeCapacity, kModule, "capacity must be non-negative");
  if (step < 0) throw Error(ErrorCode::InvalidArgument, kModule, "step must be non-negative");
  if (anneal_steps <= 0 || step >= anneal_steps) return c_max;
  return c_max * static_cast<double>(step) / static_cast<double>(anneal_steps);
}

TcObjective tc_scaled_objective(const ObjectiveInputs& inputs, double gamma, Index mc_samples, std::uint64_t seed) {
  if (!(gamma >= 1)) throw Error(ErrorCode::InvalidArgument, kModule, "gamma must be >= 1");
  TcObjective t;
  t.mean_elbo = beta_vae_objective(inputs, 1.0).mean;
  t.decomposition = info::kl_decomposition(inputs.posterior, mc_samples, seed);
  t.value = t.mean_elbo - (gamma - 1.0) * t.decomposition.total_correlation;
  return t;
}

Matrix aggregate_covariance(const GaussianPosterior& posterior, DipVariant variant) {
  const Index n = posterior.rows();
  if (n < 2) throw Error(ErrorCode::SingleSample, kModule, "aggregate covariance needs at least two samples");
  const Matrix centered = posterior.mean.rowwise() - posterior.mean.colwise().mean();
  Matrix cov = centered.transpose() * centered / static_cast<double>(n);
  if (variant == DipVariant::ii) cov.diagonal() += posterior.variance().colwise().mean().transpose();
  return cov;
}

double dip_regularizer(const GaussianPosterior& posterior, double lambda_od, double lambda_d, DipVariant variant) {
  const Matrix cov = aggregate_covariance(posterior, variant);
  const double diag = (cov.diagonal().array() - 1.0).square().sum();
  const double off = cov.squaredNorm() - cov.diagonal().squaredNorm();
  return lambda_od * off + lambda_d * diag;
}

Vector per_dim_divergence(const DiagGaussian& a, const DiagGaussian& b) {
  if (a.mean.size() != b.mean.size() || a.var.size() != a.mean.size() || b.var.size() != b.mean.size())
    throw Error(ErrorCode::DimMismatch, kModule, "posteriors differ in dimension");
  Vector d(a.mean.size());
  for (Index j = 0; j < d.size(); ++j)
    d(j) = info::symmetrized_kl(a.mean.segment(j, 1).array(), a.var.segment(j, 1).array(), b.mean.segment(j, 1).array(),
                                b.var.segment(j, 1).array());
  return d;
}

std::vector<Index> select_changed_dims(const DiagGaussian& a, const DiagGaussian& b, std::optional<Index> k) {
  const Vector delta = per_dim_divergence(a, b);
  const Index dims = delta.size();
  std::vector<Index> out;
  if (k) {
    if (*k < 1 || *k >= dims) throw Error(ErrorCode::KOutOfRange, kModule, "k must lie in [1, D)");
    std::vector<Index> order(static_cast<std::size_t>(dims));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return delta(x) > delta(y); });
    out.assign(order.begin(), order.begin() + *k);
  } else {
    const double threshold = delta.mean();
    for (Index j = 0; j < dims; ++j)
      if (delta(j) > threshold) out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<DiagGaussian, DiagGaussian> aggregate_posteriors(const DiagGaussian& a, const DiagGaussian& b,
                                                           const std::vector<Index>& changed) {
  if (a.mean.size() != b.mean.size()) throw Error(ErrorCode::DimMismatch, kModule, "posteriors differ in dimension");
  std::vector<bool> is_changed(static_cast<std::size_t>(a.mean.size()), false);
  for (Index j : changed) {
    if (j < 0 || j >= a.mean.size()) throw Error(ErrorCode::InvalidArgument, kModule, "changed dim out of range");
    is_changed[static_cast<std::size_t>(j)] = true;
  }
  DiagGaussian ao = a, bo = b;
  for (Index j = 0; j < a.mean.size(); ++j) {
    if (is_changed[static_cast<std::size_t>(j)]) continue;
    const double m = 0.5 * (a.mean(j) + b.mean(j));
    const double v = 0.5 * (a.var(j) + b.var(j));
    ao.mean(j) = bo.mean(j) = m;
    ao.var(j) = bo.var(j) = v;
  }
  return {ao, bo};
}

double paired_weak_objective(double recon_ll_a, double recon_ll_b, const DiagGaussian& a, const DiagGaussian& b,
                             double beta) {
  check_beta(beta);
  return (recon_ll_a - beta * kl_standard(a)) + (recon_ll_b - beta * kl_standard(b));
}

}  // namespace repreval::objectives
