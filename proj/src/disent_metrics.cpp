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
#include "repreval/parallel.hpp"
#include "repreval/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace repreval::disent {
namespace {

constexpr const char* kModule = "disent-metrics";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Canonical {
  Matrix z;                  // z.col(j) == repr.col(order[j])
  std::vector<Index> order;
};

Canonical canonicalize(const FactorTable& factors, const Matrix& repr) {
  if (repr.rows() != factors.rows())
    throw Error(ErrorCode::LengthMismatch, kModule, "representation and factor table differ in rows");
  if (repr.cols() < 1) throw Error(ErrorCode::InvalidArgument, kModule, "representation has no dims");
  if (!repr.allFinite()) throw Error(ErrorCode::InvalidArgument, kModule, "representation has non-finite values");
  Canonical c;
  c.order = predict::canonical_column_order(repr);
  c.z.resize(repr.rows(), repr.cols());
  for (Index j = 0; j < repr.cols(); ++j) c.z.col(j) = repr.col(c.order[static_cast<std::size_t>(j)]);
  return c;
}

// Writes canonical-order columns back to the caller's order.
template <typename T>
std::vector<T> uncanonical(const std::vector<T>& v, const std::vector<Index>& order) {
  std::vector<T> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[static_cast<std::size_t>(order[j])] = v[j];
  return out;
}

Matrix uncanonical_cols(const Matrix& m, const std::vector<Index>& order) {
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) out.col(order[static_cast<std::size_t>(j)]) = m.col(j);
  return out;
}

struct Split {
  std::vector<Index> train, test;
};

Split split_rows(Index n, double train_fraction, std::uint64_t seed) {
  CounterRng rng(seed, 0x5b1170);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  rng.shuffle(std::span<Index>(perm));
  auto n_train = static_cast<Index>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<Index>(n_train, 1, std::max<Index>(1, n - 1));
  Split s;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.test.assign(perm.begin() + n_train, perm.end());
  if (s.test.empty()) s.test = s.train;
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Matrix rows_of(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

// groups[v] = rows (from `rows`) whose factor code equals v.
std::vector<std::vector<Index>> group_by(const FactorTable& factors, Index factor, const std::vector<Index>& rows) {
  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(factors.space[static_cast<std::size_t>(factor)].cardinality()));
  for (Index r : rows) groups[static_cast<std::size_t>(factors.codes(r, factor))].push_back(r);
  return groups;
}

template <typename T>
const T& pick(CounterRng& rng, const std::vector<T>& items) {
  return items[static_cast<std::size_t>(rng.below(items.size()))];
}

Index argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  Index best = 0;
  for (Index j = 1; j < v.size(); ++j)
    if (v(j) > v(best)) best = j;
  return best;
}

double mean_of_defined(const std::vector<double>& v) {
  double s = 0;
  Index n = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      s += x;
      ++n;
    }
  return n > 0 ? s / static_cast<double>(n) : 0.0;
}

void require_factors(const FactorTable& factors, Index at_least) {
  if (factors.factors() < at_least)
    throw Error(ErrorCode::SingleFactorSpace, kModule, "metric needs at least two factors");
}

}  // namespace

MetricResult betavae_score(const FactorTable& factors, const Matrix& repr, std::uint64_t seed,
                           const BatchOptions& options) {
  const Index f = factors.factors();
  require_factors(factors, 2);
  const Canonical c = canonicalize(factors, repr);
  const Index d = c.z.cols();
  const Split split = split_rows(factors.rows(), 0.5, seed);

  auto batches = [&](const std::vector<Index>& rows, Index count, std::uint64_t stream, Matrix& x, IndexVector& y) {
    std::vector<std::vector<std::vector<Index>>> groups;
    for (Index i = 0; i < f; ++i) groups.push_back(group_by(factors, i, rows));
    CounterRng rng(seed, stream);
    x.resize(count, d);
    y.resize(count);
    for (Index b = 0; b < count; ++b) {
      const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(f)));
      Eigen::RowVectorXd feature = Eigen::RowVectorXd::Zero(d);
      for (Index p = 0; p < options.batch_size; ++p) {
        const Index x1 = pick(rng, rows);
        const auto& grp = groups[static_cast<std::size_t>(i)][static_cast<std::size_t>(factors.codes(x1, i))];
        Index x2 = pick(rng, grp);
        while (x2 == x1 && grp.size() > 1) x2 = pick(rng, grp);
        feature += (c.z.row(x1) - c.z.row(x2)).cwiseAbs();
      }
      x.row(b) = feature / static_cast<double>(options.batch_size);
      y(b) = i;
    }
  };
  Matrix xt, xe;
  IndexVector yt, ye;
  batches(split.train, options.train_batches, 1, xt, yt);
  batches(split.test, options.eval_batches, 2, xe, ye);
  const predict::LogisticModel model = predict::fit_logistic(xt, yt, f);
  const IndexVector pred = model.predict(xe);

  MetricResult r;
  std::vector<Index> hits(static_cast<std::size_t>(f), 0), seen(static_cast<std::size_t>(f), 0);
  Index correct = 0;
  for (Index b = 0; b < ye.size(); ++b) {
    ++seen[static_cast<std::size_t>(ye(b))];
    if (pred(b) == ye(b)) {
      ++correct;
      ++hits[static_cast<std::size_t>(ye(b))];
    }
  }
  r.score = static_cast<double>(correct) / static_cast<double>(ye.size());
  for (Index i = 0; i < f; ++i)
    r.per_factor.push_back(seen[static_cast<std::size_t>(i)] > 0
                               ? static_cast<double>(hits[static_cast<std::size_t>(i)]) /
                                     static_cast<double>(seen[static_cast<std::size_t>(i)])
                               : kNaN);
  return r;
}

MetricResult factorvae_score(const FactorTable& factors, const Matrix& repr, std::uint64_t seed,
                             const BatchOptions& options) {
  const Index f = factors.factors();
  require_factors(factors, 2);
  const Canonical c = canonicalize(factors, repr);
  const Index d = c.z.cols();
  const Eigen::RowVectorXd mean = c.z.colwise().mean();
  const Eigen::RowVectorXd var = (c.z.rowwise() - mean).array().square().colwise().mean();
  const double max_var = var.maxCoeff();
  std::vector<bool> active(static_cast<std::size_t>(d), false);
  bool any = false;
  for (Index j = 0; j < d; ++j) {
    active[static_cast<std::size_t>(j)] = max_var > 0 && var(j) > 0 && var(j) / max_var >= options.prune_threshold;
    any = any || active[static_cast<std::size_t>(j)];
  }
  if (!any) throw Error(ErrorCode::AllDimsPruned, kModule, "every latent dim falls below the variance threshold");
  const Eigen::RowVectorXd scale = var.cwiseSqrt().unaryExpr([](double s) { return s > 0 ? s : 1.0; });
  const Split split = split_rows(factors.rows(), 0.5, seed);

  // Returns (fixed factor, voting dim) per batch.
  auto votes = [&](const std::vector<Index>& rows, Index count, std::uint64_t stream) {
    std::vector<std::vector<std::vector<Index>>> groups;
    for (Index i = 0; i < f; ++i) groups.push_back(group_by(factors, i, rows));
    CounterRng rng(seed, stream);
    std::vector<std::pair<Index, Index>> out;
    Matrix sample(options.batch_size, d);
    for (Index b = 0; b < count; ++b) {
      const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(f)));
      const Index anchor = pick(rng, rows);
      const auto& grp = groups[static_cast<std::size_t>(i)][static_cast<std::size_t>(factors.codes(anchor, i))];
      for (Index p = 0; p < options.batch_size; ++p) sample.row(p) = c.z.row(pick(rng, grp)).cwiseQuotient(scale);
      const Eigen::RowVectorXd m = sample.colwise().mean();
      const Eigen::RowVectorXd v = (sample.rowwise() - m).array().square().colwise().mean();
      Index best = -1;
      for (Index j = 0; j < d; ++j)
        if (active[static_cast<std::size_t>(j)] && (best < 0 || v(j) < v(best))) best = j;
      out.emplace_back(i, best);
    }
    return out;
  };

  IndexMatrix table = IndexMatrix::Zero(d, f);
  for (const auto& [i, j] : votes(split.train, options.train_batches, 1)) ++table(j, i);
  std::vector<Index> cls(static_cast<std::size_t>(d), -1);
  for (Index j = 0; j < d; ++j) {
    if (table.row(j).sum() == 0) continue;
    Index best = 0;
    for (Index i = 1; i < f; ++i)
      if (table(j, i) > table(j, best)) best = i;
    cls[static_cast<std::size_t>(j)] = best;
  }

  MetricResult r;
  std::vector<Index> hits(static_cast<std::size_t>(f), 0), seen(static_cast<std::size_t>(f), 0);
  Index correct = 0;
  const auto eval = votes(split.test, options.eval_batches, 2);
  for (const auto& [i, j] : eval) {
    ++seen[static_cast<std::size_t>(i)];
    if (cls[static_cast<std::size_t>(j)] == i) {
      ++correct;
      ++hits[static_cast<std::size_t>(i)];
    }
  }
  r.score = static_cast<double>(correct) / static_cast<double>(eval.size());
  for (Index i = 0; i < f; ++i)
    r.per_factor.push_back(seen[static_cast<std::size_t>(i)] > 0
                               ? static_cast<double>(hits[static_cast<std::size_t>(i)]) /
                                     static_cast<double>(seen[static_cast<std::size_t>(i)])
                               : kNaN);
  for (Index j = 0; j < d; ++j)
    if (!active[static_cast<std::size_t>(j)]) r.flags.insert("pruned_dims");
  return r;
}

IndexMatrix factor_codes(const FactorTable& factors, Index bins) {
  IndexMatrix codes(factors.rows(), factors.factors());
  for (Index i = 0; i < factors.factors(); ++i) {
    if (factors.space[static_cast<std::size_t>(i)].cardinality() <= bins) {
      codes.col(i) = factors.codes.col(i);
    } else {
      codes.col(i) = info::discretize(factors.normalized.col(i), bins).codes.col(0);
    }
  }
  return codes;
}

MetricResult mig(const FactorTable& factors, const Matrix& repr, Index bins, info::Binning binning) {
  const Canonical c = canonicalize(factors, repr);
  if (c.z.cols() < 2) throw Error(ErrorCode::InvalidArgument, kModule, "MIG needs at least two latent dims");
  const IndexMatrix g = factor_codes(factors, bins);
  const Matrix mi = info::mutual_information_matrix(info::discretize(c.z, bins, binning).codes, g);
  MetricResult r;
  for (Index i = 0; i < factors.factors(); ++i) {
    const double h = info::entropy(g.col(i));
    if (!(h > 0)) {
      r.flags.insert("zero_entropy_factor:" + factors.space[static_cast<std::size_t>(i)].name);
      r.per_factor.push_back(kNaN);
      continue;
    }
    std::vector<double> col(mi.col(i).data(), mi.col(i).data() + mi.rows());
    std::sort(col.begin(), col.end(), std::greater<>());
    r.per_factor.push_back((col[0] - col[1]) / h);
  }
  r.score = mean_of_defined(r.per_factor);
  return r;
}

double dci_disentanglement(const Matrix& importance) {
  const Index f = importance.rows();
  const double total = importance.sum();
  if (!(total > 0)) return 0.0;
  double acc = 0;
  for (Index j = 0; j < importance.cols(); ++j) {
    const double s = importance.col(j).sum();
    if (!(s > 0)) continue;
    double h = 0;
    for (Index i = 0; i < f; ++i) {
      const double p = importance(i, j) / s;
      if (p > 0) h -= p * std::log(p);
    }
    const double dj = f > 1 ? 1.0 - h / std::log(static_cast<double>(f)) : 1.0;
    acc += s / total * dj;
  }
  return acc;
}

double dci_completeness(const Matrix& importance) { return dci_disentanglement(importance.transpose()); }

DciResult dci(const FactorTable& factors, const Matrix& repr, std::uint64_t seed,
              const predict::PredictorConfig& config, double train_fraction) {
  const Canonical c = canonicalize(factors, repr);
  const Index f = factors.factors(), d = c.z.cols();
  const Split split = split_rows(factors.rows(), train_fraction, seed);
  const Matrix xt = rows_of(c.z, split.train), xe = rows_of(c.z, split.test);
  Matrix importance(f, d);
  std::vector<double> info_score(static_cast<std::size_t>(f), 0.0);
  std::vector<char> degenerate(static_cast<std::size_t>(f), 0);

  parallel_for(static_cast<std::size_t>(f), [&](std::size_t fi) {
    const auto i = static_cast<Index>(fi);
    const FactorSpec& spec = factors.space[fi];
    const bool categorical = spec.kind == FactorKind::categorical;
    const int classes = categorical ? static_cast<int>(spec.cardinality()) : 0;
    auto target = [&](const std::vector<Index>& rows) {
      Vector y(static_cast<Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        y(static_cast<Index>(r)) = categorical ? static_cast<double>(factors.codes(rows[r], i)) : factors.normalized(rows[r], i);
      return y;
    };
    const Vector yt = target(split.train), ye = target(split.test);
    const predict::Forest forest = predict::fit_forest(xt, yt, classes, config, seed * 0x9e37 + fi);
    importance.row(i) = forest.importance.transpose();
    const bool constant_inputs = (xt.rowwise() - xt.row(0)).cwiseAbs().maxCoeff() == 0;
    degenerate[fi] = constant_inputs ? 1 : 0;
    if (constant_inputs) importance.row(i).setZero();
    double score = 0;
    if (categorical) {
      Index hit = 0;
      for (Index r = 0; r < xe.rows(); ++r) {
        Index best = 0;
        forest.predict(xe.row(r)).maxCoeff(&best);
        if (best == static_cast<Index>(ye(r))) ++hit;
      }
      score = static_cast<double>(hit) / static_cast<double>(xe.rows());
    } else {
      double ss_res = 0;
      const double mean = ye.mean();
      const double ss_tot = (ye.array() - mean).square().sum();
      for (Index r = 0; r < xe.rows(); ++r) {
        const double e = forest.predict(xe.row(r))(0) - ye(r);
        ss_res += e * e;
      }
      score = ss_tot > 0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 0.0;
    }
    info_score[fi] = score;
  });

  DciResult r;
  r.importance.R = uncanonical_cols(importance, c.order);
  r.importance.source = "forest";
  r.flags.insert("forest-importance");
  for (Index i = 0; i < f; ++i)
    if (degenerate[static_cast<std::size_t>(i)]) r.importance.flags.insert("degenerate_predictor");
  if (!(importance.sum() > 0)) {
    r.flags.insert("degenerate_predictor");
  } else {
    r.disentanglement = dci_disentanglement(importance);
    r.completeness = dci_completeness(importance);
  }
  r.per_factor_informativeness = info_score;
  r.informativeness = std::accumulate(info_score.begin(), info_score.end(), 0.0) / static_cast<double>(f);
  return r;
}

double sap_from_scores(const Matrix& scores) {
  if (scores.rows() == 0) return 0.0;
  double acc = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(scores.cols()));
    for (Index j = 0; j < scores.cols(); ++j) row[static_cast<std::size_t>(j)] = scores(i, j);
    std::sort(row.begin(), row.end(), std::greater<>());
    acc += row.size() > 1 ? row[0] - row[1] : row[0];
  }
  return acc / static_cast<double>(scores.rows());
}

SapResult sap(const FactorTable& factors, const Matrix& repr, std::uint64_t seed, double train_fraction) {
  const Canonical c = canonicalize(factors, repr);
  const Index f = factors.factors(), d = c.z.cols();
  const Split split = split_rows(factors.rows(), train_fraction, seed);
  Matrix s(f, d);
  bool clamped = false;
  for (Index i = 0; i < f; ++i) {
    const FactorSpec& spec = factors.space[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d; ++j) {
      if (spec.kind == FactorKind::categorical) {
        const Index k = spec.cardinality();
        std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
        std::vector<Index> count(static_cast<std::size_t>(k), 0);
        for (Index r : split.train) {
          sum[static_cast<std::size_t>(factors.codes(r, i))] += c.z(r, j);
          ++count[static_cast<std::size_t>(factors.codes(r, i))];
        }
        Index hit = 0;
        for (Index r : split.test) {
          Index best = -1;
          double best_dist = 0;
          for (Index v = 0; v < k; ++v) {
            if (count[static_cast<std::size_t>(v)] == 0) continue;
            const double dist =
                std::abs(c.z(r, j) - sum[static_cast<std::size_t>(v)] / static_cast<double>(count[static_cast<std::size_t>(v)]));
            if (best < 0 || dist < best_dist) {
              best = v;
              best_dist = dist;
            }
          }
          if (best == factors.codes(r, i)) ++hit;
        }
        s(i, j) = static_cast<double>(hit) / static_cast<double>(split.test.size());
      } else {
        double mz = 0, my = 0;
        for (Index r : split.train) {
          mz += c.z(r, j);
          my += factors.normalized(r, i);
        }
        mz /= static_cast<double>(split.train.size());
        my /= static_cast<double>(split.train.size());
        double szz = 0, szy = 0;
        for (Index r : split.train) {
          szz += (c.z(r, j) - mz) * (c.z(r, j) - mz);
          szy += (c.z(r, j) - mz) * (factors.normalized(r, i) - my);
        }
        const double slope = szz > 0 ? szy / szz : 0.0;
        double ty = 0;
        for (Index r : split.test) ty += factors.normalized(r, i);
        ty /= static_cast<double>(split.test.size());
        double ss_res = 0, ss_tot = 0;
        for (Index r : split.test) {
          const double y = factors.normalized(r, i);
          const double e = my + slope * (c.z(r, j) - mz) - y;
          ss_res += e * e;
          ss_tot += (y - ty) * (y - ty);
        }
        double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
        if (r2 < 0) {
          r2 = 0;
          clamped = true;
        }
        s(i, j) = std::min(r2, 1.0);
      }
    }
  }
  SapResult r;
  r.scores.S = uncanonical_cols(s, c.order);
  r.scores.clamped = clamped;
  for (Index i = 0; i < f; ++i) r.per_factor.push_back(sap_from_scores(s.row(i)));
  r.score = sap_from_scores(s);
  return r;
}

std::vector<double> modularity_from_mi(const Matrix& mi) {
  const Index f = mi.cols();
  std::vector<double> out;
  for (Index j = 0; j < mi.rows(); ++j) {
    const Index top = argmax_lowest(mi.row(j));
    const double best = mi(j, top);
    if (!(best > 0)) {
      out.push_back(kNaN);
      continue;
    }
    double dev = 0;
    for (Index i = 0; i < f; ++i)
      if (i != top) dev += mi(j, i) * mi(j, i);
    out.push_back(f > 1 ? 1.0 - dev / (best * best * static_cast<double>(f - 1)) : 1.0);
  }
  return out;
}

ModularityResult modularity_explicitness(const FactorTable& factors, const Matrix& repr, std::uint64_t seed, Index bins,
                                         double train_fraction, info::Binning binning) {
  require_factors(factors, 2);
  const Canonical c = canonicalize(factors, repr);
  const Index f = factors.factors();
  ModularityResult r;

  const IndexMatrix g = factor_codes(factors, bins);
  const Matrix mi = info::mutual_information_matrix(info::discretize(c.z, bins, binning).codes, g);
  const std::vector<double> per_dim = modularity_from_mi(mi);
  if (std::any_of(per_dim.begin(), per_dim.end(), [](double v) { return std::isnan(v); }))
    r.flags.insert("zero_mi_dim");
  r.per_dim_modularity = uncanonical(per_dim, c.order);
  r.modularity = mean_of_defined(per_dim);

  const Split split = split_rows(factors.rows(), train_fraction, seed);
  const Matrix xt = rows_of(c.z, split.train), xe = rows_of(c.z, split.test);
  std::vector<double> expl(static_cast<std::size_t>(f), 0.0);
  parallel_for(static_cast<std::size_t>(f), [&](std::size_t fi) {
    const auto i = static_cast<Index>(fi);
    const Index k = factors.space[fi].cardinality();
    IndexVector yt(static_cast<Index>(split.train.size()));
    for (std::size_t t = 0; t < split.train.size(); ++t) yt(static_cast<Index>(t)) = factors.codes(split.train[t], i);
    const Matrix probs = predict::fit_logistic(xt, yt, k).probabilities(xe);
    double acc = 0;
    Index used = 0;
    for (Index cls = 0; cls < k; ++cls) {
      std::vector<bool> positive(split.test.size());
      for (std::size_t t = 0; t < split.test.size(); ++t) positive[t] = factors.codes(split.test[t], i) == cls;
      if (const auto auc = predict::roc_auc(probs.col(cls), positive)) {
        acc += *auc;
        ++used;
      }
    }
    expl[fi] = used > 0 ? acc / static_cast<double>(used) : 0.5;
  });
  r.per_factor_explicitness = expl;
  r.explicitness = std::accumulate(expl.begin(), expl.end(), 0.0) / static_cast<double>(f);
  return r;
}

MetricResult irs(const FactorTable& factors, const Matrix& repr) {
  const Canonical c = canonicalize(factors, repr);
  const Index n = c.z.rows(), d = c.z.cols(), f = factors.factors();
  const Eigen::RowVectorXd mean = c.z.colwise().mean();
  const Eigen::RowVectorXd maxdev = (c.z.rowwise() - mean).cwiseAbs().colwise().maxCoeff();
  const Eigen::RowVectorXd total_ss = (c.z.rowwise() - mean).array().square().colwise().sum();

  MetricResult r;
  double weighted = 0, weights = 0;
  for (Index i = 0; i < f; ++i) {
    const Index ki = factors.space[static_cast<std::size_t>(i)].cardinality();
    Matrix anchor_sum = Matrix::Zero(ki, d);
    std::vector<Index> anchor_n(static_cast<std::size_t>(ki), 0);
    for (Index row = 0; row < n; ++row) {
      anchor_sum.row(factors.codes(row, i)) += c.z.row(row);
      ++anchor_n[static_cast<std::size_t>(factors.codes(row, i))];
    }
    Matrix anchor_mean = Matrix::Zero(ki, d);
    for (Index v = 0; v < ki; ++v) {
      const Index cnt = anchor_n[static_cast<std::size_t>(v)];
      if (cnt == 0) continue;
      if (cnt < 2)
        throw Error(ErrorCode::InsufficientRepetition, kModule,
                    "factor " + factors.space[static_cast<std::size_t>(i)].name + " has an anchor value seen once");
      anchor_mean.row(v) = anchor_sum.row(v) / static_cast<double>(cnt);
    }
    // Largest conditional-mean shift per (anchor value, dim) over nuisance cells.
    Matrix worst = Matrix::Zero(ki, d);
    for (Index k = 0; k < f; ++k) {
      if (k == i) continue;
      const Index kk = factors.space[static_cast<std::size_t>(k)].cardinality();
      Matrix cell_sum = Matrix::Zero(ki * kk, d);
      std::vector<Index> cell_n(static_cast<std::size_t>(ki * kk), 0);
      for (Index row = 0; row < n; ++row) {
        const Index cell = factors.codes(row, i) * kk + factors.codes(row, k);
        cell_sum.row(cell) += c.z.row(row);
        ++cell_n[static_cast<std::size_t>(cell)];
      }
      for (Index cell = 0; cell < ki * kk; ++cell) {
        const Index cnt = cell_n[static_cast<std::size_t>(cell)];
        if (cnt < 2) continue;
        const Index v = cell / kk;
        const Eigen::RowVectorXd shift = (cell_sum.row(cell) / static_cast<double>(cnt) - anchor_mean.row(v)).cwiseAbs();
        worst.row(v) = worst.row(v).cwiseMax(shift);
      }
    }
    Eigen::RowVectorXd disagreement = Eigen::RowVectorXd::Zero(d);
    Eigen::RowVectorXd between = Eigen::RowVectorXd::Zero(d);
    Index present = 0;
    for (Index v = 0; v < ki; ++v) {
      const Index cnt = anchor_n[static_cast<std::size_t>(v)];
      if (cnt == 0) continue;
      disagreement += worst.row(v);
      between += static_cast<double>(cnt) * (anchor_mean.row(v) - mean).array().square().matrix();
      ++present;
    }
    disagreement /= static_cast<double>(present);
    Eigen::RowVectorXd eta2 = Eigen::RowVectorXd::Zero(d);
    for (Index j = 0; j < d; ++j) eta2(j) = total_ss(j) > 0 ? between(j) / total_ss(j) : 0.0;
    const Index aligned = argmax_lowest(eta2);
    const double w = maxdev(aligned);
    const double norm = w > 0 ? std::min(1.0, disagreement(aligned) / w) : 0.0;
    r.per_factor.push_back(1.0 - norm);
    weighted += w * norm;
    weights += w;
  }
  if (!(weights > 0)) {
    r.flags.insert("degenerate_representation");
    r.score = 0;
    return r;
  }
  r.score = 1.0 - weighted / weights;
  return r;
}

}  // namespace repreval::disent
