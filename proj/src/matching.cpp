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

#include "repreval/matching.hpp"

#include "repreval/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace repreval::match {
namespace {

constexpr const char* kModule = "matching";

// Potentials-based O(n^2 m) assignment for rows <= cols; result[r] = column.
std::vector<Index> solve_wide(const Matrix& a) {
  const Index n = a.rows(), m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0), v(static_cast<std::size_t>(m + 1), 0);
  std::vector<Index> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (used[js]) continue;
        const double cur = a(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[js];
        if (cur < minv[js]) {
          minv[js] = cur;
          way[js] = j0;
        }
        if (minv[js] < delta) {
          delta = minv[js];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (used[js]) {
          u[static_cast<std::size_t>(p[js])] += delta;
          v[js] -= delta;
        } else {
          minv[js] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> result(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) result[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return result;
}

// result[r] = column or -1 when row r stays unmatched.
std::vector<Index> solve(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return std::vector<Index>(static_cast<std::size_t>(a.rows()), -1);
  if (a.rows() <= a.cols()) return solve_wide(a);
  const std::vector<Index> by_col = solve_wide(a.transpose());
  std::vector<Index> result(static_cast<std::size_t>(a.rows()), -1);
  for (Index c = 0; c < a.cols(); ++c) result[static_cast<std::size_t>(by_col[static_cast<std::size_t>(c)])] = c;
  return result;
}

double cost_of(const Matrix& a, const std::vector<Index>& sol) {
  double s = 0;
  for (std::size_t r = 0; r < sol.size(); ++r)
    if (sol[r] >= 0) s += a(static_cast<Index>(r), sol[r]);
  return s;
}

Matrix submatrix(const Matrix& a, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Matrix s(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) s(static_cast<Index>(i), static_cast<Index>(j)) = a(rows[i], cols[j]);
  return s;
}

void check_finite(const Matrix& cost) {
  if (!cost.allFinite()) throw Error(ErrorCode::NonFiniteCost, kModule, "cost matrix has non-finite entries");
}

Assignment to_slot_object(const Assignment& a) {
  Assignment out;
  out.total_cost = a.total_cost;
  for (const auto& [m, k] : a.pairs) out.pairs.emplace_back(k, m);
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

}  // namespace

double optimal_cost(const Matrix& cost) {
  check_finite(cost);
  return cost_of(cost, solve(cost));
}

Assignment hungarian(const Matrix& cost) {
  check_finite(cost);
  const Index n = cost.rows(), m = cost.cols();
  if (n < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, kModule, "cost matrix must be non-empty");
  std::vector<Index> best = solve(cost);
  const double optimum = cost_of(cost, best);
  const double tol = 1e-12 * (1.0 + cost.cwiseAbs().maxCoeff() * static_cast<double>(std::max(n, m)));

  // Greedy row-by-row refinement towards the lexicographically smallest optimum.
  std::vector<Index> chosen(static_cast<std::size_t>(n), -1);
  std::vector<char> col_used(static_cast<std::size_t>(m), 0);
  double fixed = 0;
  for (Index r = 0; r < n; ++r) {
    const Index incumbent = best[static_cast<std::size_t>(r)];
    std::vector<Index> rest_rows;
    for (Index q = r + 1; q < n; ++q) rest_rows.push_back(q);
    bool moved = false;
    for (Index c = 0; c < m && (incumbent < 0 || c < incumbent); ++c) {
      if (col_used[static_cast<std::size_t>(c)]) continue;
      std::vector<Index> rest_cols;
      for (Index q = 0; q < m; ++q)
        if (!col_used[static_cast<std::size_t>(q)] && q != c) rest_cols.push_back(q);
      const Matrix sub = submatrix(cost, rest_rows, rest_cols);
      const std::vector<Index> sub_sol = solve(sub);
      // The subproblem must still place min(rows, cols) pairs overall.
      Index placed = 0;
      for (Index x : chosen)
        if (x >= 0) ++placed;
      Index sub_placed = 0;
      for (Index x : sub_sol)
        if (x >= 0) ++sub_placed;
      if (placed + 1 + sub_placed != std::min(n, m)) continue;
      const double total = fixed + cost(r, c) + cost_of(sub, sub_sol);
      if (total <= optimum + tol) {
        chosen[static_cast<std::size_t>(r)] = c;
        col_used[static_cast<std::size_t>(c)] = 1;
        fixed += cost(r, c);
        for (std::size_t i = 0; i < rest_rows.size(); ++i)
          best[static_cast<std::size_t>(rest_rows[i])] = sub_sol[i] >= 0 ? rest_cols[static_cast<std::size_t>(sub_sol[i])] : -1;
        moved = true;
        break;
      }
    }
    if (!moved && incumbent >= 0) {
      chosen[static_cast<std::size_t>(r)] = incumbent;
      col_used[static_cast<std::size_t>(incumbent)] = 1;
      fixed += cost(r, incumbent);
    }
  }

  Assignment a;
  for (Index r = 0; r < n; ++r)
    if (chosen[static_cast<std::size_t>(r)] >= 0) a.pairs.emplace_back(r, chosen[static_cast<std::size_t>(r)]);
  a.total_cost = cost_of(cost, chosen);
  return a;
}

Matrix loss_matrix(const predict::TargetLayout& layout, const Matrix& slot_outputs, const Matrix& objects,
                   const std::vector<bool>* heads) {
  if (slot_outputs.cols() != layout.output_width() || objects.cols() != layout.heads())
    throw Error(ErrorCode::WidthMismatch, kModule, "predictions or targets do not match the layout");
  Matrix c(objects.rows(), slot_outputs.rows());
  for (Index m = 0; m < objects.rows(); ++m)
    for (Index k = 0; k < slot_outputs.rows(); ++k)
      c(m, k) = predict::sample_loss(layout, slot_outputs.row(k), objects.row(m), nullptr, heads);
  return c;
}

Assignment match_loss(const predict::TargetLayout& layout, const Matrix& slot_outputs, const Matrix& objects) {
  const Matrix c = loss_matrix(layout, slot_outputs, objects);
  return to_slot_object(hungarian(c));
}

Assignment match_mask(const Matrix& pred_masks, const Matrix& gt_masks) {
  if (pred_masks.cols() != gt_masks.cols())
    throw Error(ErrorCode::WidthMismatch, kModule, "masks differ in pixel count");
  Matrix c(gt_masks.rows(), pred_masks.rows());
  for (Index m = 0; m < gt_masks.rows(); ++m)
    for (Index k = 0; k < pred_masks.rows(); ++k) {
      const double na = gt_masks.row(m).norm(), nb = pred_masks.row(k).norm();
      c(m, k) = na > 0 && nb > 0 ? -gt_masks.row(m).dot(pred_masks.row(k)) / (na * nb) : 0.0;
    }
  return to_slot_object(hungarian(c));
}

Assignment match_deterministic(const Matrix& objects, const std::vector<Index>& canonical_order, Index slots,
                               const std::vector<bool>& object_ood, const std::vector<bool>& ood_property) {
  const Index m = objects.rows();
  auto key_order = [&](Index obj) {
    std::vector<Index> order = canonical_order;
    if (!object_ood.empty() && object_ood[static_cast<std::size_t>(obj)] && !ood_property.empty())
      std::stable_partition(order.begin(), order.end(),
                            [&](Index p) { return !ood_property[static_cast<std::size_t>(p)]; });
    return order;
  };
  std::vector<Index> objs(static_cast<std::size_t>(m));
  std::iota(objs.begin(), objs.end(), Index{0});
  std::stable_sort(objs.begin(), objs.end(), [&](Index a, Index b) {
    const auto ka = key_order(a), kb = key_order(b);
    for (std::size_t i = 0; i < ka.size(); ++i) {
      const double va = objects(a, ka[i]), vb = objects(b, kb[i]);
      if (va != vb) return va < vb;
    }
    return false;
  });
  Assignment out;
  for (Index k = 0; k < std::min(m, slots); ++k) out.pairs.emplace_back(k, objs[static_cast<std::size_t>(k)]);
  return out;
}

Assignment two_step_ood_match(const predict::TargetLayout& layout, const Matrix& slot_outputs, const Matrix& objects,
                              const std::vector<bool>& object_ood, const std::vector<bool>& ood_property) {
  const Index m = objects.rows(), k = slot_outputs.rows();
  if (static_cast<Index>(object_ood.size()) != m || static_cast<Index>(ood_property.size()) != layout.heads())
    throw Error(ErrorCode::LengthMismatch, kModule, "OOD flags do not match objects or properties");
  const bool any_ood = std::find(object_ood.begin(), object_ood.end(), true) != object_ood.end();
  if (!any_ood) return match_loss(layout, slot_outputs, objects);

  std::vector<bool> shared(ood_property.size());
  for (std::size_t p = 0; p < shared.size(); ++p) shared[p] = !ood_property[p];
  const Matrix restricted = loss_matrix(layout, slot_outputs, objects, &shared);
  const Matrix full = loss_matrix(layout, slot_outputs, objects);

  Assignment out;
  std::vector<char> slot_taken(static_cast<std::size_t>(k), 0);
  for (const auto& [obj, slot] : hungarian(restricted).pairs)
    if (object_ood[static_cast<std::size_t>(obj)]) {
      out.pairs.emplace_back(slot, obj);
      out.total_cost += full(obj, slot);
      slot_taken[static_cast<std::size_t>(slot)] = 1;
    }
  std::vector<Index> rest_objs, rest_slots;
  for (Index i = 0; i < m; ++i)
    if (!object_ood[static_cast<std::size_t>(i)]) rest_objs.push_back(i);
  for (Index s = 0; s < k; ++s)
    if (!slot_taken[static_cast<std::size_t>(s)]) rest_slots.push_back(s);
  if (!rest_objs.empty() && !rest_slots.empty()) {
    const Matrix sub = submatrix(full, rest_objs, rest_slots);
    for (const auto& [i, j] : hungarian(sub).pairs) {
      const Index obj = rest_objs[static_cast<std::size_t>(i)], slot = rest_slots[static_cast<std::size_t>(j)];
      out.pairs.emplace_back(slot, obj);
      out.total_cost += full(obj, slot);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

}  // namespace repreval::match
