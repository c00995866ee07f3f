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

#include "repreval/predictors.hpp"
#include "repreval/types.hpp"

#include <utility>
#include <vector>

namespace repreval::match {

struct Assignment {
  std::vector<std::pair<Index, Index>> pairs;
  double total_cost = 0;
};

/// Minimum-cost one-to-one assignment of size min(rows, cols). Pairs are
/// (row, col) sorted by row; among optimal assignments the lexicographically
/// smallest pair list is returned.
Assignment hungarian(const Matrix& cost);

/// Cost of the optimal assignment, no tie-breaking pass.
double optimal_cost(const Matrix& cost);

/// objects x slots matrix of the downstream loss, cost(m, k) = l(output_k, y_m),
/// optionally restricted to a subset of heads.
Matrix loss_matrix(const predict::TargetLayout& layout, const Matrix& slot_outputs, const Matrix& objects,
                   const std::vector<bool>* heads = nullptr);

// The strategies below return (slot, object) pairs sorted by slot.

Assignment match_loss(const predict::TargetLayout& layout, const Matrix& slot_outputs, const Matrix& objects);

/// Rows are flattened masks (slots x pixels, objects x pixels); cost is the
/// negative cosine similarity, 0 when either mask is empty.
Assignment match_mask(const Matrix& pred_masks, const Matrix& gt_masks);

/// Stable lexicographic sort of objects by canonical_order; the object at
/// sorted position k goes to slot k. For objects flagged in object_ood, the
/// properties flagged in ood_property become the least significant keys.
Assignment match_deterministic(const Matrix& objects, const std::vector<Index>& canonical_order, Index slots,
                               const std::vector<bool>& object_ood = {}, const std::vector<bool>& ood_property = {});

/// Step 1 matches on properties that are in-distribution for every object and
/// keeps the OOD objects' pairs; step 2 rematches the rest on the full loss.
Assignment two_step_ood_match(const predict::TargetLayout& layout, const Matrix& slot_outputs, const Matrix& objects,
                              const std::vector<bool>& object_ood, const std::vector<bool>& ood_property);

}  // namespace repreval::match
