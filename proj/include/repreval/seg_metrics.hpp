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

#include <cstdint>
#include <span>
#include <vector>

namespace repreval::seg {

// Pair counts of two partitions of the same n elements, exact.
struct PairCounts {
  std::int64_t n = 0;
  __int128 pairs = 0;      // C(n, 2)
  __int128 same_both = 0;  // sum_ij C(n_ij, 2)
  __int128 same_a = 0;     // sum_i C(a_i, 2)
  __int128 same_b = 0;     // sum_j C(b_j, 2)
};

PairCounts pair_counts(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

double rand_index(std::span<const std::int64_t> a, std::span<const std::int64_t> b);
/// 0 when the denominator vanishes (both partitions all-same or all-distinct).
double adjusted_rand_index(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

template <typename A, typename B>
double adjusted_rand_index(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  std::vector<std::int64_t> va(static_cast<std::size_t>(a.size())), vb(static_cast<std::size_t>(b.size()));
  Index i = 0;
  for (auto& v : va) v = static_cast<std::int64_t>(a.derived().reshaped()(i++));
  i = 0;
  for (auto& v : vb) v = static_cast<std::int64_t>(b.derived().reshaped()(i++));
  return adjusted_rand_index(std::span<const std::int64_t>(va), std::span<const std::int64_t>(vb));
}

/// ARI on the pixels whose ground-truth label is foreground. Identical
/// trivial partitions (e.g. one object, predicted exactly) score 1.
double ari_foreground(const LabelMap& pred, const LabelMap& gt, const std::vector<bool>& gt_foreground);

template <typename A, typename B>
double iou(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b);

/// Weighted (SC) or unweighted (mSC) covering of the foreground ground-truth
/// masks by the best-overlapping non-empty predicted mask. Negative predicted
/// labels mark pixels that belong to no predicted mask.
double segmentation_covering(const LabelMap& pred, const LabelMap& gt, const std::vector<bool>& gt_foreground,
                             bool weighted);

struct SegScores {
  double ari_fg = 0;
  double sc = 0;
  double msc = 0;
  Index images = 0;
  Index skipped = 0;  // images without foreground pixels
};

/// Per-image metrics averaged in image order.
SegScores evaluate_masks(const MaskSet& pred, const MaskSet& gt);


template <typename A, typename B>
double iou(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorCode::ShapeMismatch, "seg-metrics", "mask shapes differ");
  const auto ab = a.derived().template cast<bool>().array();
  const auto bb = b.derived().template cast<bool>().array();
  const Index inter = (ab && bb).count();
  const Index uni = (ab || bb).count();
  if (uni == 0) throw Error(ErrorCode::EmptyUnion, "seg-metrics", "both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace repreval::seg
