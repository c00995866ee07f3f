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

#include "repreval/seg_metrics.hpp"

#include "repreval/error.hpp"
#include "repreval/parallel.hpp"

#include <map>
#include <unordered_map>

namespace repreval::seg {
namespace {

constexpr const char* kModule = "seg-metrics";

__int128 choose2(std::int64_t k) { return static_cast<__int128>(k) * (k - 1) / 2; }

std::vector<std::int64_t> compact(std::span<const std::int64_t> labels, std::int64_t& count) {
  std::unordered_map<std::int64_t, std::int64_t> ids;
  std::vector<std::int64_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = ids.try_emplace(labels[i], static_cast<std::int64_t>(ids.size()));
    out[i] = it->second;
  }
  count = static_cast<std::int64_t>(ids.size());
  return out;
}

double ratio(__int128 num, __int128 den) {
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

}  // namespace

PairCounts pair_counts(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, kModule, "partitions differ in length");
  if (a.size() < 2) throw Error(ErrorCode::TooFewElements, kModule, "need at least two elements");
  std::int64_t ka = 0, kb = 0;
  const auto ca = compact(a, ka), cb = compact(b, kb);
  std::vector<std::int64_t> rows(static_cast<std::size_t>(ka), 0), cols(static_cast<std::size_t>(kb), 0);
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> table;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    ++rows[static_cast<std::size_t>(ca[i])];
    ++cols[static_cast<std::size_t>(cb[i])];
    ++table[{ca[i], cb[i]}];
  }
  PairCounts p;
  p.n = static_cast<std::int64_t>(a.size());
  p.pairs = choose2(p.n);
  for (const auto& [key, c] : table) p.same_both += choose2(c);
  for (auto c : rows) p.same_a += choose2(c);
  for (auto c : cols) p.same_b += choose2(c);
  return p;
}

double rand_index(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  const PairCounts p = pair_counts(a, b);
  const __int128 m00 = p.pairs - p.same_a - p.same_b + p.same_both;
  return ratio(p.same_both + m00, p.pairs);
}

double adjusted_rand_index(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  const PairCounts p = pair_counts(a, b);
  // Scaled by 2 C(n,2) so that only one division remains.
  const __int128 num = 2 * (p.same_both * p.pairs - p.same_a * p.same_b);
  const __int128 den = (p.same_a + p.same_b) * p.pairs - 2 * p.same_a * p.same_b;
  if (den == 0) return 0.0;
  return ratio(num, den);
}

double ari_foreground(const LabelMap& pred, const LabelMap& gt, const std::vector<bool>& gt_foreground) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw Error(ErrorCode::ShapeMismatch, kModule, "predicted and ground-truth maps differ in shape");
  std::vector<std::int64_t> a, b;
  for (Index i = 0; i < gt.size(); ++i) {
    const auto g = gt.data()[i];
    if (g >= 0 && static_cast<std::size_t>(g) < gt_foreground.size() && gt_foreground[static_cast<std::size_t>(g)]) {
      a.push_back(pred.data()[i]);
      b.push_back(g);
    }
  }
  if (a.empty()) throw Error(ErrorCode::NoForegroundPixels, kModule, "ground truth has no foreground pixels");
  if (a.size() == 1) return 1.0;
  // Zero ARI denominator: both partitions all-same or both all-distinct.
  const PairCounts p = pair_counts(std::span<const std::int64_t>(a), std::span<const std::int64_t>(b));
  if ((p.same_a + p.same_b) * p.pairs == 2 * p.same_a * p.same_b) return 1.0;
  return adjusted_rand_index(std::span<const std::int64_t>(a), std::span<const std::int64_t>(b));
}

double segmentation_covering(const LabelMap& pred, const LabelMap& gt, const std::vector<bool>& gt_foreground,
                             bool weighted) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw Error(ErrorCode::ShapeMismatch, kModule, "predicted and ground-truth maps differ in shape");
  // Sizes and pairwise intersections from one pass over the pixels.
  std::map<std::int32_t, Index> gt_size, pred_size;
  std::map<std::pair<std::int32_t, std::int32_t>, Index> inter;
  for (Index i = 0; i < gt.size(); ++i) {
    const auto g = gt.data()[i], p = pred.data()[i];
    ++gt_size[g];
    ++pred_size[p];
    ++inter[{g, p}];
  }
  double total = 0, weight = 0;
  for (const auto& [g, size] : gt_size) {
    if (g < 0 || static_cast<std::size_t>(g) >= gt_foreground.size() || !gt_foreground[static_cast<std::size_t>(g)])
      continue;
    double best = 0;
    for (const auto& [p, psize] : pred_size) {
      if (p < 0) continue;
      const auto it = inter.find({g, p});
      const Index in = it == inter.end() ? 0 : it->second;
      best = std::max(best, static_cast<double>(in) / static_cast<double>(size + psize - in));
    }
    const double w = weighted ? static_cast<double>(size) : 1.0;
    total += w * best;
    weight += w;
  }
  if (weight == 0) throw Error(ErrorCode::NoForegroundMasks, kModule, "ground truth has no foreground masks");
  return total / weight;
}

SegScores evaluate_masks(const MaskSet& pred, const MaskSet& gt) {
  if (pred.images() != gt.images()) throw Error(ErrorCode::LengthMismatch, kModule, "mask sets differ in image count");
  const auto n = static_cast<std::size_t>(gt.images());
  std::vector<double> ari(n), sc(n), msc(n);
  std::vector<char> ok(n, 1);
  parallel_for(n, [&](std::size_t i) {
    try {
      ari[i] = ari_foreground(pred.maps[i], gt.maps[i], gt.foreground);
      sc[i] = segmentation_covering(pred.maps[i], gt.maps[i], gt.foreground, true);
      msc[i] = segmentation_covering(pred.maps[i], gt.maps[i], gt.foreground, false);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoForegroundPixels && e.code() != ErrorCode::NoForegroundMasks) throw;
      ok[i] = 0;
    }
  });
  SegScores s;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) {
      ++s.skipped;
      continue;
    }
    s.ari_fg += ari[i];
    s.sc += sc[i];
    s.msc += msc[i];
    ++s.images;
  }
  if (s.images == 0) throw Error(ErrorCode::NoForegroundPixels, kModule, "no image has foreground pixels");
  s.ari_fg /= static_cast<double>(s.images);
  s.sc /= static_cast<double>(s.images);
  s.msc /= static_cast<double>(s.images);
  return s;
}

}  // namespace repreval::seg
