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

#include "repreval/downstream.hpp"

#include "repreval/error.hpp"
#include "repreval/matching.hpp"
#include "repreval/parallel.hpp"
#include "repreval/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace repreval::objects {
namespace {

constexpr const char* kModule = "downstream-objects";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Pairs = std::vector<std::pair<Index, Index>>;  // (slot, local object), sorted by object

struct SceneTargets {
  Matrix y;                  // visible objects x properties
  std::vector<Index> ids;    // object index within the scene
  std::vector<bool> ood;
};

SceneTargets visible_objects(const PropertyTable& props, Index scene) {
  const auto& s = props.scenes[static_cast<std::size_t>(scene)];
  SceneTargets t;
  for (Index m = 0; m < s.objects(); ++m)
    if (s.visible.empty() || s.visible[static_cast<std::size_t>(m)]) t.ids.push_back(m);
  t.y.resize(static_cast<Index>(t.ids.size()), s.values.cols());
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    t.y.row(static_cast<Index>(i)) = s.values.row(t.ids[i]);
    t.ood.push_back(!s.ood.empty() && s.ood[static_cast<std::size_t>(t.ids[i])]);
  }
  return t;
}

bool any_of(const std::vector<bool>& v) { return std::find(v.begin(), v.end(), true) != v.end(); }

// Slots sorted by content, so a permutation of the slots yields the same order of vectors.
std::vector<Index> canonical_slots(const Representation& repr, Index row) {
  std::vector<Index> order(static_cast<std::size_t>(repr.slots));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto sa = repr.slot(row, a), sb = repr.slot(row, b);
    return std::lexicographical_compare(sa.begin(), sa.end(), sb.begin(), sb.end());
  });
  return order;
}

Matrix slot_rows(const Representation& repr, Index row, const std::vector<Index>& order) {
  Matrix s(repr.slots, repr.slot_dim);
  for (Index k = 0; k < repr.slots; ++k) s.row(k) = repr.slot(row, order[static_cast<std::size_t>(k)]);
  return s;
}

Pairs sorted_by_object(const match::Assignment& a, const std::vector<Index>* slot_map) {
  Pairs p;
  for (const auto& [slot, obj] : a.pairs) p.emplace_back(slot_map ? (*slot_map)[static_cast<std::size_t>(slot)] : slot, obj);
  std::sort(p.begin(), p.end(), [](const auto& x, const auto& y) { return x.second < y.second; });
  return p;
}

match::Assignment loss_match(const predict::TargetLayout& layout, const Matrix& outputs, const SceneTargets& t,
                             const PropertyTable& props) {
  if (any_of(t.ood) && any_of(props.ood_property))
    return match::two_step_ood_match(layout, outputs, t.y, t.ood, props.ood_property);
  return match::match_loss(layout, outputs, t.y);
}

void require_trainable(const predict::PredictorConfig& c) {
  if (c.kind != predict::ModelKind::linear && c.kind != predict::ModelKind::mlp)
    throw Error(ErrorCode::UnsupportedKind, kModule, "object property prediction needs a linear or mlp predictor");
}

struct Collected {
  Matrix outputs, targets;
  std::vector<bool> ood;
};

std::vector<PropertyScore> score_rows(const predict::TargetLayout& layout, const PropertyTable& props,
                                      const Collected& c, std::vector<std::string>* flags) {
  std::vector<PropertyScore> out;
  auto subset = [&](int which) {  // 0 all, 1 id, 2 ood
    std::vector<Index> rows;
    for (Index i = 0; i < c.targets.rows(); ++i)
      if (which == 0 || (which == 1) != c.ood[static_cast<std::size_t>(i)]) rows.push_back(i);
    return rows;
  };
  std::vector<std::vector<predict::HeadScore>> parts;
  for (int which = 0; which < 3; ++which) {
    const auto rows = subset(which);
    if (rows.empty()) {
      parts.emplace_back();
      continue;
    }
    Matrix o(static_cast<Index>(rows.size()), c.outputs.cols()), t(static_cast<Index>(rows.size()), c.targets.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      o.row(static_cast<Index>(i)) = c.outputs.row(rows[i]);
      t.row(static_cast<Index>(i)) = c.targets.row(rows[i]);
    }
    parts.push_back(predict::evaluate(layout, o, t));
  }
  for (Index h = 0; h < layout.heads(); ++h) {
    PropertyScore s;
    s.name = props.properties[static_cast<std::size_t>(h)].name;
    s.categorical = layout.categorical(h);
    double* slots[3] = {&s.all, &s.id, &s.ood};
    for (int which = 0; which < 3; ++which) {
      const auto& part = parts[static_cast<std::size_t>(which)];
      if (part.empty()) {
        *slots[which] = kNaN;
        continue;
      }
      const auto& hs = part[static_cast<std::size_t>(h)];
      *slots[which] = hs.defined ? hs.score : kNaN;
      if (!hs.defined && flags) flags->push_back("zero_variance_target:" + s.name);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<PropertyScore> mean_scores(const std::vector<std::vector<PropertyScore>>& runs) {
  std::vector<PropertyScore> out = runs.front();
  for (std::size_t h = 0; h < out.size(); ++h) {
    double* dst[3] = {&out[h].all, &out[h].id, &out[h].ood};
    for (int w = 0; w < 3; ++w) {
      double s = 0;
      for (const auto& r : runs) {
        const double* src[3] = {&r[h].all, &r[h].id, &r[h].ood};
        s += *src[w];
      }
      *dst[w] = s / static_cast<double>(runs.size());
    }
  }
  return out;
}

// Per-scene mask matching, computed once: pairs (slot, local object).
std::vector<Pairs> mask_pairs(const Representation& repr, const PropertyTable& props, const MaskSet& pred,
                              const MaskSet& gt, Index first, Index count) {
  if (pred.images() < first + count || gt.images() < first + count)
    throw Error(ErrorCode::LengthMismatch, kModule, "mask sets do not cover every scene");
  std::vector<Pairs> out(static_cast<std::size_t>(count));
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    const Index scene = first + static_cast<Index>(i);
    const auto order = canonical_slots(repr, scene);
    const SceneTargets t = visible_objects(props, scene);
    const LabelMap& pm = pred.maps[static_cast<std::size_t>(scene)];
    const LabelMap& gm = gt.maps[static_cast<std::size_t>(scene)];
    Matrix a(repr.slots, pm.size()), b(static_cast<Index>(t.ids.size()), gm.size());
    for (Index k = 0; k < repr.slots; ++k)
      for (Index p = 0; p < pm.size(); ++p) a(k, p) = pm.data()[p] == order[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
    for (std::size_t m = 0; m < t.ids.size(); ++m)
      for (Index p = 0; p < gm.size(); ++p)
        b(static_cast<Index>(m), p) = gm.data()[p] == static_cast<std::int32_t>(t.ids[m] + 1) ? 1.0 : 0.0;
    if (!t.ids.empty()) out[i] = sorted_by_object(match::match_mask(a, b), &order);
  });
  return out;
}

}  // namespace

std::string to_string(Matching m) {
  switch (m) {
    case Matching::loss: return "loss";
    case Matching::mask: return "mask";
    case Matching::deterministic: return "deterministic";
  }
  return "loss";
}

Matching parse_matching(const std::string& text) {
  for (Matching m : {Matching::loss, Matching::mask, Matching::deterministic})
    if (text == to_string(m)) return m;
  throw Error(ErrorCode::InvalidArgument, kModule, "unknown matching '" + text + "'");
}

predict::TrainProtocol matched_baseline_protocol() {
  predict::TrainProtocol p;
  p.learning_rate = 0.02;
  p.batch_size = 64;
  p.max_steps = 2000;
  p.halve_every = 500;
  p.eval_every = 250;
  return p;
}

SceneSplit split_scenes(const DownstreamConfig& config, Index available) {
  SceneSplit s{config.train_scenes, config.val_scenes, config.test_scenes};
  const Index wanted = s.train + s.val + s.test;
  if (available < wanted) {
    const double r = static_cast<double>(available) / static_cast<double>(wanted);
    s.val = static_cast<Index>(std::floor(static_cast<double>(s.val) * r));
    s.test = static_cast<Index>(std::floor(static_cast<double>(s.test) * r));
    s.train = available - s.val - s.test;
  }
  if (s.train < 1 || s.test < 1) throw Error(ErrorCode::EmptyTrainSet, kModule, "too few scenes to split");
  return s;
}

SlottedModel train_slotted(const Representation& repr, const PropertyTable& props, const DownstreamConfig& config,
                           std::uint64_t seed, const MaskSet* pred_masks, const MaskSet* gt_masks) {
  require_trainable(config.predictor);
  if (!repr.is_slotted()) throw Error(ErrorCode::InvalidArgument, kModule, "slotted evaluation needs a slot representation");
  if (repr.rows() != props.scene_count()) throw Error(ErrorCode::LengthMismatch, kModule, "representation and scenes differ");
  if (repr.slots < props.max_objects()) throw Error(ErrorCode::InvalidArgument, kModule, "fewer slots than objects");
  if (config.matching == Matching::deterministic)
    throw Error(ErrorCode::InvalidArgument, kModule, "slotted evaluation uses loss or mask matching");
  if (config.matching == Matching::mask && (!pred_masks || !gt_masks))
    throw Error(ErrorCode::InvalidArgument, kModule, "mask matching needs predicted and ground-truth masks");

  const SceneSplit split = split_scenes(config, props.scene_count());
  SlottedModel model;
  model.layout = predict::TargetLayout::from_properties(props.properties);
  model.config = config;
  model.slot_dim = repr.slot_dim;
  CounterRng init(seed, 2);
  const int hidden = config.predictor.kind == predict::ModelKind::linear ? 0 : config.predictor.hidden_layers;
  model.net = predict::Mlp(repr.slot_dim, model.layout.output_width(), hidden, config.predictor.hidden_size,
                           config.predictor.leaky_slope, init);

  std::vector<SceneTargets> targets(static_cast<std::size_t>(split.train + split.val));
  std::vector<std::vector<Index>> orders(targets.size());
  for (std::size_t s = 0; s < targets.size(); ++s) {
    targets[s] = visible_objects(props, static_cast<Index>(s));
    orders[s] = canonical_slots(repr, static_cast<Index>(s));
  }
  std::vector<Pairs> fixed;
  if (config.matching == Matching::mask) fixed = mask_pairs(repr, props, *pred_masks, *gt_masks, 0, split.train + split.val);

  const predict::TargetLayout& layout = model.layout;
  auto batch_loss = [&](const predict::Mlp& net, const std::vector<Index>& scenes, Vector* grad) {
    std::vector<std::pair<Index, Pairs>> matched(scenes.size());
    parallel_for(scenes.size(), [&](std::size_t i) {
      const Index s = scenes[i];
      const auto& t = targets[static_cast<std::size_t>(s)];
      if (t.ids.empty()) return;
      if (config.matching == Matching::mask) {
        matched[i] = {s, fixed[static_cast<std::size_t>(s)]};
      } else {
        const Matrix out = net.forward(slot_rows(repr, s, orders[static_cast<std::size_t>(s)]));
        matched[i] = {s, sorted_by_object(loss_match(layout, out, t, props), &orders[static_cast<std::size_t>(s)])};
      }
    });
    Index rows = 0;
    for (const auto& m : matched) rows += static_cast<Index>(m.second.size());
    if (grad) grad->setZero(net.parameter_count());
    if (rows == 0) return 0.0;
    Matrix x(rows, repr.slot_dim), y(rows, layout.heads());
    Index r = 0;
    for (const auto& [s, pairs] : matched)
      for (const auto& [slot, obj] : pairs) {
        x.row(r) = repr.slot(s, slot);
        y.row(r) = targets[static_cast<std::size_t>(s)].y.row(obj);
        ++r;
      }
    predict::Mlp::Cache cache;
    const Matrix out = net.forward(x, grad ? &cache : nullptr);
    Matrix go;
    const double loss = predict::task_loss(layout, out, y, grad ? &go : nullptr);
    if (grad) *grad = net.backward(cache, go);
    return loss;
  };
  std::vector<Index> val_scenes(static_cast<std::size_t>(split.val));
  std::iota(val_scenes.begin(), val_scenes.end(), split.train);
  if (val_scenes.empty()) {
    val_scenes.resize(static_cast<std::size_t>(split.train));
    std::iota(val_scenes.begin(), val_scenes.end(), Index{0});
  }
  predict::BatchObjective objective = [&](const predict::Mlp& net, std::span<const Index> batch, Vector* grad) {
    return batch_loss(net, std::vector<Index>(batch.begin(), batch.end()), grad);
  };
  predict::ValidationLoss validation = [&](const predict::Mlp& net) { return batch_loss(net, val_scenes, nullptr); };
  model.history = predict::fit(model.net, config.protocol, split.train, objective, validation, seed);
  return model;
}

DownstreamResult score_slotted(const SlottedModel& model, const Representation& repr, const PropertyTable& props,
                               const MaskSet* pred_masks, const MaskSet* gt_masks) {
  if (repr.slot_dim != model.slot_dim) throw Error(ErrorCode::WidthMismatch, kModule, "slot width differs from training");
  const SceneSplit split = split_scenes(model.config, props.scene_count());
  const Index first = split.train + split.val;
  std::vector<Pairs> fixed;
  if (model.config.matching == Matching::mask) fixed = mask_pairs(repr, props, *pred_masks, *gt_masks, first, split.test);

  std::vector<Pairs> matched(static_cast<std::size_t>(split.test));
  std::vector<SceneTargets> targets(static_cast<std::size_t>(split.test));
  parallel_for(static_cast<std::size_t>(split.test), [&](std::size_t i) {
    const Index s = first + static_cast<Index>(i);
    targets[i] = visible_objects(props, s);
    if (targets[i].ids.empty()) return;
    if (model.config.matching == Matching::mask) {
      matched[i] = fixed[i];
    } else {
      const auto order = canonical_slots(repr, s);
      const Matrix out = model.net.forward(slot_rows(repr, s, order));
      matched[i] = sorted_by_object(loss_match(model.layout, out, targets[i], props), &order);
    }
  });
  Index rows = 0;
  for (const auto& m : matched) rows += static_cast<Index>(m.size());
  if (rows == 0) throw Error(ErrorCode::EmptyInput, kModule, "no visible test objects");
  Collected c;
  Matrix x(rows, repr.slot_dim);
  c.targets.resize(rows, model.layout.heads());
  Index r = 0;
  for (std::size_t i = 0; i < matched.size(); ++i)
    for (const auto& [slot, obj] : matched[i]) {
      x.row(r) = repr.slot(first + static_cast<Index>(i), slot);
      c.targets.row(r) = targets[i].y.row(obj);
      c.ood.push_back(targets[i].ood[static_cast<std::size_t>(obj)]);
      ++r;
    }
  c.outputs = model.net.forward(x);

  DownstreamResult result;
  result.history = model.history;
  result.scores = score_rows(model.layout, props, c, &result.flags);
  result.test_objects = rows;
  result.test_ood_objects = static_cast<Index>(std::count(c.ood.begin(), c.ood.end(), true));
  return result;
}

namespace {

// Constant outputs shared by every slot: matching cannot change the loss, so
// the optimum is the per-object constant fitted on all visible train objects.
void slotted_baseline(const PropertyTable& props, const DownstreamConfig& config, const Collected& test,
                      std::uint64_t seed, DownstreamResult& result) {
  const SceneSplit split = split_scenes(config, props.scene_count());
  std::vector<Eigen::RowVectorXd> rows;
  for (Index s = 0; s < split.train; ++s) {
    const SceneTargets t = visible_objects(props, s);
    for (Index m = 0; m < t.y.rows(); ++m) rows.push_back(t.y.row(m));
  }
  if (rows.empty()) return;
  Matrix y(static_cast<Index>(rows.size()), props.property_count());
  for (std::size_t i = 0; i < rows.size(); ++i) y.row(static_cast<Index>(i)) = rows[i];
  const auto layout = predict::TargetLayout::from_properties(props.properties);
  const auto base = predict::constant_baseline(layout, y, seed ^ 0xba5e11e, config.baseline_seeds);
  for (const auto& constant : base.outputs) {
    Collected c = test;
    c.outputs = constant.replicate(test.targets.rows(), 1);
    result.baseline_per_seed.push_back(score_rows(layout, props, c, nullptr));
  }
  result.baseline = mean_scores(result.baseline_per_seed);
}

Collected collect_slotted_test(const SlottedModel& model, const PropertyTable& props) {
  // Targets of every visible test object, in scene then object order.
  const SceneSplit split = split_scenes(model.config, props.scene_count());
  Collected c;
  std::vector<Eigen::RowVectorXd> rows;
  for (Index s = split.train + split.val; s < props.scene_count(); ++s) {
    const SceneTargets t = visible_objects(props, s);
    for (Index m = 0; m < t.y.rows(); ++m) {
      rows.push_back(t.y.row(m));
      c.ood.push_back(t.ood[static_cast<std::size_t>(m)]);
    }
  }
  c.targets.resize(static_cast<Index>(rows.size()), props.property_count());
  for (std::size_t i = 0; i < rows.size(); ++i) c.targets.row(static_cast<Index>(i)) = rows[i];
  return c;
}

}  // namespace

DownstreamResult eval_slotted(const Representation& repr, const PropertyTable& props, const DownstreamConfig& config,
                              std::uint64_t seed, const MaskSet* pred_masks, const MaskSet* gt_masks) {
  const SlottedModel model = train_slotted(repr, props, config, seed, pred_masks, gt_masks);
  DownstreamResult result = score_slotted(model, repr, props, pred_masks, gt_masks);
  if (config.baseline) slotted_baseline(props, config, collect_slotted_test(model, props), seed, result);
  return result;
}

namespace {

struct FlatRun {
  Collected test;
  predict::TrainHistory history;
};

// Trains `net` (inputs x K*P outputs) through per-scene matching and collects
// matched test predictions. Deterministic matching uses a fixed assignment.
FlatRun run_flat(predict::Mlp& net, const Matrix& inputs, Index slots, const PropertyTable& props,
                 const DownstreamConfig& config, const predict::TrainProtocol& protocol, std::uint64_t seed) {
  const SceneSplit split = split_scenes(config, props.scene_count());
  const auto layout = predict::TargetLayout::from_properties(props.properties);
  const Index w = layout.output_width();
  const Index total = props.scene_count();
  std::vector<SceneTargets> targets(static_cast<std::size_t>(total));
  std::vector<Pairs> fixed(static_cast<std::size_t>(total));
  for (Index s = 0; s < total; ++s) {
    targets[static_cast<std::size_t>(s)] = visible_objects(props, s);
    const auto& t = targets[static_cast<std::size_t>(s)];
    if (config.matching == Matching::deterministic && !t.ids.empty())
      fixed[static_cast<std::size_t>(s)] = sorted_by_object(
          match::match_deterministic(t.y, props.canonical_order, slots, t.ood, props.ood_property), nullptr);
  }
  auto pairs_for = [&](Index s, const Eigen::Ref<const Eigen::RowVectorXd>& out) -> Pairs {
    const auto& t = targets[static_cast<std::size_t>(s)];
    if (t.ids.empty()) return {};
    if (config.matching == Matching::deterministic) return fixed[static_cast<std::size_t>(s)];
    const Matrix per_slot = out.reshaped(w, slots).transpose();
    return sorted_by_object(loss_match(layout, per_slot, t, props), nullptr);
  };

  auto batch_loss = [&](const predict::Mlp& m, const std::vector<Index>& scenes, Vector* grad) {
    Matrix x(static_cast<Index>(scenes.size()), inputs.cols());
    for (std::size_t i = 0; i < scenes.size(); ++i) x.row(static_cast<Index>(i)) = inputs.row(scenes[i]);
    predict::Mlp::Cache cache;
    const Matrix out = m.forward(x, grad ? &cache : nullptr);
    std::vector<Pairs> matched(scenes.size());
    parallel_for(scenes.size(), [&](std::size_t i) { matched[i] = pairs_for(scenes[i], out.row(static_cast<Index>(i))); });
    Index count = 0;
    for (const auto& p : matched) count += static_cast<Index>(p.size());
    if (grad) grad->setZero(m.parameter_count());
    if (count == 0) return 0.0;
    Matrix go = Matrix::Zero(out.rows(), out.cols());
    double loss = 0;
    Eigen::RowVectorXd g(w);
    for (std::size_t i = 0; i < scenes.size(); ++i)
      for (const auto& [slot, obj] : matched[i]) {
        const auto& t = targets[static_cast<std::size_t>(scenes[i])];
        loss += predict::sample_loss(layout, out.row(static_cast<Index>(i)).segment(slot * w, w), t.y.row(obj),
                                     grad ? &g : nullptr);
        if (grad) go.row(static_cast<Index>(i)).segment(slot * w, w) = g / static_cast<double>(count);
      }
    if (grad) *grad = m.backward(cache, go);
    return loss / static_cast<double>(count);
  };
  std::vector<Index> val(static_cast<std::size_t>(split.val));
  std::iota(val.begin(), val.end(), split.train);
  if (val.empty()) {
    val.resize(static_cast<std::size_t>(split.train));
    std::iota(val.begin(), val.end(), Index{0});
  }
  predict::BatchObjective objective = [&](const predict::Mlp& m, std::span<const Index> batch, Vector* grad) {
    return batch_loss(m, std::vector<Index>(batch.begin(), batch.end()), grad);
  };
  predict::ValidationLoss validation = [&](const predict::Mlp& m) { return batch_loss(m, val, nullptr); };

  FlatRun run;
  run.history = predict::fit(net, protocol, split.train, objective, validation, seed);

  const Index first = split.train + split.val;
  Matrix x(split.test, inputs.cols());
  for (Index i = 0; i < split.test; ++i) x.row(i) = inputs.row(first + i);
  const Matrix out = net.forward(x);
  std::vector<Eigen::RowVectorXd> o, y;
  for (Index i = 0; i < split.test; ++i) {
    const auto& t = targets[static_cast<std::size_t>(first + i)];
    for (const auto& [slot, obj] : pairs_for(first + i, out.row(i))) {
      o.push_back(out.row(i).segment(slot * w, w));
      y.push_back(t.y.row(obj));
      run.test.ood.push_back(t.ood[static_cast<std::size_t>(obj)]);
    }
  }
  if (o.empty()) throw Error(ErrorCode::EmptyInput, kModule, "no visible test objects");
  run.test.outputs.resize(static_cast<Index>(o.size()), w);
  run.test.targets.resize(static_cast<Index>(y.size()), layout.heads());
  for (std::size_t i = 0; i < o.size(); ++i) {
    run.test.outputs.row(static_cast<Index>(i)) = o[i];
    run.test.targets.row(static_cast<Index>(i)) = y[i];
  }
  return run;
}

}  // namespace

DownstreamResult eval_flat(const Representation& repr, Index slots, const PropertyTable& props,
                           const DownstreamConfig& config, std::uint64_t seed) {
  require_trainable(config.predictor);
  if (repr.rows() != props.scene_count()) throw Error(ErrorCode::LengthMismatch, kModule, "representation and scenes differ");
  if (slots < props.max_objects()) throw Error(ErrorCode::InvalidArgument, kModule, "fewer output slots than objects");
  if (config.matching == Matching::mask) throw Error(ErrorCode::InvalidArgument, kModule, "flat evaluation uses loss or deterministic matching");
  const auto layout = predict::TargetLayout::from_properties(props.properties);

  CounterRng init(seed, 2);
  const int hidden = config.predictor.kind == predict::ModelKind::linear ? 0 : config.predictor.hidden_layers;
  predict::Mlp net(repr.dims(), slots * layout.output_width(), hidden, config.predictor.hidden_size,
                   config.predictor.leaky_slope, init);
  FlatRun run = run_flat(net, repr.data, slots, props, config, config.protocol, seed);

  DownstreamResult result;
  result.history = run.history;
  result.scores = score_rows(layout, props, run.test, &result.flags);
  result.test_objects = run.test.targets.rows();
  result.test_ood_objects = static_cast<Index>(std::count(run.test.ood.begin(), run.test.ood.end(), true));
  if (config.baseline) {
    const Matrix empty(props.scene_count(), 0);
    for (Index s = 0; s < config.baseline_seeds; ++s) {
      CounterRng binit(seed ^ 0xba5e11e, static_cast<std::uint64_t>(s));
      predict::Mlp constant(0, slots * layout.output_width(), 0, 0, 0.01, binit);
      for (Index j = 0; j < constant.biases()[0].size(); ++j) constant.biases()[0](j) = binit.uniform();
      const FlatRun b = run_flat(constant, empty, slots, props, config, matched_baseline_protocol(), seed + 1000 + static_cast<std::uint64_t>(s));
      result.baseline_per_seed.push_back(score_rows(layout, props, b.test, nullptr));
    }
    result.baseline = mean_scores(result.baseline_per_seed);
  }
  return result;
}

ShiftComparison retrain_after_shift(const SlottedModel& model, const Representation& shifted_repr,
                                    const PropertyTable& shifted_props, std::uint64_t seed) {
  ShiftComparison c;
  c.zero_shot = score_slotted(model, shifted_repr, shifted_props);
  const SlottedModel fresh = train_slotted(shifted_repr, shifted_props, model.config, seed);
  c.retrained = score_slotted(fresh, shifted_repr, shifted_props);
  return c;
}

void add_to_report(const DownstreamResult& result, const std::string& prefix, EvalReport& report) {
  auto put = [&](const std::string& key, double v) {
    if (std::isfinite(v)) report.metrics[key] = v;
  };
  for (const auto& s : result.scores) {
    put(prefix + "." + s.name, s.all);
    put(prefix + "." + s.name + ".id", s.id);
    put(prefix + "." + s.name + ".ood", s.ood);
  }
  for (const auto& s : result.baseline) {
    put(prefix + ".baseline." + s.name, s.all);
    put(prefix + ".baseline." + s.name + ".id", s.id);
    put(prefix + ".baseline." + s.name + ".ood", s.ood);
  }
  report.metrics[prefix + ".test_objects"] = static_cast<double>(result.test_objects);
  report.metrics[prefix + ".train_steps"] = static_cast<double>(result.history.steps);
  for (const auto& f : result.flags) report.flags.insert(prefix + ":" + f);
}

}  // namespace repreval::objects
