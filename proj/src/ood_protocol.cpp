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

#include "repreval/ood_protocol.hpp"

#include "repreval/error.hpp"
#include "repreval/parallel.hpp"
#include "repreval/rng.hpp"
#include "repreval/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace repreval::ood {
namespace {

constexpr const char* kModule = "ood-protocol";

bool is_hue_grid(const FactorSpec& f) {
  if (f.grid.size() != 12) return false;
  for (std::size_t i = 0; i < 12; ++i)
    if (std::abs(f.grid[i] - 30.0 * static_cast<double>(i)) > 1e-9) return false;
  return true;
}

void need(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InsufficientCardinality, kModule, what);
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::ood1_a: return "ood1-a";
    case Scenario::ood1_b: return "ood1-b";
    case Scenario::ood1_c: return "ood1-c";
    case Scenario::ood2: return "ood2";
    case Scenario::in_distribution: return "id";
  }
  return "id";
}

std::string report_tag(Scenario s) {
  std::string t = to_string(s);
  std::replace(t.begin(), t.end(), '-', '_');
  return t;
}

Scenario parse_scenario(const std::string& text) {
  for (Scenario s : {Scenario::ood1_a, Scenario::ood1_b, Scenario::ood1_c, Scenario::ood2, Scenario::in_distribution})
    if (text == to_string(s) || text == report_tag(s)) return s;
  if (text == "in-distribution") return Scenario::in_distribution;
  throw Error(ErrorCode::InvalidArgument, kModule, "unknown scenario '" + text + "'");
}

void SplitPlan::check() const {
  auto sorted = [](std::vector<Index> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto d = sorted(repr_train), d1 = sorted(downstream_train), d2 = sorted(eval);
  auto subset = [](const std::vector<Index>& a, const std::vector<Index>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  auto disjoint = [](const std::vector<Index>& a, const std::vector<Index>& b) {
    std::vector<Index> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out.empty();
  };
  bool ok = !d1.empty() && !d2.empty() && subset(d1, d);
  switch (scenario) {
    case Scenario::ood1_a:
    case Scenario::ood1_b:
    case Scenario::ood1_c: ok = ok && subset(d2, d) && disjoint(d1, d2); break;
    case Scenario::ood2: ok = ok && disjoint(d2, d); break;
    case Scenario::in_distribution: ok = ok && d1 == d2; break;
  }
  if (!ok) throw Error(ErrorCode::InvalidArgument, kModule, "split plan violates its set invariants");
}

SplitPlan build_split(const FactorSpace& space, const std::string& factor, Scenario scenario, std::uint64_t seed) {
  SplitPlan plan;
  plan.factor = factor;
  plan.factor_index = factor_index(space, factor);
  plan.scenario = scenario;
  const FactorSpec& spec = space[static_cast<std::size_t>(plan.factor_index)];
  const Index c = spec.cardinality();

  std::vector<Index> all(static_cast<std::size_t>(c));
  for (Index i = 0; i < c; ++i) all[static_cast<std::size_t>(i)] = i;
  std::vector<Index> d;
  if (is_hue_grid(spec)) {
    d = {0, 4, 5, 6, 7, 9, 10, 11};
  } else if (scenario == Scenario::ood2) {
    need(c >= 2, "OOD2 needs at least 2 values");
    const Index held = std::max<Index>(1, c / 3);
    CounterRng rng(seed, 0x00d2);
    std::vector<Index> perm = all;
    rng.shuffle(std::span<Index>(perm));
    d.assign(perm.begin() + held, perm.end());
    std::sort(d.begin(), d.end());
  } else {
    d = all;
  }
  std::vector<Index> rest;
  std::set_difference(all.begin(), all.end(), d.begin(), d.end(), std::back_inserter(rest));
  const auto nd = static_cast<Index>(d.size());
  plan.repr_train = d;
  switch (scenario) {
    case Scenario::ood1_a:
      need(nd >= 2, "OOD1-A needs at least 2 values");
      plan.downstream_train = {d.front()};
      plan.eval.assign(d.begin() + 1, d.end());
      break;
    case Scenario::ood1_b:
      need(nd >= 8, "OOD1-B needs at least 8 values");
      plan.eval.assign(d.begin(), d.begin() + nd / 2);
      plan.downstream_train.assign(d.begin() + nd / 2, d.end());
      break;
    case Scenario::ood1_c:
      need(nd >= 8, "OOD1-C needs at least 8 values");
      for (Index i = 0; i < nd; ++i) (i % 2 == 0 ? plan.downstream_train : plan.eval).push_back(d[static_cast<std::size_t>(i)]);
      break;
    case Scenario::ood2:
      need(!rest.empty(), "OOD2 needs held-out values");
      plan.downstream_train = d;
      plan.eval = rest;
      break;
    case Scenario::in_distribution:
      need(nd >= 2, "in-distribution plan needs at least 2 values");
      plan.downstream_train = d;
      plan.eval = d;
      break;
  }
  plan.check();
  return plan;
}

double transfer_from_predictions(const Matrix& predictions, const FactorTable& eval, Index ood_factor,
                                 std::vector<double>* per_factor_mae) {
  if (predictions.rows() != eval.rows() || predictions.cols() != eval.factors())
    throw Error(ErrorCode::LengthMismatch, kModule, "predictions do not match the evaluation table");
  if (per_factor_mae) per_factor_mae->assign(static_cast<std::size_t>(eval.factors()), 0.0);
  double total = 0;
  Index used = 0;
  for (Index i = 0; i < eval.factors(); ++i) {
    if (i == ood_factor) continue;
    const double mae = (predictions.col(i) - eval.normalized.col(i)).cwiseAbs().mean();
    if (per_factor_mae) (*per_factor_mae)[static_cast<std::size_t>(i)] = mae;
    total += mae;
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::MissingPredictor, kModule, "no non-OOD factor to score");
  return total / static_cast<double>(used);
}

double transfer_score(const std::vector<const predict::Predictor*>& predictors, const Matrix& eval_repr,
                      const FactorTable& eval, Index ood_factor, std::vector<double>* per_factor_mae) {
  if (static_cast<Index>(predictors.size()) != eval.factors())
    throw Error(ErrorCode::MissingPredictor, kModule, "one predictor slot per factor is required");
  Matrix preds = Matrix::Zero(eval.rows(), eval.factors());
  for (Index i = 0; i < eval.factors(); ++i) {
    if (i == ood_factor) continue;
    const predict::Predictor* p = predictors[static_cast<std::size_t>(i)];
    if (!p) throw Error(ErrorCode::MissingPredictor, kModule, "no predictor for factor " + eval.space[static_cast<std::size_t>(i)].name);
    preds.col(i) = p->predict(eval_repr).col(0);
  }
  return transfer_from_predictions(preds, eval, ood_factor, per_factor_mae);
}

OodResult run_ood_eval(const FactorSpace& space, const ReprProvider& provider, const OodConfig& config,
                       const SplitPlan& plan, std::uint64_t seed) {
  plan.check();
  const Index f = static_cast<Index>(space.size());
  const FactorTable train = synth::sample_factors(space, config.train_rows, seed, {{plan.factor_index, plan.downstream_train}});
  const FactorTable eval = synth::sample_factors(space, config.eval_rows, seed + 1, {{plan.factor_index, plan.eval}});
  const FactorTable held = synth::sample_factors(space, config.eval_rows, seed + 2, {{plan.factor_index, plan.downstream_train}});
  const Matrix z_train = provider(train), z_eval = provider(eval), z_held = provider(held);

  std::vector<std::optional<predict::Predictor>> models(static_cast<std::size_t>(f));
  parallel_for(static_cast<std::size_t>(f), [&](std::size_t i) {
    if (static_cast<Index>(i) == plan.factor_index) return;
    models[i] = predict::train(config.predictor, config.protocol, predict::TargetLayout::numerical(1), z_train,
                               train.normalized.col(static_cast<Index>(i)), config.val_fraction, seed * 31 + i);
  });
  std::vector<const predict::Predictor*> ptrs;
  for (const auto& m : models) ptrs.push_back(m ? &*m : nullptr);

  OodResult r;
  r.tag = report_tag(plan.scenario);
  std::vector<double> mae, mae_id;
  r.transfer = transfer_score(ptrs, z_eval, eval, plan.factor_index, &mae);
  r.transfer_id = transfer_score(ptrs, z_held, held, plan.factor_index, &mae_id);
  r.gs = generalization_score(r.transfer);
  for (Index i = 0; i < f; ++i) {
    if (i == plan.factor_index) continue;
    r.per_factor_mae[space[static_cast<std::size_t>(i)].name] = mae[static_cast<std::size_t>(i)];
    r.per_factor_mae_id[space[static_cast<std::size_t>(i)].name] = mae_id[static_cast<std::size_t>(i)];
  }
  return r;
}

void add_to_report(const OodResult& result, EvalReport& report) {
  report.metrics["transfer_" + result.tag] = result.transfer;
  report.metrics["transfer_id_" + result.tag] = result.transfer_id;
  report.metrics["gs_" + result.tag] = result.gs;
  for (const auto& [name, v] : result.per_factor_mae) report.per_factor["mae_" + result.tag][name] = v;
  for (const auto& [name, v] : result.per_factor_mae_id) report.per_factor["mae_id_" + result.tag][name] = v;
}

}  // namespace repreval::ood
