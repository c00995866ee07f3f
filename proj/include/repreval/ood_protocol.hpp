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

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace repreval::ood {

enum class Scenario { ood1_a, ood1_b, ood1_c, ood2, in_distribution };

std::string to_string(Scenario s);  // "ood1-a", ..., "id"
Scenario parse_scenario(const std::string& text);
/// Report key suffix: "ood1_a", ..., "ood2", "id".
std::string report_tag(Scenario s);

// Value subsets are grid indices of the designated factor.
struct SplitPlan {
  std::string factor;
  Index factor_index = 0;
  Scenario scenario = Scenario::ood1_a;
  std::vector<Index> repr_train;        // D
  std::vector<Index> downstream_train;  // D1
  std::vector<Index> eval;              // D2
  void check() const;                   // throws InvalidArgument on broken set algebra
};

/// With the 12-value hue grid (0..330 step 30) the representation set is
/// {0,120,150,180,210,270,300,330}. Other grids keep every value for OOD1 and
/// in-distribution plans and hold out a seeded third of the values for OOD2.
SplitPlan build_split(const FactorSpace& space, const std::string& factor, Scenario scenario, std::uint64_t seed);

/// Mean over factors other than ood_factor of the MAE between predictions
/// (N x F, normalized units) and normalized targets. ood_factor < 0 keeps all.
double transfer_from_predictions(const Matrix& predictions, const FactorTable& eval, Index ood_factor,
                                 std::vector<double>* per_factor_mae = nullptr);

/// predictors[i] regresses factor i (single numerical head); null entries
/// are allowed only for ood_factor.
double transfer_score(const std::vector<const predict::Predictor*>& predictors, const Matrix& eval_repr,
                      const FactorTable& eval, Index ood_factor, std::vector<double>* per_factor_mae = nullptr);

inline double generalization_score(double transfer) { return -transfer; }

/// Produces the representation of a factor table (the frozen encoder).
using ReprProvider = std::function<Matrix(const FactorTable&)>;

struct OodConfig {
  Index train_rows = 10000;
  Index eval_rows = 5000;
  predict::PredictorConfig predictor = predict::PredictorConfig::mlp(2);
  predict::TrainProtocol protocol;
  double val_fraction = 0.1;
};

struct OodResult {
  std::string tag;
  double transfer = 0;     // on D2
  double transfer_id = 0;  // on fresh rows from D1
  double gs = 0;
  std::map<std::string, double> per_factor_mae;     // D2
  std::map<std::string, double> per_factor_mae_id;  // D1
};

OodResult run_ood_eval(const FactorSpace& space, const ReprProvider& provider, const OodConfig& config,
                       const SplitPlan& plan, std::uint64_t seed);

/// Adds transfer_<tag>, transfer_id_<tag>, gs_<tag> and per-factor MAE keys.
void add_to_report(const OodResult& result, EvalReport& report);

}  // namespace repreval::ood
