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
#include "repreval/predictors.hpp"
#include "repreval/types.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

// Every metric takes the representation as an N x D matrix (point latents or
// posterior means) aligned with the rows of the factor table. Latent columns
// are first put in a content-sorted canonical order, so results do not
// depend on how dimensions are numbered; per-dim outputs use the caller's order.
namespace repreval::disent {

struct ImportanceMatrix {
  Matrix R;  // F x D, non-negative
  std::string source;  // "forest" or "logistic_weights"
  std::set<std::string> flags;
};

struct ScoreMatrix {
  Matrix S;  // F x D in [0, 1]
  bool clamped = false;  // some negative R^2 was clamped to 0
};

struct MetricResult {
  double score = 0;
  std::vector<double> per_factor;
  std::set<std::string> flags;
};

struct BatchOptions {
  Index train_batches = 500;
  Index eval_batches = 100;
  Index batch_size = 64;
  double prune_threshold = 0.05;  // FactorVAE: normalized variance below this is pruned
};

/// Classifier accuracy at predicting which factor was held fixed from the
/// mean absolute latent difference of pairs that share that factor's value.
MetricResult betavae_score(const FactorTable& factors, const Matrix& repr, std::uint64_t seed,
                           const BatchOptions& options = {});

/// Majority-vote accuracy of the lowest-normalized-variance latent dim in
/// batches that share one factor value.
MetricResult factorvae_score(const FactorTable& factors, const Matrix& repr, std::uint64_t seed,
                             const BatchOptions& options = {});

/// Factor codes used for discrete MI: grid indices when the grid has at most
/// `bins` values, otherwise equal-width bins of the normalized value.
IndexMatrix factor_codes(const FactorTable& factors, Index bins);

/// Mean over factors of the normalized gap between the two most informative
/// latent dims. per_factor holds the gaps (NaN for skipped factors).
MetricResult mig(const FactorTable& factors, const Matrix& repr, Index bins = info::kDefaultBins,
                 info::Binning binning = info::Binning::equal_width);

struct DciResult {
  double disentanglement = 0;
  double completeness = 0;
  double informativeness = 0;
  std::vector<double> per_factor_informativeness;
  ImportanceMatrix importance;
  std::set<std::string> flags;
};

double dci_disentanglement(const Matrix& importance);
double dci_completeness(const Matrix& importance);

/// One forest per factor (classification on grid codes for categorical
/// factors, regression on normalized values otherwise), trained on a seeded
/// train_fraction of rows and scored on the rest.
DciResult dci(const FactorTable& factors, const Matrix& repr, std::uint64_t seed,
              const predict::PredictorConfig& config = predict::PredictorConfig::forest(10, 8),
              double train_fraction = 0.8);

struct SapResult {
  double score = 0;
  ScoreMatrix scores;
  std::vector<double> per_factor;
};

/// Mean gap between the best and second-best entry of each factor row.
double sap_from_scores(const Matrix& scores);

/// Per (factor, dim): 1-D least squares (numerical, R^2) or nearest-class-mean
/// thresholds (categorical, accuracy), scored on the held-out rows.
SapResult sap(const FactorTable& factors, const Matrix& repr, std::uint64_t seed, double train_fraction = 0.8);

struct ModularityResult {
  double modularity = 0;
  double explicitness = 0;
  std::vector<double> per_dim_modularity;  // NaN for dims without MI
  std::vector<double> per_factor_explicitness;
  std::set<std::string> flags;
};

/// Squared-MI modularity of each dim from a D x F MI matrix; NaN when a dim has no MI.
std::vector<double> modularity_from_mi(const Matrix& mi);

/// Explicitness: one-vs-rest ROC-AUC of a multinomial logistic regression of
/// each factor's grid code on the full representation, averaged over classes.
ModularityResult modularity_explicitness(const FactorTable& factors, const Matrix& repr, std::uint64_t seed,
                                         Index bins = info::kDefaultBins, double train_fraction = 0.8,
                                         info::Binning binning = info::Binning::equal_width);

/// 1 - weighted mean normalized disagreement of each factor's best-aligned dim,
/// where disagreement is the mean over anchor values of the largest shift of
/// the conditional latent mean when one nuisance factor is also fixed.
MetricResult irs(const FactorTable& factors, const Matrix& repr);

}  // namespace repreval::disent
