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

#include "repreval/rng.hpp"
#include "repreval/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace repreval::predict {

// Output layout of a multi-property predictor. Head h is categorical with
// classes[h] classes (that many logits) or numerical when classes[h] == 0
// (one output). Targets are N x heads: class indices or normalized reals.
struct TargetLayout {
  std::vector<int> classes;

  static TargetLayout numerical(Index heads);
  static TargetLayout from_properties(const std::vector<PropertySpec>& properties);

  Index heads() const { return static_cast<Index>(classes.size()); }
  Index output_width() const;
  Index offset(Index head) const;
  bool categorical(Index head) const { return classes[static_cast<std::size_t>(head)] > 0; }
};

/// Per-sample loss: cross-entropy summed over categorical heads plus squared
/// error summed over numerical heads. Writes dLoss/dOutput when grad != nullptr.
/// Heads with heads[h] == false are skipped (zero gradient).
double sample_loss(const TargetLayout& layout, const Eigen::Ref<const Eigen::RowVectorXd>& output,
                   const Eigen::Ref<const Eigen::RowVectorXd>& target, Eigen::RowVectorXd* grad = nullptr,
                   const std::vector<bool>* heads = nullptr);

/// Mean of sample_loss over rows; grad (if given) is scaled by 1/N.
double task_loss(const TargetLayout& layout, const Matrix& outputs, const Matrix& targets, Matrix* grad = nullptr);

enum class ModelKind { linear, mlp, knn, forest };

struct PredictorConfig {
  ModelKind kind = ModelKind::mlp;
  int hidden_layers = 1;  // mlp: 1..3
  Index hidden_size = 256;
  double leaky_slope = 0.01;
  Index k = 5;                // knn
  Index trees = 10;           // forest
  Index max_depth = 8;        // forest
  double feature_fraction = 0;  // forest: features tried per split; 0 means sqrt(D)
  Index min_leaf = 1;

  static PredictorConfig linear();
  static PredictorConfig mlp(int hidden_layers);
  static PredictorConfig knn(Index k);
  static PredictorConfig forest(Index trees, Index max_depth);
  std::string describe() const;
};

struct TrainProtocol {
  double learning_rate = 1e-3;
  Index batch_size = 64;
  Index max_steps = 6000;
  Index halve_every = 2000;
  Index eval_every = 250;
  Index patience = 3;
  double min_delta = 0.01;
};

// Stops when `patience` consecutive evaluations fail to improve on the
// reference loss by more than min_delta. The first evaluation sets the reference.
class EarlyStopper {
 public:
  EarlyStopper(Index patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  /// Returns true when training should stop after this evaluation.
  bool update(double loss);
  Index evaluations() const { return evaluations_; }
  double reference() const { return reference_; }

 private:
  Index patience_;
  double min_delta_;
  Index evaluations_ = 0;
  Index stale_ = 0;
  double reference_ = 0;
};

// Fully connected network with LeakyReLU hidden layers; zero hidden layers
// gives a linear (affine) model, zero inputs a learned constant.
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activation of each hidden layer
  };

  Mlp() = default;
  Mlp(Index inputs, Index outputs, int hidden_layers, Index hidden_size, double slope, CounterRng& rng);

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
  /// Backpropagates dLoss/dOutput into a flat gradient laid out like parameters().
  Vector backward(const Cache& cache, const Matrix& grad_out) const;

  Vector parameters() const;
  void set_parameters(const Vector& flat);
  Index parameter_count() const;
  Index inputs() const { return weights_.empty() ? 0 : weights_.front().rows(); }
  Index outputs() const { return weights_.empty() ? 0 : weights_.back().cols(); }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Vector>& biases() const { return biases_; }

 private:
  std::vector<Matrix> weights_;  // in x out
  std::vector<Vector> biases_;
  double slope_ = 0.01;
};

struct TrainHistory {
  Index steps = 0;
  Index evaluations = 0;
  bool early_stopped = false;
  double final_val_loss = 0;
  std::vector<double> val_losses;
};

/// Loss (and flat gradient when grad != nullptr) of the model on a batch of
/// training-example ids.
using BatchObjective = std::function<double(const Mlp& model, std::span<const Index> batch, Vector* grad)>;
using ValidationLoss = std::function<double(const Mlp& model)>;

/// Adam with step-size halving, periodic validation and early stopping.
/// Batches are consecutive slices of a per-epoch shuffle of [0, train_size);
/// train_size < batch_size falls back to full batches.
TrainHistory fit(Mlp& model, const TrainProtocol& protocol, Index train_size, const BatchObjective& objective,
                 const ValidationLoss& validation, std::uint64_t seed);

// CART ensemble with bootstrap rows and per-split feature subsampling.
struct Tree {
  struct Node {
    Index feature = -1;  // -1 marks a leaf
    double threshold = 0;
    Index left = -1, right = -1;
    Eigen::RowVectorXd value;  // leaf output (class frequencies or mean)
  };
  std::vector<Node> nodes;
  Eigen::RowVectorXd predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct Forest {
  std::vector<Tree> trees;
  Vector importance;  // normalized mean impurity decrease per input dim
  int classes = 0;    // 0 regression
  Eigen::RowVectorXd predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

/// targets: class indices (classes > 0) or reals. Feature order is
/// canonicalized by column content, so importances are permutation-equivariant.
Forest fit_forest(const Matrix& x, const Vector& targets, int classes, const PredictorConfig& config, std::uint64_t seed);

class Predictor {
 public:
  ModelKind kind() const { return kind_; }
  const TargetLayout& layout() const { return layout_; }
  Index input_width() const { return input_width_; }
  const TrainHistory& history() const { return history_; }
  const std::set<std::string>& flags() const { return flags_; }
  const Mlp* network() const { return net_ ? &*net_ : nullptr; }

  /// N x layout.output_width(): logits (or class frequencies) then numerical outputs.
  Matrix predict(const Matrix& x) const;

 private:
  friend Predictor train(const PredictorConfig&, const TrainProtocol&, const TargetLayout&, const Matrix&,
                         const Matrix&, double, std::uint64_t);
  friend Vector feature_importance(const Predictor&);

  ModelKind kind_ = ModelKind::mlp;
  TargetLayout layout_;
  Index input_width_ = 0;
  std::optional<Mlp> net_;
  std::vector<Forest> forests_;  // one per head
  Matrix knn_x_, knn_y_;
  Index knn_k_ = 1;
  TrainHistory history_;
  std::set<std::string> flags_;
};

/// Holds out the last round(val_fraction * N) rows of a seeded shuffle for validation.
Predictor train(const PredictorConfig& config, const TrainProtocol& protocol, const TargetLayout& layout,
                const Matrix& inputs, const Matrix& targets, double val_fraction, std::uint64_t seed);

struct HeadScore {
  bool categorical = false;
  double score = 0;       // accuracy or R^2
  double mae = 0;         // numerical heads only
  bool defined = true;    // false when R^2 has a zero-variance target
};

std::vector<HeadScore> evaluate(const TargetLayout& layout, const Matrix& predictions, const Matrix& targets);

/// Argmax over the logits of a categorical head.
Index predicted_class(const TargetLayout& layout, const Eigen::Ref<const Eigen::RowVectorXd>& output, Index head);

/// forest: normalized mean impurity decrease; linear: normalized absolute
/// weights summed over outputs. Throws UnsupportedKind otherwise.
Vector feature_importance(const Predictor& predictor);

struct BaselineResult {
  std::vector<std::vector<HeadScore>> per_seed;
  std::vector<Eigen::RowVectorXd> outputs;       // learned constant per seed
  std::vector<double> mean_scores;               // per head, over seeds
};

/// Protocol used to fit constant vectors: full-batch Adam with a decaying step.
TrainProtocol baseline_protocol();

/// Best constant prediction fitted by gradient descent on the task loss,
/// repeated over `seeds` seeds.
BaselineResult constant_baseline(const TargetLayout& layout, const Matrix& targets, std::uint64_t seed,
                                 Index seeds = 10);

// Multinomial logistic regression on standardized inputs, full-batch
// gradient descent with an L2 penalty (sum loss + 0.5 ||W||^2).
struct LogisticModel {
  Matrix weights;  // D x C
  Eigen::RowVectorXd bias;
  Eigen::RowVectorXd center, scale;

  Matrix decision(const Matrix& x) const;  // logits
  Matrix probabilities(const Matrix& x) const;
  IndexVector predict(const Matrix& x) const;
};

struct LogisticOptions {
  Index iterations = 300;
  double learning_rate = 0.1;
  double l2 = 1.0;
};

LogisticModel fit_logistic(const Matrix& x, const IndexVector& y, Index classes, const LogisticOptions& options = {});

/// Rank-based ROC-AUC (ties averaged). Returns nullopt without both classes.
std::optional<double> roc_auc(const Vector& scores, const std::vector<bool>& positive);

/// Rows-first ordering that sorts columns lexicographically by content.
std::vector<Index> canonical_column_order(const Matrix& x);

}  // namespace repreval::predict
