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

#include "repreval/predictors.hpp"

#include "repreval/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace repreval::predict {
namespace {

constexpr const char* kModule = "predictors";

[[noreturn]] void fail(ErrorCode code, const std::string& what) { throw Error(code, kModule, what); }

double leaky(double v, double slope) { return v > 0 ? v : slope * v; }

Matrix gather_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

bool all_columns_constant(const Matrix& x) {
  for (Index j = 0; j < x.cols(); ++j)
    if (x.rows() > 0 && (x.col(j).array() != x(0, j)).any()) return false;
  return true;
}

}  // namespace

TargetLayout TargetLayout::numerical(Index heads) {
  return TargetLayout{std::vector<int>(static_cast<std::size_t>(heads), 0)};
}

TargetLayout TargetLayout::from_properties(const std::vector<PropertySpec>& properties) {
  TargetLayout layout;
  for (const auto& p : properties)
    layout.classes.push_back(p.kind == FactorKind::categorical ? static_cast<int>(p.classes) : 0);
  return layout;
}

Index TargetLayout::output_width() const {
  Index w = 0;
  for (int c : classes) w += c > 0 ? c : 1;
  return w;
}

Index TargetLayout::offset(Index head) const {
  Index w = 0;
  for (Index h = 0; h < head; ++h) w += classes[static_cast<std::size_t>(h)] > 0 ? classes[static_cast<std::size_t>(h)] : 1;
  return w;
}

double sample_loss(const TargetLayout& layout, const Eigen::Ref<const Eigen::RowVectorXd>& output,
                   const Eigen::Ref<const Eigen::RowVectorXd>& target, Eigen::RowVectorXd* grad,
                   const std::vector<bool>* heads) {
  double loss = 0;
  Index at = 0;
  if (grad) grad->setZero(output.size());
  for (Index h = 0; h < layout.heads(); ++h) {
    const int c = layout.classes[static_cast<std::size_t>(h)];
    if (heads && !(*heads)[static_cast<std::size_t>(h)]) {
      at += c > 0 ? c : 1;
      continue;
    }
    if (c > 0) {
      const auto logits = output.segment(at, c);
      const double m = logits.maxCoeff();
      const Eigen::RowVectorXd e = (logits.array() - m).exp();
      const double z = e.sum();
      const auto y = static_cast<Index>(std::llround(target(h)));
      if (y < 0 || y >= c) fail(ErrorCode::InvalidArgument, "class index out of range");
      loss += m + std::log(z) - logits(y);
      if (grad) {
        grad->segment(at, c) = e / z;
        (*grad)(at + y) -= 1.0;
      }
      at += c;
    } else {
      const double d = output(at) - target(h);
      loss += d * d;
      if (grad) (*grad)(at) = 2.0 * d;
      at += 1;
    }
  }
  return loss;
}

double task_loss(const TargetLayout& layout, const Matrix& outputs, const Matrix& targets, Matrix* grad) {
  const Index n = outputs.rows();
  if (targets.rows() != n) fail(ErrorCode::LengthMismatch, "outputs and targets differ in length");
  if (n == 0) return 0;
  if (grad) grad->resize(n, outputs.cols());
  double total = 0;
  Eigen::RowVectorXd g(outputs.cols());
  for (Index i = 0; i < n; ++i) {
    total += sample_loss(layout, outputs.row(i), targets.row(i), grad ? &g : nullptr);
    if (grad) grad->row(i) = g / static_cast<double>(n);
  }
  return total / static_cast<double>(n);
}

PredictorConfig PredictorConfig::linear() {
  PredictorConfig c;
  c.kind = ModelKind::linear;
  c.hidden_layers = 0;
  return c;
}

PredictorConfig PredictorConfig::mlp(int hidden_layers) {
  if (hidden_layers < 0 || hidden_layers > 3) fail(ErrorCode::InvalidArgument, "hidden_layers must be in 0..3");
  PredictorConfig c;
  c.kind = hidden_layers == 0 ? ModelKind::linear : ModelKind::mlp;
  c.hidden_layers = hidden_layers;
  return c;
}

PredictorConfig PredictorConfig::knn(Index k) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
  PredictorConfig c;
  c.kind = ModelKind::knn;
  c.k = k;
  return c;
}

PredictorConfig PredictorConfig::forest(Index trees, Index max_depth) {
  if (trees < 1 || max_depth < 1) fail(ErrorCode::InvalidArgument, "trees and max_depth must be >= 1");
  PredictorConfig c;
  c.kind = ModelKind::forest;
  c.trees = trees;
  c.max_depth = max_depth;
  return c;
}

std::string PredictorConfig::describe() const {
  std::ostringstream s;
  switch (kind) {
    case ModelKind::linear: s << "linear"; break;
    case ModelKind::mlp: s << "mlp" << hidden_layers; break;
    case ModelKind::knn: s << "knn" << k; break;
    case ModelKind::forest: s << "forest" << trees << "x" << max_depth; break;
  }
  return s.str();
}

bool EarlyStopper::update(double loss) {
  ++evaluations_;
  if (evaluations_ == 1) {
    reference_ = loss;
    return false;
  }
  if (loss < reference_ - min_delta_) {
    reference_ = loss;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

Mlp::Mlp(Index inputs, Index outputs, int hidden_layers, Index hidden_size, double slope, CounterRng& rng)
    : slope_(slope) {
  Index in = inputs;
  for (int l = 0; l <= hidden_layers; ++l) {
    const Index out = l == hidden_layers ? outputs : hidden_size;
    const double limit = std::sqrt(6.0 / static_cast<double>(std::max<Index>(1, in + out)));
    Matrix w(in, out);
    for (Index c = 0; c < out; ++c)
      for (Index r = 0; r < in; ++r) w(r, c) = rng.uniform(-limit, limit);
    weights_.push_back(std::move(w));
    biases_.push_back(Vector::Zero(out));
    in = out;
  }
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
  if (x.cols() != inputs()) fail(ErrorCode::WidthMismatch, "input width differs from training width");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix a = x;
  const std::size_t layers = weights_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = a * weights_[l];
    z.rowwise() += biases_[l].transpose();
    if (cache) cache->inputs.push_back(a);
    if (l + 1 == layers) return z;
    if (cache) cache->pre.push_back(z);
    a = z.unaryExpr([s = slope_](double v) { return leaky(v, s); });
  }
  return a;
}

Vector Mlp::backward(const Cache& cache, const Matrix& grad_out) const {
  Vector flat(parameter_count());
  std::vector<Index> offsets;
  Index at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    offsets.push_back(at);
    at += weights_[l].size() + biases_[l].size();
  }
  Matrix g = grad_out;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const Matrix dw = cache.inputs[l].transpose() * g;
    const Vector db = g.colwise().sum().transpose();
    Eigen::Map<Matrix>(flat.data() + offsets[l], dw.rows(), dw.cols()) = dw;
    flat.segment(offsets[l] + dw.size(), db.size()) = db;
    if (l > 0) {
      Matrix back = g * weights_[l].transpose();
      const Matrix& pre = cache.pre[l - 1];
      back.array() *= pre.unaryExpr([s = slope_](double v) { return v > 0 ? 1.0 : s; }).array();
      g = std::move(back);
    }
  }
  return flat;
}

Vector Mlp::parameters() const {
  Vector flat(parameter_count());
  Index at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.segment(at, weights_[l].size()) = weights_[l].reshaped();
    at += weights_[l].size();
    flat.segment(at, biases_[l].size()) = biases_[l];
    at += biases_[l].size();
  }
  return flat;
}

void Mlp::set_parameters(const Vector& flat) {
  if (flat.size() != parameter_count()) fail(ErrorCode::InvalidArgument, "parameter vector has wrong length");
  Index at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = flat.segment(at, weights_[l].size());
    at += weights_[l].size();
    biases_[l] = flat.segment(at, biases_[l].size());
    at += biases_[l].size();
  }
}

Index Mlp::parameter_count() const {
  Index n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

TrainHistory fit(Mlp& model, const TrainProtocol& protocol, Index train_size, const BatchObjective& objective,
                 const ValidationLoss& validation, std::uint64_t seed) {
  if (train_size <= 0) fail(ErrorCode::EmptyTrainSet, "no training examples");
  if (protocol.learning_rate <= 0 || protocol.batch_size <= 0 || protocol.max_steps <= 0 ||
      protocol.halve_every <= 0 || protocol.eval_every <= 0 || protocol.patience < 1)
    fail(ErrorCode::InvalidArgument, "training protocol values must be positive");

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Vector theta = model.parameters();
  Vector m = Vector::Zero(theta.size()), v = Vector::Zero(theta.size());
  double b1 = 1, b2 = 1;

  CounterRng rng(seed, 0x7a11);
  std::vector<Index> order(static_cast<std::size_t>(train_size));
  std::iota(order.begin(), order.end(), Index{0});
  const bool full_batch = train_size <= protocol.batch_size;
  std::size_t pos = order.size();

  EarlyStopper stopper(protocol.patience, protocol.min_delta);
  TrainHistory history;
  Vector grad;
  for (Index step = 0; step < protocol.max_steps; ++step) {
    std::span<const Index> batch;
    if (full_batch) {
      batch = std::span<const Index>(order);
    } else {
      const auto b = static_cast<std::size_t>(protocol.batch_size);
      if (pos + b > order.size()) {
        rng.shuffle(std::span<Index>(order));
        pos = 0;
      }
      batch = std::span<const Index>(order).subspan(pos, b);
      pos += b;
    }
    const double loss = objective(model, batch, &grad);
    if (grad.size() != theta.size()) fail(ErrorCode::ShapeMismatch, "gradient size differs from the parameter count");
    if (!std::isfinite(loss) || !grad.allFinite())
      fail(ErrorCode::NonFiniteLoss, "non-finite training loss at step " + std::to_string(step));

    const double lr = protocol.learning_rate * std::pow(0.5, static_cast<double>(step / protocol.halve_every));
    b1 *= beta1;
    b2 *= beta2;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad.cwiseAbs2();
    theta.array() -= lr * (m.array() / (1 - b1)) / ((v.array() / (1 - b2)).sqrt() + eps);
    model.set_parameters(theta);
    history.steps = step + 1;

    if ((step + 1) % protocol.eval_every == 0) {
      const double val = validation(model);
      if (!std::isfinite(val)) fail(ErrorCode::NonFiniteLoss, "non-finite validation loss");
      history.val_losses.push_back(val);
      if (stopper.update(val)) {
        history.early_stopped = true;
        break;
      }
    }
  }
  history.evaluations = static_cast<Index>(history.val_losses.size());
  history.final_val_loss = history.val_losses.empty() ? validation(model) : history.val_losses.back();
  return history;
}

Eigen::RowVectorXd Tree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::size_t at = 0;
  while (nodes[at].feature >= 0)
    at = static_cast<std::size_t>(x(nodes[at].feature) <= nodes[at].threshold ? nodes[at].left : nodes[at].right);
  return nodes[at].value;
}

Eigen::RowVectorXd Forest::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  Eigen::RowVectorXd sum = trees.front().predict(x);
  for (std::size_t t = 1; t < trees.size(); ++t) sum += trees[t].predict(x);
  return sum / static_cast<double>(trees.size());
}

std::vector<Index> canonical_column_order(const Matrix& x) {
  std::vector<Index> order(static_cast<std::size_t>(x.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double* pa = x.col(a).data();
    const double* pb = x.col(b).data();
    return std::lexicographical_compare(pa, pa + x.rows(), pb, pb + x.rows());
  });
  return order;
}

namespace {

struct TreeBuilder {
  const Matrix& x;
  const Vector& y;
  int classes;
  const PredictorConfig& config;
  Index mtry;
  CounterRng rng;
  Vector importance;

  double impurity_total(const std::vector<double>& counts, double n, double sum, double sumsq) const {
    if (n <= 0) return 0;
    if (classes > 0) {
      double s = 0;
      for (double c : counts) s += c * c;
      return n - s / n;
    }
    return std::max(0.0, sumsq - sum * sum / n);
  }

  Eigen::RowVectorXd leaf_value(const std::vector<Index>& rows) const {
    if (classes > 0) {
      Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(classes);
      for (Index r : rows) f(static_cast<Index>(y(r))) += 1;
      return f / static_cast<double>(rows.size());
    }
    double s = 0;
    for (Index r : rows) s += y(r);
    return Eigen::RowVectorXd::Constant(1, s / static_cast<double>(rows.size()));
  }

  struct Split {
    Index feature = -1;
    double threshold = 0;
    double decrease = 0;
  };

  Split best_split(const std::vector<Index>& rows) {
    const auto n = static_cast<double>(rows.size());
    std::vector<double> counts(static_cast<std::size_t>(std::max(classes, 0)), 0.0);
    double sum = 0, sumsq = 0;
    for (Index r : rows) {
      if (classes > 0) counts[static_cast<std::size_t>(y(r))] += 1;
      sum += y(r);
      sumsq += y(r) * y(r);
    }
    const double parent = impurity_total(counts, n, sum, sumsq);
    Split best;
    if (parent <= 0) return best;

    std::vector<Index> features(static_cast<std::size_t>(x.cols()));
    std::iota(features.begin(), features.end(), Index{0});
    std::vector<std::pair<double, double>> column(rows.size());
    for (Index t = 0; t < mtry; ++t) {
      const auto pick = t + static_cast<Index>(rng.below(static_cast<std::uint64_t>(x.cols() - t)));
      std::swap(features[static_cast<std::size_t>(t)], features[static_cast<std::size_t>(pick)]);
      const Index f = features[static_cast<std::size_t>(t)];
      for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x(rows[i], f), y(rows[i])};
      std::sort(column.begin(), column.end());
      std::vector<double> lc(counts.size(), 0.0), rc = counts;
      double ls = 0, lss = 0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        const double yi = column[i].second;
        if (classes > 0) {
          lc[static_cast<std::size_t>(yi)] += 1;
          rc[static_cast<std::size_t>(yi)] -= 1;
        }
        ls += yi;
        lss += yi * yi;
        const auto nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        if (column[i].first == column[i + 1].first) continue;
        if (nl < static_cast<double>(config.min_leaf) || nr < static_cast<double>(config.min_leaf)) continue;
        const double dec =
            parent - impurity_total(lc, nl, ls, lss) - impurity_total(rc, nr, sum - ls, sumsq - lss);
        if (dec > best.decrease) {
          double thr = 0.5 * (column[i].first + column[i + 1].first);
          if (thr >= column[i + 1].first) thr = column[i].first;
          best = {f, thr, dec};
        }
      }
    }
    return best;
  }

  Tree build(std::vector<Index> rows) {
    Tree tree;
    struct Pending {
      std::vector<Index> rows;
      Index depth;
      std::size_t node;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({std::move(rows), 0, 0});
    while (!stack.empty()) {
      Pending p = std::move(stack.back());
      stack.pop_back();
      Split s;
      if (p.depth < config.max_depth && static_cast<Index>(p.rows.size()) >= 2 * config.min_leaf)
        s = best_split(p.rows);
      if (s.feature < 0) {
        tree.nodes[p.node].value = leaf_value(p.rows);
        continue;
      }
      importance(s.feature) += s.decrease;
      std::vector<Index> left, right;
      for (Index r : p.rows) (x(r, s.feature) <= s.threshold ? left : right).push_back(r);
      const std::size_t li = tree.nodes.size();
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[p.node].feature = s.feature;
      tree.nodes[p.node].threshold = s.threshold;
      tree.nodes[p.node].left = static_cast<Index>(li);
      tree.nodes[p.node].right = static_cast<Index>(li + 1);
      stack.push_back({std::move(right), p.depth + 1, li + 1});
      stack.push_back({std::move(left), p.depth + 1, li});
    }
    return tree;
  }
};

}  // namespace

Forest fit_forest(const Matrix& x, const Vector& targets, int classes, const PredictorConfig& config,
                  std::uint64_t seed) {
  const Index n = x.rows(), d = x.cols();
  if (n == 0) fail(ErrorCode::EmptyTrainSet, "no training examples");
  if (targets.size() != n) fail(ErrorCode::LengthMismatch, "targets and inputs differ in length");
  if (d == 0) fail(ErrorCode::InvalidArgument, "forest needs at least one input dim");
  if (classes > 0)
    for (Index i = 0; i < n; ++i)
      if (targets(i) < 0 || targets(i) >= classes || targets(i) != std::floor(targets(i)))
        fail(ErrorCode::InvalidArgument, "class index out of range");

  const std::vector<Index> order = canonical_column_order(x);
  Matrix xc(n, d);
  for (Index j = 0; j < d; ++j) xc.col(j) = x.col(order[static_cast<std::size_t>(j)]);

  Index mtry = config.feature_fraction > 0
                   ? static_cast<Index>(std::llround(config.feature_fraction * static_cast<double>(d)))
                   : static_cast<Index>(std::llround(std::sqrt(static_cast<double>(d))));
  mtry = std::clamp<Index>(mtry, 1, d);

  Forest forest;
  forest.classes = classes;
  Vector imp = Vector::Zero(d);
  for (Index t = 0; t < config.trees; ++t) {
    TreeBuilder b{xc, targets, classes, config, mtry, CounterRng(seed, static_cast<std::uint64_t>(t)), Vector::Zero(d)};
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<Index>(b.rng.below(static_cast<std::uint64_t>(n)));
    forest.trees.push_back(b.build(std::move(rows)));
    const double s = b.importance.sum();
    if (s > 0) imp += b.importance / s;
  }
  forest.importance = Vector::Zero(d);
  const double total = imp.sum();
  for (Index j = 0; j < d; ++j)
    forest.importance(order[static_cast<std::size_t>(j)]) = total > 0 ? imp(j) / total : 1.0 / static_cast<double>(d);
  // Re-map split features so trees consume inputs in the caller's column order.
  for (auto& tree : forest.trees)
    for (auto& node : tree.nodes)
      if (node.feature >= 0) node.feature = order[static_cast<std::size_t>(node.feature)];
  return forest;
}

Predictor train(const PredictorConfig& config, const TrainProtocol& protocol, const TargetLayout& layout,
                const Matrix& inputs, const Matrix& targets, double val_fraction, std::uint64_t seed) {
  const Index n = inputs.rows();
  if (n == 0) fail(ErrorCode::EmptyTrainSet, "no training examples");
  if (targets.rows() != n || targets.cols() != layout.heads())
    fail(ErrorCode::LengthMismatch, "targets do not match inputs and layout");
  if (!inputs.allFinite()) fail(ErrorCode::InvalidArgument, "inputs contain non-finite values");

  Predictor p;
  p.kind_ = config.kind;
  p.layout_ = layout;
  p.input_width_ = inputs.cols();
  if (all_columns_constant(inputs)) p.flags_.insert("degenerate_predictor");

  if (config.kind == ModelKind::knn) {
    p.knn_x_ = inputs;
    p.knn_y_ = targets;
    p.knn_k_ = std::min(config.k, n);
    return p;
  }
  if (config.kind == ModelKind::forest) {
    p.flags_.insert("forest-importance");
    for (Index h = 0; h < layout.heads(); ++h)
      p.forests_.push_back(fit_forest(inputs, targets.col(h), layout.classes[static_cast<std::size_t>(h)], config,
                                      seed + 0x100 * static_cast<std::uint64_t>(h)));
    return p;
  }

  CounterRng split_rng(seed, 1);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  split_rng.shuffle(std::span<Index>(perm));
  Index n_val = static_cast<Index>(std::llround(val_fraction * static_cast<double>(n)));
  if (n_val < 0 || n - n_val < 1) n_val = 0;
  const std::span<const Index> train_ids(perm.data(), static_cast<std::size_t>(n - n_val));
  const std::span<const Index> val_ids(perm.data() + (n - n_val), static_cast<std::size_t>(n_val));
  const Matrix xt = gather_rows(inputs, train_ids), yt = gather_rows(targets, train_ids);
  const Matrix xv = n_val > 0 ? gather_rows(inputs, val_ids) : xt;
  const Matrix yv = n_val > 0 ? gather_rows(targets, val_ids) : yt;

  CounterRng init(seed, 2);
  const int hidden = config.kind == ModelKind::linear ? 0 : config.hidden_layers;
  Mlp net(inputs.cols(), layout.output_width(), hidden, config.hidden_size, config.leaky_slope, init);

  BatchObjective objective = [&](const Mlp& m, std::span<const Index> batch, Vector* grad) {
    const Matrix xb = gather_rows(xt, batch), yb = gather_rows(yt, batch);
    Mlp::Cache cache;
    const Matrix out = m.forward(xb, grad ? &cache : nullptr);
    Matrix go;
    const double loss = task_loss(layout, out, yb, grad ? &go : nullptr);
    if (grad) *grad = m.backward(cache, go);
    return loss;
  };
  ValidationLoss validation = [&](const Mlp& m) { return task_loss(layout, m.forward(xv), yv); };
  p.history_ = fit(net, protocol, xt.rows(), objective, validation, seed);
  p.net_ = std::move(net);
  return p;
}

Matrix Predictor::predict(const Matrix& x) const {
  if (x.cols() != input_width_) fail(ErrorCode::WidthMismatch, "input width differs from training width");
  if (net_) return net_->forward(x);
  const Index n = x.rows();
  Matrix out = Matrix::Zero(n, layout_.output_width());
  if (kind_ == ModelKind::forest) {
    for (Index i = 0; i < n; ++i)
      for (Index h = 0; h < layout_.heads(); ++h) {
        const Eigen::RowVectorXd v = forests_[static_cast<std::size_t>(h)].predict(x.row(i));
        out.row(i).segment(layout_.offset(h), v.size()) = v;
      }
    return out;
  }
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(knn_x_.rows()));
  for (Index i = 0; i < n; ++i) {
    for (Index r = 0; r < knn_x_.rows(); ++r)
      dist[static_cast<std::size_t>(r)] = {(knn_x_.row(r) - x.row(i)).squaredNorm(), r};
    std::partial_sort(dist.begin(), dist.begin() + knn_k_, dist.end());
    for (Index t = 0; t < knn_k_; ++t) {
      const Index r = dist[static_cast<std::size_t>(t)].second;
      for (Index h = 0; h < layout_.heads(); ++h) {
        const Index at = layout_.offset(h);
        if (layout_.categorical(h))
          out(i, at + static_cast<Index>(std::llround(knn_y_(r, h)))) += 1.0 / static_cast<double>(knn_k_);
        else
          out(i, at) += knn_y_(r, h) / static_cast<double>(knn_k_);
      }
    }
  }
  return out;
}

Index predicted_class(const TargetLayout& layout, const Eigen::Ref<const Eigen::RowVectorXd>& output, Index head) {
  Index best = 0;
  output.segment(layout.offset(head), layout.classes[static_cast<std::size_t>(head)]).maxCoeff(&best);
  return best;
}

std::vector<HeadScore> evaluate(const TargetLayout& layout, const Matrix& predictions, const Matrix& targets) {
  const Index n = targets.rows();
  if (predictions.rows() != n) fail(ErrorCode::LengthMismatch, "predictions and targets differ in length");
  if (predictions.cols() != layout.output_width() || targets.cols() != layout.heads())
    fail(ErrorCode::WidthMismatch, "predictions do not match the target layout");
  if (n == 0) fail(ErrorCode::EmptyInput, "nothing to evaluate");
  std::vector<HeadScore> scores;
  for (Index h = 0; h < layout.heads(); ++h) {
    HeadScore s;
    s.categorical = layout.categorical(h);
    if (s.categorical) {
      Index correct = 0;
      for (Index i = 0; i < n; ++i)
        if (predicted_class(layout, predictions.row(i), h) == static_cast<Index>(std::llround(targets(i, h)))) ++correct;
      s.score = static_cast<double>(correct) / static_cast<double>(n);
    } else {
      const auto p = predictions.col(layout.offset(h)).array();
      const auto t = targets.col(h).array();
      const double mean = t.mean();
      const double ss_tot = (t - mean).square().sum();
      const double ss_res = (p - t).square().sum();
      s.mae = (p - t).abs().mean();
      if (ss_tot > 0) {
        s.score = 1.0 - ss_res / ss_tot;
      } else {
        s.defined = false;
        s.score = 0;
      }
    }
    scores.push_back(s);
  }
  return scores;
}

Vector feature_importance(const Predictor& predictor) {
  const Index d = predictor.input_width();
  if (predictor.flags().contains("degenerate_predictor") &&
      (predictor.kind() == ModelKind::forest || predictor.kind() == ModelKind::linear))
    return Vector::Constant(d, 1.0 / static_cast<double>(d));
  if (predictor.kind() == ModelKind::forest) {
    Vector sum = Vector::Zero(d);
    for (const auto& f : predictor.forests_) sum += f.importance;
    return sum / sum.sum();
  }
  if (predictor.kind() == ModelKind::linear) {
    const Vector mag = predictor.net_->weights().front().cwiseAbs().rowwise().sum();
    const double s = mag.sum();
    return s > 0 ? Vector(mag / s) : Vector::Constant(d, 1.0 / static_cast<double>(d));
  }
  fail(ErrorCode::UnsupportedKind, "feature importance needs a forest or linear predictor");
}

TrainProtocol baseline_protocol() {
  TrainProtocol p;
  p.learning_rate = 0.05;
  p.batch_size = 1 << 20;
  p.max_steps = 3000;
  p.halve_every = 500;
  p.eval_every = 3000;
  p.patience = 1;
  return p;
}

BaselineResult constant_baseline(const TargetLayout& layout, const Matrix& targets, std::uint64_t seed, Index seeds) {
  const Index n = targets.rows();
  if (n == 0) fail(ErrorCode::EmptyInput, "no targets for the baseline");
  const Matrix empty(n, 0);
  BaselineResult result;
  result.mean_scores.assign(static_cast<std::size_t>(layout.heads()), 0.0);
  for (std::uint64_t s = 0; s < static_cast<std::uint64_t>(seeds); ++s) {
    CounterRng init(seed, 0xba5e + s);
    Mlp net(0, layout.output_width(), 0, 0, 0.01, init);
    for (Index j = 0; j < net.biases()[0].size(); ++j) net.biases()[0](j) = init.uniform();
    BatchObjective objective = [&](const Mlp& m, std::span<const Index>, Vector* grad) {
      Mlp::Cache cache;
      const Matrix out = m.forward(empty, &cache);
      Matrix go;
      const double loss = task_loss(layout, out, targets, &go);
      if (grad) *grad = m.backward(cache, go);
      return loss;
    };
    ValidationLoss validation = [&](const Mlp& m) { return task_loss(layout, m.forward(empty), targets); };
    fit(net, baseline_protocol(), n, objective, validation, seed + s);
    const Eigen::RowVectorXd constant = net.biases()[0].transpose();
    const Matrix preds = constant.replicate(n, 1);
    result.per_seed.push_back(evaluate(layout, preds, targets));
    result.outputs.push_back(constant);
    for (Index h = 0; h < layout.heads(); ++h)
      result.mean_scores[static_cast<std::size_t>(h)] += result.per_seed.back()[static_cast<std::size_t>(h)].score / static_cast<double>(seeds);
  }
  return result;
}

Matrix LogisticModel::decision(const Matrix& x) const {
  Matrix z = ((x.rowwise() - center).array().rowwise() / scale.array()).matrix() * weights;
  z.rowwise() += bias;
  return z;
}

Matrix LogisticModel::probabilities(const Matrix& x) const {
  Matrix z = decision(x);
  for (Index i = 0; i < z.rows(); ++i) {
    z.row(i).array() -= z.row(i).maxCoeff();
    z.row(i) = z.row(i).array().exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

IndexVector LogisticModel::predict(const Matrix& x) const {
  const Matrix z = decision(x);
  IndexVector out(z.rows());
  for (Index i = 0; i < z.rows(); ++i) z.row(i).maxCoeff(&out(i));
  return out;
}

LogisticModel fit_logistic(const Matrix& x, const IndexVector& y, Index classes, const LogisticOptions& options) {
  const Index n = x.rows(), d = x.cols();
  if (n == 0) fail(ErrorCode::EmptyTrainSet, "no training examples");
  if (y.size() != n) fail(ErrorCode::LengthMismatch, "labels and inputs differ in length");
  if (classes < 1 || (y.array() < 0).any() || (y.array() >= classes).any())
    fail(ErrorCode::InvalidArgument, "class index out of range");

  LogisticModel model;
  model.center = x.colwise().mean();
  model.scale = ((x.rowwise() - model.center).array().square().colwise().mean()).sqrt();
  for (Index j = 0; j < d; ++j)
    if (!(model.scale(j) > 0)) model.scale(j) = 1;
  const Matrix xs = ((x.rowwise() - model.center).array().rowwise() / model.scale.array()).matrix();
  Matrix onehot = Matrix::Zero(n, classes);
  for (Index i = 0; i < n; ++i) onehot(i, y(i)) = 1;

  model.weights = Matrix::Zero(d, classes);
  model.bias = Eigen::RowVectorXd::Zero(classes);
  Matrix mw = Matrix::Zero(d, classes), vw = Matrix::Zero(d, classes);
  Eigen::RowVectorXd mb = Eigen::RowVectorXd::Zero(classes), vb = Eigen::RowVectorXd::Zero(classes);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double b1 = 1, b2 = 1;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index it = 0; it < options.iterations; ++it) {
    Matrix p = xs * model.weights;
    p.rowwise() += model.bias;
    for (Index i = 0; i < n; ++i) {
      p.row(i).array() -= p.row(i).maxCoeff();
      p.row(i) = p.row(i).array().exp().matrix();
      p.row(i) /= p.row(i).sum();
    }
    const Matrix g = (p - onehot) * inv_n;
    const Matrix gw = xs.transpose() * g + options.l2 * inv_n * model.weights;
    const Eigen::RowVectorXd gb = g.colwise().sum();
    b1 *= beta1;
    b2 *= beta2;
    mw = beta1 * mw + (1 - beta1) * gw;
    vw = beta2 * vw + (1 - beta2) * gw.cwiseAbs2();
    mb = beta1 * mb + (1 - beta1) * gb;
    vb = beta2 * vb + (1 - beta2) * gb.cwiseAbs2();
    model.weights.array() -= options.learning_rate * (mw.array() / (1 - b1)) / ((vw.array() / (1 - b2)).sqrt() + eps);
    model.bias.array() -= options.learning_rate * (mb.array() / (1 - b1)) / ((vb.array() / (1 - b2)).sqrt() + eps);
  }
  return model;
}

std::optional<double> roc_auc(const Vector& scores, const std::vector<bool>& positive) {
  const Index n = scores.size();
  if (static_cast<std::size_t>(n) != positive.size()) fail(ErrorCode::LengthMismatch, "scores and labels differ");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });
  double rank_sum = 0, npos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores(order[j]) == scores(order[i])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t t = i; t < j; ++t)
      if (positive[static_cast<std::size_t>(order[t])]) {
        rank_sum += avg;
        npos += 1;
      }
    i = j;
  }
  const double nneg = static_cast<double>(n) - npos;
  if (npos == 0 || nneg == 0) return std::nullopt;
  return (rank_sum - npos * (npos + 1) / 2) / (npos * nneg);
}

}  // namespace repreval::predict
