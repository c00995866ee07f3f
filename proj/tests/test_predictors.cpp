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


#include "repreval/error.hpp"
#include "repreval/predictors.hpp"
#include "repreval/rng.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace repreval;
using namespace repreval::predict;

namespace {

Matrix uniform_matrix(CounterRng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

double loss_at(const Mlp& net, const TargetLayout& layout, const Matrix& x, const Matrix& y) {
  return task_loss(layout, net.forward(x), y);
}

// Pair-counting AUC: P(score_pos > score_neg) + 0.5 P(tie).
double brute_auc(const Vector& s, const std::vector<bool>& pos) {
  double num = 0, den = 0;
  for (Index i = 0; i < s.size(); ++i)
    for (Index j = 0; j < s.size(); ++j) {
      if (!pos[static_cast<std::size_t>(i)] || pos[static_cast<std::size_t>(j)]) continue;
      den += 1;
      num += s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0);
    }
  return num / den;
}

}  // namespace

TEST_SUITE("predictors") {

TEST_CASE("analytic gradients match central differences") {
  CounterRng rng(5);
  const TargetLayout layout{{3, 0, 2}};
  Mlp net(4, layout.output_width(), 2, 6, 0.01, rng);
  const Matrix x = uniform_matrix(rng, 7, 4);
  Matrix y(7, 3);
  for (Index i = 0; i < 7; ++i) {
    y(i, 0) = static_cast<double>(rng.below(3));
    y(i, 1) = rng.uniform();
    y(i, 2) = static_cast<double>(rng.below(2));
  }
  Mlp::Cache cache;
  Matrix grad_out;
  task_loss(layout, net.forward(x, &cache), y, &grad_out);
  const Vector analytic = net.backward(cache, grad_out);
  REQUIRE(analytic.size() == net.parameter_count());

  const Vector theta = net.parameters();
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(theta.size())));
    const double h = 1e-6;
    Vector plus = theta, minus = theta;
    plus(i) += h;
    minus(i) -= h;
    Mlp a = net, b = net;
    a.set_parameters(plus);
    b.set_parameters(minus);
    const double numeric = (loss_at(a, layout, x, y) - loss_at(b, layout, x, y)) / (2 * h);
    const double rel = std::abs(numeric - analytic(i)) / std::max(1e-8, std::abs(numeric) + std::abs(analytic(i)));
    if (std::abs(numeric) + std::abs(analytic(i)) > 1e-7) worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("early stopping fires after patience + 1 flat evaluations") {
  EarlyStopper s(3, 0.01);
  CHECK_FALSE(s.update(1.0));
  CHECK_FALSE(s.update(1.0));
  CHECK_FALSE(s.update(1.0));
  CHECK(s.update(1.0));
  CHECK(s.evaluations() == 4);

  EarlyStopper improving(3, 0.01);
  for (int i = 0; i < 20; ++i) CHECK_FALSE(improving.update(10.0 - i));

  CounterRng rng(1);
  Mlp net(2, 1, 1, 4, 0.01, rng);
  const TrainProtocol protocol;
  const TrainHistory h = fit(
      net, protocol, 100, [](const Mlp& m, std::span<const Index>, Vector* g) {
        if (g) *g = Vector::Zero(m.parameter_count());
        return 1.0;
      },
      [](const Mlp&) { return 1.0; }, 0);
  CHECK(h.evaluations == 4);
  CHECK(h.steps == 1000);
  CHECK(h.early_stopped);
}

TEST_CASE("linear model fits exactly linear data") {
  CounterRng rng(2);
  const Matrix x = uniform_matrix(rng, 400, 3);
  Vector w(3);
  w << 0.3, -0.2, 0.1;
  const Matrix y = ((x * w).array() + 0.25).matrix();
  TrainProtocol p;
  p.learning_rate = 0.01;
  p.max_steps = 6000;
  const TargetLayout layout = TargetLayout::numerical(1);
  const Predictor model = train(PredictorConfig::linear(), p, layout, x, y, 0.1, 3);
  const auto s = evaluate(layout, model.predict(x), y);
  CHECK(s[0].score >= 0.999);
  const Matrix zero = model.predict(Matrix::Zero(1, 3));
  CHECK(zero(0, 0) == doctest::Approx(model.network()->biases().back()(0)));
}

TEST_CASE("one hidden layer learns XOR") {
  Matrix x(200, 2), y(200, 1);
  for (Index i = 0; i < 200; ++i) {
    const int a = static_cast<int>(i % 2), b = static_cast<int>((i / 2) % 2);
    x(i, 0) = a;
    x(i, 1) = b;
    y(i, 0) = a ^ b;
  }
  const TargetLayout layout{{2}};
  const Predictor model = train(PredictorConfig::mlp(1), TrainProtocol{}, layout, x, y, 0.1, 0);
  CHECK(model.history().steps <= 6000);
  CHECK(evaluate(layout, model.predict(x), y)[0].score == 1.0);
}

TEST_CASE("training and prediction are bit-deterministic") {
  CounterRng rng(4);
  const Matrix x = uniform_matrix(rng, 120, 3);
  const Matrix y = x.col(0) * 0.5;
  TrainProtocol p;
  p.max_steps = 300;
  const TargetLayout layout = TargetLayout::numerical(1);
  const Predictor a = train(PredictorConfig::mlp(2), p, layout, x, y, 0.1, 9);
  const Predictor b = train(PredictorConfig::mlp(2), p, layout, x, y, 0.1, 9);
  CHECK(repreval::testing::bit_equal(a.network()->parameters(), b.network()->parameters()));
  CHECK(repreval::testing::bit_equal(a.predict(x), a.predict(x)));
}

TEST_CASE("one nearest neighbour returns the training target") {
  CounterRng rng(6);
  const Matrix x = uniform_matrix(rng, 30, 2);
  Matrix y(30, 2);
  for (Index i = 0; i < 30; ++i) {
    y(i, 0) = static_cast<double>(rng.below(3));
    y(i, 1) = rng.uniform();
  }
  const TargetLayout layout{{3, 0}};
  const Predictor knn = train(PredictorConfig::knn(1), TrainProtocol{}, layout, x, y, 0.0, 1);
  const Matrix out = knn.predict(x.topRows(5));
  for (Index i = 0; i < 5; ++i) {
    CHECK(predicted_class(layout, out.row(i), 0) == static_cast<Index>(y(i, 0)));
    CHECK(out(i, 3) == y(i, 1));
  }
}

TEST_CASE("evaluation scores") {
  CounterRng rng(7);
  const TargetLayout layout{{0}};
  const Matrix y = uniform_matrix(rng, 10000, 1);
  const auto perfect = evaluate(layout, y, y);
  CHECK(perfect[0].score == 1.0);
  CHECK(perfect[0].mae == 0.0);
  const auto mean = evaluate(layout, Matrix::Constant(10000, 1, y.mean()), y);
  CHECK(std::abs(mean[0].score) <= 1e-9);
  const auto half = evaluate(layout, Matrix::Constant(10000, 1, 0.5), y);
  CHECK(half[0].mae == doctest::Approx(0.25).epsilon(0.04));
  CHECK(half[0].score <= 1e-9);

  const TargetLayout cat{{3}};
  Matrix logits = Matrix::Zero(3, 3);
  Matrix labels(3, 1);
  labels << 0, 2, 1;
  for (Index i = 0; i < 3; ++i) logits(i, static_cast<Index>(labels(i, 0))) = 1;
  CHECK(evaluate(cat, logits, labels)[0].score == 1.0);
}

TEST_CASE("forest importance concentrates on the informative dim") {
  CounterRng rng(11);
  const Matrix x = uniform_matrix(rng, 2000, 6);
  const Matrix y = x.col(3);
  const TargetLayout layout = TargetLayout::numerical(1);
  const Predictor f = train(PredictorConfig::forest(10, 8), TrainProtocol{}, layout, x, y, 0.0, 2);
  const Vector imp = feature_importance(f);
  CHECK(std::abs(imp.sum() - 1.0) < 1e-12);
  CHECK(imp(3) >= 0.9);

  Matrix dup = x;
  dup.col(5) = dup.col(3);
  const Vector imp2 = feature_importance(train(PredictorConfig::forest(10, 8), TrainProtocol{}, layout, dup, y, 0.0, 2));
  CHECK(imp2(3) + imp2(5) >= 0.9);
  CHECK(imp2(3) > 0);
  CHECK(imp2(5) > 0);
}

TEST_CASE("forest importances follow a permutation of the inputs") {
  CounterRng rng(12);
  const Matrix x = uniform_matrix(rng, 300, 4);
  const Vector y = x.col(1) + 0.5 * x.col(2);
  const std::vector<Index> perm{2, 0, 3, 1};
  Matrix px(x.rows(), 4);
  for (Index j = 0; j < 4; ++j) px.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
  const Forest a = fit_forest(x, y, 0, PredictorConfig::forest(10, 6), 3);
  const Forest b = fit_forest(px, y, 0, PredictorConfig::forest(10, 6), 3);
  for (Index j = 0; j < 4; ++j) CHECK(b.importance(j) == a.importance(perm[static_cast<std::size_t>(j)]));
}

TEST_CASE("constant inputs give a degenerate predictor with uniform importance") {
  const Matrix x = Matrix::Constant(50, 4, 2.0);
  CounterRng rng(1);
  const Matrix y = uniform_matrix(rng, 50, 1);
  const Predictor f = train(PredictorConfig::forest(5, 4), TrainProtocol{}, TargetLayout::numerical(1), x, y, 0.0, 1);
  CHECK(f.flags().count("degenerate_predictor") == 1);
  const Vector imp = feature_importance(f);
  CHECK((imp.array() == 0.25).all());
}

TEST_CASE("constant baseline reaches the analytic optimum") {
  CounterRng rng(13);
  Matrix y(500, 2);
  for (Index i = 0; i < 500; ++i) {
    y(i, 0) = rng.uniform() < 0.6 ? 1.0 : static_cast<double>(rng.below(3));
    y(i, 1) = rng.uniform() * rng.uniform();
  }
  const TargetLayout layout{{3, 0}};
  const BaselineResult b = constant_baseline(layout, y, 5, 3);
  REQUIRE(b.outputs.size() == 3);
  std::vector<double> freq(3, 0);
  for (Index i = 0; i < 500; ++i) freq[static_cast<std::size_t>(y(i, 0))] += 1.0 / 500;
  for (const auto& out : b.outputs) {
    CHECK(std::abs(out(3) - y.col(1).mean()) < 1e-3);
    const Eigen::RowVectorXd logits = out.head(3);
    const Eigen::ArrayXd p = (logits.array() - logits.maxCoeff()).exp() / (logits.array() - logits.maxCoeff()).exp().sum();
    for (Index c = 0; c < 3; ++c) CHECK(std::abs(p(c) - freq[static_cast<std::size_t>(c)]) < 1e-3);
    CHECK(predicted_class(layout, out, 0) == 1);
  }

  const Matrix single = Matrix::Constant(20, 1, 2.0);
  const BaselineResult s = constant_baseline(TargetLayout{{4}}, single, 1, 2);
  CHECK(s.mean_scores[0] == 1.0);
}

TEST_CASE("ROC-AUC from ranks matches pair counting") {
  CounterRng rng(21);
  for (int t = 0; t < 100; ++t) {
    const Index n = 5 + static_cast<Index>(rng.below(30));
    Vector s(n);
    std::vector<bool> pos(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      s(i) = static_cast<double>(rng.below(6));
      pos[static_cast<std::size_t>(i)] = rng.uniform() < 0.4;
    }
    pos[0] = true;
    pos[1] = false;
    CHECK(std::abs(*roc_auc(s, pos) - brute_auc(s, pos)) < 1e-12);
  }
  CHECK_FALSE(roc_auc(Vector::Ones(3), {true, true, true}).has_value());
}

TEST_CASE("logistic regression separates separable classes") {
  CounterRng rng(3);
  Matrix x(300, 2);
  IndexVector y(300);
  for (Index i = 0; i < 300; ++i) {
    y(i) = static_cast<Index>(i % 3);
    x(i, 0) = static_cast<double>(y(i)) + 0.1 * rng.normal();
    x(i, 1) = rng.normal();
  }
  const LogisticModel m = fit_logistic(x, y, 3);
  CHECK((m.predict(x).array() == y.array()).count() >= 297);
}

TEST_CASE("canonical column order depends only on content") {
  Matrix x(3, 3);
  x << 3, 1, 2, 0, 0, 0, 1, 1, 1;
  const auto order = canonical_column_order(x);
  CHECK(order == std::vector<Index>{1, 2, 0});
}

}  // TEST_SUITE
