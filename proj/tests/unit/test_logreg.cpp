#include <cmath>
#include <sstream>

#include "builders.hpp"
#include "doctest.h"
#include "kt/logreg.hpp"
#include "kt/rng.hpp"

using namespace kt;

namespace {

FeatureVector dense(const std::vector<double>& x) {
  FeatureVector v;
  v.dimension = x.size();
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) {
      v.indices.push_back(static_cast<std::uint32_t>(j));
      v.values.push_back(x[j]);
    }
  }
  return v;
}

LrBatch random_batch(Rng& rng, std::size_t rows, std::size_t dim) {
  LrBatch b;
  b.dimension = dim;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> x(dim, 0.0);
    x[0] = 1.0;
    for (std::size_t j = 1; j < dim; ++j) {
      if (rng.bernoulli(0.5)) x[j] = rng.uniform(-2.0, 2.0);
    }
    b.add(dense(x), rng.bernoulli(0.5));
  }
  return b;
}

}  // namespace

TEST_CASE("sigmoid and prediction example") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  LrModel m;
  m.weights = {std::log(3.0), 0.0};
  const auto p = lr_predict(m, dense({1.0, 0.0}));
  CHECK(p.p_correct == doctest::Approx(0.75));
  CHECK(p.label == Label::kCorrect);
  CHECK_THROWS_AS(lr_predict(m, dense({1.0, 0.0, 1.0})), std::invalid_argument);
}

TEST_CASE("gradient at zero weights is (0.5 - y) x") {
  LrBatch b;
  b.dimension = 3;
  b.add(dense({1.0, 2.0, 0.0}), 1);
  const std::vector<double> w(3, 0.0);
  const auto g = lr_gradient(w, b, 0.0);
  CHECK(g[0] == doctest::Approx(-0.5));
  CHECK(g[1] == doctest::Approx(-1.0));
  CHECK(g[2] == 0.0);
  CHECK(lr_loss(w, b, 0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(91);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 2 + rng.below(8);
    const auto b = random_batch(rng, 1 + rng.below(20), dim);
    std::vector<double> w(dim);
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    const double lambda = rng.bernoulli(0.5) ? 0.0 : 0.01;
    const auto g = lr_gradient(w, b, lambda);
    for (std::size_t j = 0; j < dim; ++j) {
      auto up = w, down = w;
      up[j] += h;
      down[j] -= h;
      const double numeric = (lr_loss(up, b, lambda) - lr_loss(down, b, lambda)) / (2 * h);
      worst = std::max(worst, std::abs(numeric - g[j]));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("separable data is fit perfectly") {
  LrBatch b;
  b.dimension = 2;
  for (int i = 1; i <= 20; ++i) {
    b.add(dense({1.0, static_cast<double>(i)}), 1);
    b.add(dense({1.0, -static_cast<double>(i)}), 0);
  }
  LrFitConfig cfg;
  cfg.lambda = 1e-6;
  const auto w = fit_logistic(b, cfg);
  LrModel m;
  m.weights = w;
  for (int i = 1; i <= 20; ++i) {
    CHECK(lr_predict(m, dense({1.0, static_cast<double>(i)})).label == Label::kCorrect);
    CHECK(lr_predict(m, dense({1.0, -static_cast<double>(i)})).label == Label::kWrong);
  }
}

TEST_CASE("full-batch loss never increases") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto b = random_batch(rng, 50 + rng.below(100), 6);
    LrFitConfig cfg;
    LrFitTrace trace;
    fit_logistic(b, cfg, &trace);
    REQUIRE(trace.full_batch);
    REQUIRE(trace.losses.size() >= 2);
    for (std::size_t i = 1; i < trace.losses.size(); ++i) {
      CHECK(trace.losses[i] <= trace.losses[i - 1] + 1e-12);
    }
  }
}

TEST_CASE("mini-batch path is used above the row limit and lowers loss") {
  Rng rng(4);
  const auto b = random_batch(rng, 400, 5);
  LrFitConfig cfg;
  cfg.full_batch_limit = 100;
  cfg.minibatch_epochs = 10;
  LrFitTrace trace;
  const auto w = fit_logistic(b, cfg, &trace);
  CHECK_FALSE(trace.full_batch);
  CHECK(trace.losses.size() == 10);
  CHECK(lr_loss(w, b, cfg.lambda) < std::log(2.0));
}

TEST_CASE("Best-LR fit, predictions, and persistence") {
  Rng rng(8);
  const auto d = test::random_dataset(rng, 40, 10, 30, 4);
  LrFitConfig cfg;
  const auto m = fit_best_lr(d, cfg);
  CHECK(m.weights.size() == feature_dimension(m.features));
  const auto preds = lr_predict_sequence(m, d.sequences[0]);
  CHECK(preds.size() == d.sequences[0].size());
  for (const auto& p : preds) {
    CHECK(p.p_correct > 0.0);
    CHECK(p.p_correct < 1.0);
  }

  std::stringstream ss;
  save_lr(m, ss);
  const auto loaded = load_lr(ss);
  CHECK(loaded.weights == m.weights);
  CHECK(loaded.features == m.features);
  const auto again = lr_predict_sequence(loaded, d.sequences[0]);
  for (std::size_t i = 0; i < preds.size(); ++i) CHECK(again[i].p_correct == preds[i].p_correct);

  // Deterministic refit.
  CHECK(fit_best_lr(d, cfg).weights == m.weights);

  std::stringstream bad("not a model");
  CHECK_THROWS(load_lr(bad));
}

TEST_CASE("prediction fails on out-of-vocabulary skill") {
  Rng rng(9);
  const auto d = test::random_dataset(rng, 10, 5, 10, 3);
  const auto m = fit_best_lr(d);
  auto seq = test::make_sequence("x", {{0, 7, 1}});
  CHECK_THROWS_AS(lr_predict_sequence(m, seq), std::out_of_range);
}
