#include "builders.hpp"
#include "doctest.h"
#include "kt/baselines.hpp"
#include "kt/error.hpp"

using namespace kt;
using test::make_sequence;

TEST_CASE("prediction label follows the shared threshold") {
  CHECK(make_prediction(0.5).label == Label::kCorrect);
  CHECK(make_prediction(0.4999999).label == Label::kWrong);
  CHECK(make_prediction(0.2).label_probability() == doctest::Approx(0.8));
  CHECK(make_prediction(0.9).label_probability() == doctest::Approx(0.9));
}

TEST_CASE("fit_mean counts the training labels") {
  const auto d = test::make_dataset({make_sequence("a", {{0, 0, 1}, {0, 0, 0}}),
                                     make_sequence("b", {{0, 0, 1}, {0, 0, 1}})},
                                    1, 1);
  CHECK(fit_mean(d).train_mean == 0.75);
  const auto all = test::make_dataset({make_sequence("a", {{0, 0, 1}, {0, 0, 1}})}, 1, 1);
  CHECK(fit_mean(all).train_mean == 1.0);
  CHECK_THROWS_AS(fit_mean(test::make_dataset({}, 1, 1)), DataError);
}

TEST_CASE("mean predictor is constant and thresholded") {
  CHECK(predict_mean({0.765}).label == Label::kCorrect);
  CHECK(predict_mean({0.765}).p_correct == 0.765);
  CHECK(predict_mean({0.374}).label == Label::kWrong);
  CHECK(predict_mean({0.5}).label == Label::kCorrect);
}

TEST_CASE("NaP examples") {
  const MeanModel fallback{0.66};
  const auto s = make_sequence("u", {{0, 0, 1}, {0, 0, 1}, {0, 0, 0}, {0, 0, 1}});
  const auto p = predict_nap(history_features(s, 3), fallback);
  CHECK(p.p_correct == doctest::Approx(2.0 / 3.0));
  CHECK(p.label == Label::kCorrect);
  const auto w = make_sequence("u", {{0, 0, 0}, {0, 0, 0}, {0, 0, 1}});
  CHECK(predict_nap(history_features(w, 2), fallback).p_correct == 0.0);
  CHECK(predict_nap(history_features(w, 2), fallback).label == Label::kWrong);
  CHECK(predict_nap(history_features(w, 0), fallback).p_correct == 0.66);
}

TEST_CASE("NaP Skills examples") {
  const MeanModel fallback{0.5};
  // (s1,1),(s2,0),(s1,1),(s1,0), next s1
  const auto s = make_sequence("u", {{0, 1, 1}, {0, 2, 0}, {0, 1, 1}, {0, 1, 0}, {0, 1, 1}});
  CHECK(predict_nap_skills(history_features(s, 4), fallback).p_correct == doctest::Approx(2.0 / 3.0));
  // Unseen next skill falls back to NaP.
  const auto u = make_sequence("u", {{0, 1, 1}, {0, 1, 0}, {0, 1, 1}, {0, 9, 0}});
  const auto f = history_features(u, 3);
  CHECK(predict_nap_skills(f, fallback).p_correct == predict_nap(f, fallback).p_correct);
  // All history on the next skill equals NaP.
  const auto a = history_features(u, 2);
  CHECK(predict_nap_skills(a, fallback).p_correct == predict_nap(a, fallback).p_correct);
}

TEST_CASE("NaP equals the running mean of prior labels") {
  Rng rng(4);
  const MeanModel fallback{0.3};
  for (int trial = 0; trial < 40; ++trial) {
    const auto d = test::random_dataset(rng, 2, 1, 30, 3);
    for (const auto& s : d.sequences) {
      HistoryTracker tracker;
      double sum = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto p = predict_nap(tracker.features(s.records[i]), fallback);
        const double expected = i == 0 ? 0.3 : sum / static_cast<double>(i);
        CHECK(p.p_correct == doctest::Approx(expected).epsilon(1e-15));
        CHECK(p.label_probability() == std::max(p.p_correct, 1.0 - p.p_correct));
        sum += s.records[i].correct;
        tracker.consume(s.records[i]);
      }
    }
  }
}
