#include <cmath>

#include "builders.hpp"
#include "doctest.h"
#include "kt/error.hpp"
#include "kt/features.hpp"

using namespace kt;
using test::make_sequence;

TEST_CASE("empty history has zero counters") {
  const auto s = make_sequence("u", {{4, 2, 1}});
  const auto f = history_features(s, 0);
  CHECK(f.total_correct == 0);
  CHECK(f.total_wrong == 0);
  CHECK(f.skill_correct == 0);
  CHECK(f.skill_wrong == 0);
  CHECK(f.question_id == 4);
  CHECK(f.skill_id == 2);
  CHECK_THROWS_AS(history_features(s, 1), std::out_of_range);
}

TEST_CASE("hand-enumerated history") {
  // history (q1,s1,1), (q2,s2,1), (q3,s1,0); next (q7,s1)
  const auto s = make_sequence("u", {{1, 1, 1}, {2, 2, 1}, {3, 1, 0}, {7, 1, 1}});
  const auto f = history_features(s, 3);
  CHECK(f.total_correct == 2);
  CHECK(f.total_wrong == 1);
  CHECK(f.skill_correct == 1);
  CHECK(f.skill_wrong == 1);
  CHECK(f.question_id == 7);
  CHECK(f.position == 3);
}

TEST_CASE("single-skill history gives D = B and E = C") {
  const auto s = make_sequence("u", {{0, 5, 1}, {1, 5, 0}, {2, 5, 1}, {3, 5, 1}});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto f = history_features(s, i);
    CHECK(f.skill_correct == f.total_correct);
    CHECK(f.skill_wrong == f.total_wrong);
  }
}

TEST_CASE("incremental counters equal the direct definition and satisfy the invariants") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = test::random_dataset(rng, 3, 1, 40, 1 + rng.below(6));
    for (const auto& s : d.sequences) {
      const auto inc = sequence_features(s);
      REQUIRE(inc.size() == s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        // Naive O(i) scan, independent of history_features.
        std::uint32_t b = 0, c = 0, dd = 0, e = 0;
        for (std::size_t j = 0; j < i; ++j) {
          const auto& r = s.records[j];
          (r.correct ? b : c) += 1;
          if (r.skill == s.records[i].skill) (r.correct ? dd : e) += 1;
        }
        CHECK(inc[i] == history_features(s, i));
        CHECK(inc[i].total_correct == b);
        CHECK(inc[i].total_wrong == c);
        CHECK(inc[i].skill_correct == dd);
        CHECK(inc[i].skill_wrong == e);
        CHECK(inc[i].total_correct + inc[i].total_wrong == inc[i].position);
        CHECK(inc[i].skill_correct <= inc[i].total_correct);
        CHECK(inc[i].skill_wrong <= inc[i].total_wrong);
      }
    }
  }
}

TEST_CASE("Best-LR vector layout") {
  FeatureConfig cfg;
  cfg.num_skills = 4;
  cfg.num_items = 10;
  CHECK(feature_dimension(cfg) == 5 + 4);

  HistoryFeatures zero;
  zero.skill_id = 2;
  const auto x0 = best_lr_vector(zero, cfg);
  CHECK(x0.dimension == 9);
  std::vector<double> dense(9, 0.0);
  for (std::size_t k = 0; k < x0.indices.size(); ++k) dense[x0.indices[k]] += x0.values[k];
  CHECK(dense == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 1, 0});

  HistoryFeatures f{3, 1, 2, 5, 1, 4, 7};
  const auto x = best_lr_vector(f, cfg);
  CHECK(x.nonzeros() == 6);
  std::fill(dense.begin(), dense.end(), 0.0);
  for (std::size_t k = 0; k < x.indices.size(); ++k) dense[x.indices[k]] += x.values[k];
  CHECK(dense[1] == doctest::Approx(std::log(3.0)));
  CHECK(dense[1] == doctest::Approx(1.0986).epsilon(1e-4));
  CHECK(dense[2] == doctest::Approx(std::log(6.0)));
  CHECK(dense[3] == doctest::Approx(std::log(2.0)));
  CHECK(dense[4] == doctest::Approx(std::log(5.0)));
  CHECK(dense[6] == 1.0);

  // Differing only in skill id changes only the one-hot block.
  HistoryFeatures g = f;
  g.skill_id = 3;
  const auto y = best_lr_vector(g, cfg);
  std::vector<double> dense_y(9, 0.0);
  for (std::size_t k = 0; k < y.indices.size(); ++k) dense_y[y.indices[k]] += y.values[k];
  for (std::size_t j = 0; j < 5; ++j) CHECK(dense_y[j] == dense[j]);
  CHECK(dense_y[5 + 3] == 1.0);
  CHECK(dense_y[5 + 1] == 0.0);

  HistoryFeatures bad = f;
  bad.skill_id = 4;
  CHECK_THROWS_AS(best_lr_vector(bad, cfg), std::out_of_range);
}

TEST_CASE("feature options and descriptor round trip") {
  FeatureConfig cfg;
  cfg.log_scale = false;
  cfg.per_skill_counts = false;
  cfg.item_onehot = true;
  cfg.num_skills = 3;
  cfg.num_items = 6;
  CHECK(feature_dimension(cfg) == 3 + 3 + 6);
  HistoryFeatures f{5, 2, 4, 1, 0, 0, 5};
  const auto x = best_lr_vector(f, cfg);
  std::vector<double> dense(12, 0.0);
  for (std::size_t k = 0; k < x.indices.size(); ++k) dense[x.indices[k]] += x.values[k];
  CHECK(dense[1] == 4.0);
  CHECK(dense[2] == 1.0);
  CHECK(dense[3 + 2] == 1.0);
  CHECK(dense[6 + 5] == 1.0);
  CHECK(parse_feature_descriptor(describe(cfg)) == cfg);
  CHECK_THROWS_AS(parse_feature_descriptor("log_scale=1"), DataError);
}
