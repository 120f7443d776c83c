#include <cmath>
#include <numeric>
#include <sstream>

#include "builders.hpp"
#include "doctest.h"
#include "kt/error.hpp"
#include "kt/neural/adam.hpp"
#include "kt/neural/checkpoint.hpp"
#include "kt/neural/dkt.hpp"
#include "kt/neural/grad_check.hpp"
#include "kt/neural/sakt.hpp"
#include "kt/rng.hpp"

using namespace kt;
using namespace kt::nn;

namespace {

// Every parameter random, so no gradient path is trivially zero.
void scramble(TensorList& params, std::uint64_t seed, double limit = 0.5) {
  Rng rng(seed);
  for (auto& t : params) init_uniform(t, rng, limit);
}

Dataset tiny_data(std::uint64_t seed, std::size_t n_skills, std::size_t students,
                  std::size_t max_len) {
  Rng rng(seed);
  return test::random_dataset(rng, students, 2, max_len, n_skills, 2);
}

Dataset always_correct(std::size_t students, std::size_t len, std::size_t n_skills) {
  std::vector<StudentSequence> seqs;
  for (std::size_t u = 0; u < students; ++u) {
    std::vector<test::Triple> recs;
    for (std::size_t t = 0; t < len; ++t) {
      const auto k = static_cast<SkillId>((u + t) % n_skills);
      recs.emplace_back(k, k, 1);
    }
    seqs.push_back(test::make_sequence("u" + std::to_string(u), recs));
  }
  return test::make_dataset(std::move(seqs), n_skills, n_skills);
}

double mean_p(const std::vector<Prediction>& preds) {
  double s = 0.0;
  for (const auto& p : preds) s += p.p_correct;
  return s / static_cast<double>(preds.size());
}

DktConfig tiny_dkt() {
  DktConfig c;
  c.hidden_size = 4;
  c.max_seq_len = 6;
  return c;
}

SaktConfig tiny_sakt(std::size_t heads = 1) {
  SaktConfig c;
  c.embed_dim = 8;
  c.num_heads = heads;
  c.window = 4;
  return c;
}

}  // namespace

TEST_CASE("DKT input encoding") {
  const auto x = encode_dkt_input({0, 2, 1, 0}, 3);
  REQUIRE(x.size() == 6);
  CHECK(x == std::vector<double>{0, 0, 0, 0, 0, 1});
  const auto y = encode_dkt_input({0, 0, 0, 0}, 3);
  CHECK(y == std::vector<double>{1, 0, 0, 0, 0, 0});
  CHECK(std::accumulate(x.begin(), x.end(), 0.0) == 1.0);
  CHECK_THROWS_AS(encode_dkt_input({0, 3, 1, 0}, 3), std::out_of_range);
}

TEST_CASE("freshly initialized models predict one half") {
  const auto d = tiny_data(1, 3, 4, 10);
  const auto dkt = init_dkt(3, d.skill_vocab, tiny_dkt());
  const auto sakt = init_sakt(3, d.skill_vocab, tiny_sakt());
  for (const auto& s : d.sequences) {
    for (const auto& p : dkt_predict_sequence(dkt, s)) CHECK(p.p_correct == 0.5);
    for (const auto& p : sakt_predict_sequence(sakt, s)) CHECK(p.p_correct == 0.5);
  }
}

TEST_CASE("DKT analytic gradient matches finite differences") {
  const auto d = tiny_data(2, 3, 3, 9);
  auto m = init_dkt(3, d.skill_vocab, tiny_dkt());
  scramble(m.params, 10);
  const auto slices = chunk_sequences(d, m.config.max_seq_len);
  const auto r = grad_check(
      m.params, [&](const TensorList& p, TensorList* g) { return dkt_loss(m, p, slices, g); },
      1e-4);
  CHECK(r.finite);
  CHECK(r.parameters > 0);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("SAKT analytic gradient matches finite differences") {
  for (std::size_t heads : {1u, 2u}) {
    CAPTURE(heads);
    const auto d = tiny_data(3, 3, 3, 9);
    auto m = init_sakt(3, d.skill_vocab, tiny_sakt(heads));
    scramble(m.params, 11);
    // Short slices so that context before `begin` is exercised too.
    const auto slices = chunk_sequences(d, 3);
    const auto r = grad_check(
        m.params, [&](const TensorList& p, TensorList* g) { return sakt_loss(m, p, slices, g); },
        1e-4);
    CHECK(r.finite);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("models stay finite on all-zero parameters") {
  const auto d = tiny_data(4, 3, 3, 8);
  auto dkt = init_dkt(3, d.skill_vocab, tiny_dkt());
  set_zero(dkt.params);
  auto sakt = init_sakt(3, d.skill_vocab, tiny_sakt());
  set_zero(sakt.params);
  const auto slices = chunk_sequences(d, 4);
  TensorList g1 = zeros_like(dkt.params), g2 = zeros_like(sakt.params);
  CHECK(std::isfinite(dkt_loss(dkt, dkt.params, slices, &g1)));
  CHECK(std::isfinite(sakt_loss(sakt, sakt.params, slices, &g2)));
  CHECK(all_finite(g1));
  CHECK(all_finite(g2));
}

TEST_CASE("predictions do not depend on the current or future responses") {
  const auto d = tiny_data(5, 3, 1, 12);
  auto dkt = init_dkt(3, d.skill_vocab, tiny_dkt());
  scramble(dkt.params, 1);
  auto sakt = init_sakt(3, d.skill_vocab, tiny_sakt(2));
  scramble(sakt.params, 2);
  const auto& seq = d.sequences[0];
  const auto base_d = dkt_predict_sequence(dkt, seq);
  const auto base_s = sakt_predict_sequence(sakt, seq);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    auto changed = seq;
    for (std::size_t j = i; j < seq.size(); ++j) changed.records[j].correct ^= 1;
    const auto pd = dkt_predict_sequence(dkt, changed);
    const auto ps = sakt_predict_sequence(sakt, changed);
    for (std::size_t j = 0; j <= i; ++j) {
      CHECK(pd[j].p_correct == base_d[j].p_correct);
      CHECK(ps[j].p_correct == base_s[j].p_correct);
    }
  }
}

TEST_CASE("SAKT attention rows are distributions over the visible window") {
  const auto d = tiny_data(6, 3, 1, 12);
  auto m = init_sakt(3, d.skill_vocab, tiny_sakt(2));
  scramble(m.params, 3);
  const auto& seq = d.sequences[0];
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto rows = sakt_attention_weights(m, seq, i);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
      CHECK(row.size() == 1 + std::min(i, m.config.window - 1));
      double s = 0.0;
      for (double w : row) {
        CHECK(w >= 0.0);
        s += w;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(sakt_attention_weights(m, seq, seq.size()), std::out_of_range);
}

TEST_CASE("SAKT configuration validation") {
  auto c = tiny_sakt();
  c.num_heads = 3;
  CHECK_THROWS_AS(init_sakt(2, {"a", "b"}, c), ConfigError);
  c = tiny_sakt();
  c.window = 1;
  CHECK_THROWS_AS(init_sakt(2, {"a", "b"}, c), ConfigError);
  CHECK_THROWS_AS(init_sakt(0, {}, tiny_sakt()), DataError);
  auto dc = tiny_dkt();
  dc.hidden_size = 0;
  CHECK_THROWS_AS(init_dkt(2, {"a", "b"}, dc), ConfigError);
}

TEST_CASE("models learn an always-correct population") {
  const auto d = always_correct(20, 15, 3);
  auto dc = tiny_dkt();
  dc.hidden_size = 8;
  dc.train.epochs = 5;
  dc.train.learning_rate = 0.05;
  dc.train.batch_size = 4;
  const auto dkt = fit_dkt(d, dc);
  auto sc = tiny_sakt();
  sc.train = dc.train;
  const auto sakt = fit_sakt(d, sc);
  CHECK(mean_p(dkt_predict_sequence(dkt, d.sequences[0])) > 0.9);
  CHECK(mean_p(sakt_predict_sequence(sakt, d.sequences[0])) > 0.9);
}

TEST_CASE("training lowers the loss") {
  const auto d = tiny_data(7, 4, 30, 20);
  auto dc = tiny_dkt();
  dc.hidden_size = 8;
  dc.max_seq_len = 20;
  dc.train.learning_rate = 0.01;
  auto sc = tiny_sakt();
  sc.window = 8;
  sc.train = dc.train;

  auto check = [&](auto model, auto loss_fn) {
    const auto slices = chunk_sequences(d, 20);
    const double initial = loss_fn(model, model.params, slices, nullptr);
    TensorList grads = zeros_like(model.params);
    Adam adam(model.params, AdamConfig{0.01});
    for (int step = 0; step < 50; ++step) {
      loss_fn(model, model.params, slices, &grads);
      adam.step(model.params, grads);
    }
    return loss_fn(model, model.params, slices, nullptr) < initial;
  };
  CHECK(check(init_dkt(4, d.skill_vocab, dc), dkt_loss));
  CHECK(check(init_sakt(4, d.skill_vocab, sc), sakt_loss));
}

TEST_CASE("training is deterministic for a seed") {
  const auto d = tiny_data(8, 3, 10, 12);
  auto dc = tiny_dkt();
  dc.train.epochs = 2;
  dc.train.seed = 17;
  CHECK(fit_dkt(d, dc).params == fit_dkt(d, dc).params);
  auto sc = tiny_sakt();
  sc.train = dc.train;
  CHECK(fit_sakt(d, sc).params == fit_sakt(d, sc).params);
  auto other = dc;
  other.train.seed = 18;
  CHECK_FALSE(fit_dkt(d, dc).params == fit_dkt(d, other).params);
}

TEST_CASE("checkpoints round trip exactly") {
  const auto d = tiny_data(9, 3, 5, 10);
  auto dkt = init_dkt(3, d.skill_vocab, tiny_dkt());
  scramble(dkt.params, 4);
  std::stringstream a;
  save_dkt(dkt, a);
  const auto dkt2 = load_dkt(a);
  CHECK(dkt2.params == dkt.params);
  CHECK(dkt2.skill_names == dkt.skill_names);
  CHECK(dkt2.config.hidden_size == 4);

  auto sakt = init_sakt(3, d.skill_vocab, tiny_sakt(2));
  scramble(sakt.params, 5);
  std::stringstream b;
  save_sakt(sakt, b);
  const auto text = b.str();
  const auto sakt2 = load_sakt(b);
  CHECK(sakt2.params == sakt.params);
  CHECK(sakt2.config.num_heads == 2);
  const auto& seq = d.sequences[0];
  const auto p1 = sakt_predict_sequence(sakt, seq), p2 = sakt_predict_sequence(sakt2, seq);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].p_correct == p2[i].p_correct);

  std::stringstream wrong(text);
  CHECK_THROWS_AS(load_dkt(wrong), DataError);
  std::stringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS(load_sakt(truncated));
}

TEST_CASE("training with a past deadline stops early") {
  const auto d = tiny_data(10, 3, 10, 12);
  auto dc = tiny_dkt();
  dc.train.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  const auto m = fit_dkt(d, dc);
  CHECK(m.summary.truncated);
  CHECK(m.summary.epochs_completed == 0);
}
