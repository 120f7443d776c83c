#include <filesystem>
#include <fstream>
#include <sstream>

#include "builders.hpp"
#include "doctest.h"
#include "kt/dataset.hpp"
#include "kt/error.hpp"
#include "kt/harness/config.hpp"
#include "kt/harness/experiment.hpp"
#include "kt/harness/model_io.hpp"
#include "kt/harness/table.hpp"
#include "kt/llm/mock_backend.hpp"
#include "kt/rng.hpp"

using namespace kt;
using namespace kt::harness;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / ("kt_harness_" + name)) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void write_toy_csv(const std::filesystem::path& file, std::uint64_t seed, std::size_t students) {
  Rng rng(seed);
  const auto d = test::random_dataset(rng, students, 8, 30, 4);
  std::ofstream out(file);
  write_interactions(d, out);
}

Json small_models() {
  return Json::parse(R"([
    "mean", "nap", "nap-skills", "bkt", "best-lr",
    {"name": "dkt", "hidden_size": 6, "epochs": 2, "max_seq_len": 20},
    {"name": "sakt", "embed_dim": 8, "num_heads": 2, "window": 10, "epochs": 2},
    "llm-zero-shot", "llm-ft-minimal", "llm-ft-extended"])");
}

Json toy_config(const std::string& csv) {
  Json j;
  j["dataset"] = {{"path", csv}, {"name", "toy"}};
  j["models"] = small_models();
  j["seed"] = 3;
  j["llm"] = {{"backend", "mock"},
              {"mock", {{"weights", {0.3, -0.3, 0.5, -0.5}}}},
              {"retry", {{"initial_backoff_ms", 0}}}};
  return j;
}

MetricReport report_with(double auc) {
  MetricReport r;
  r.auc = auc;
  r.f1 = 0.123456789;
  r.rmse = 0.4;
  r.accuracy = 0.6;
  r.balanced_accuracy = 0.55;
  r.precision = 1.0 / 3.0;
  r.recall = 0.7;
  r.n_points = 42;
  r.failure_count = 2;
  return r;
}

}  // namespace

TEST_CASE("config parsing, defaults and validation") {
  const auto cfg = parse_config(toy_config("data/toy.csv"), "/base");
  CHECK(cfg.dataset.path == std::filesystem::path("/base/data/toy.csv"));
  CHECK(cfg.models.size() == 10);
  CHECK(cfg.models[5].params["hidden_size"] == 6);
  CHECK(cfg.llm.mock.weights[2] == 0.5);
  CHECK(cfg.filter);
  CHECK(cfg.split.mode == SplitSpec::Mode::kSeeded);

  auto bad = toy_config("x.csv");
  bad["unknown"] = 1;
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = toy_config("x.csv");
  bad["models"] = Json::array({"gpt-5"});
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = toy_config("x.csv");
  bad["models"] = Json::parse(R"([{"name": "dkt", "hidden_size": "big"}])");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = toy_config("x.csv");
  bad["models"] = Json::parse(R"([{"name": "bkt", "hidden_size": 3}])");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);

  auto empty = parse_config(toy_config("/nonexistent/x.csv"));
  CHECK_THROWS_AS(validate_for_run(empty), ConfigError);
  empty.models.clear();
  CHECK_THROWS_AS(validate_for_run(empty), ConfigError);
}

TEST_CASE("config hash changes iff a field changes") {
  const auto base = parse_config(toy_config("x.csv"), "/b");
  CHECK(config_hash(base) == config_hash(parse_config(toy_config("x.csv"), "/b")));
  // Canonical form: spelling out a default leaves the hash alone.
  auto explicit_default = toy_config("x.csv");
  explicit_default["filter"] = {{"enabled", true}};
  CHECK(config_hash(parse_config(explicit_default, "/b")) == config_hash(base));

  std::vector<Json> variants;
  auto v = toy_config("x.csv");
  v["seed"] = 4;
  variants.push_back(v);
  v = toy_config("y.csv");
  variants.push_back(v);
  v = toy_config("x.csv");
  v["filter"] = {{"enabled", false}};
  variants.push_back(v);
  v = toy_config("x.csv");
  v["models"][5]["hidden_size"] = 7;
  variants.push_back(v);
  v = toy_config("x.csv");
  v["llm"]["mock"]["weights"][0] = 0.31;
  variants.push_back(v);
  v = toy_config("x.csv");
  v["output_dir"] = "elsewhere";
  variants.push_back(v);
  v = toy_config("x.csv");
  v["split"] = {{"train_fraction", 0.7}};
  variants.push_back(v);
  for (const auto& j : variants) CHECK(config_hash(parse_config(j, "/b")) != config_hash(base));

  // Round trip through the canonical form.
  CHECK(config_hash(parse_config(config_to_json(base), "/")) == config_hash(base));
}

TEST_CASE("model seeds do not depend on config order") {
  auto a = parse_config(toy_config("x.csv"));
  auto b = a;
  std::reverse(b.models.begin(), b.models.end());
  for (const auto& name : known_models()) CHECK(model_seed(a, name) == model_seed(b, name));
  CHECK(model_seed(a, "dkt") != model_seed(a, "sakt"));
}

TEST_CASE("markdown table layout") {
  ResultsTable t;
  t.dataset = "toy";
  ModelResult ok{"bkt", "KT models", "BKT", report_with(0.6666), {}, 0, 0, false};
  ModelResult failed{"dkt", "KT models", "DKT", std::nullopt, "diverged", 0, 0, false};
  t.rows = {ok, failed};
  const auto md = emit_table(t, TableFormat::kMarkdown);
  CHECK(md.find("| Family | Model | AUC | F1 | RMSE | Acc | Bal Acc | Precision | Recall |") !=
        std::string::npos);
  CHECK(md.find("| KT models | BKT | 0.67 | 0.12 | 0.40 | 0.60 | 0.55 | 0.33 | 0.70 |") !=
        std::string::npos);
  CHECK(md.find("| KT models | DKT | — | — |") != std::string::npos);
}

TEST_CASE("csv table round-trips at full precision") {
  Rng rng(9);
  ResultsTable t;
  for (int i = 0; i < 20; ++i) {
    auto r = report_with(rng.uniform());
    r.f1 = rng.uniform();
    r.rmse = rng.uniform() / 3.0;
    ModelResult row{"m" + std::to_string(i), "Baselines", "Model, \"quoted\" " + std::to_string(i),
                    r, {}, 0, 0, false};
    if (i % 5 == 0) {
      row.report.reset();
      row.error = "failed: line1, with comma";
    }
    t.rows.push_back(row);
  }
  const auto rows = parse_results_csv(emit_table(t, TableFormat::kCsv));
  REQUIRE(rows.size() == t.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].model == t.rows[i].model);
    CHECK(rows[i].family == t.rows[i].family);
    CHECK(rows[i].error == t.rows[i].error);
    REQUIRE(rows[i].report.has_value() == t.rows[i].report.has_value());
    if (!rows[i].report) continue;
    const auto &a = *rows[i].report, &b = *t.rows[i].report;
    CHECK(a.auc == b.auc);
    CHECK(a.f1 == b.f1);
    CHECK(a.rmse == b.rmse);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.balanced_accuracy == b.balanced_accuracy);
    CHECK(a.precision == b.precision);
    CHECK(a.recall == b.recall);
    CHECK(a.n_points == b.n_points);
    CHECK(a.failure_count == b.failure_count);
  }
}

TEST_CASE("end-to-end run with every model family") {
  TempDir dir("e2e");
  write_toy_csv(dir.path / "toy.csv", 21, 30);
  auto j = toy_config("toy.csv");
  j["output_dir"] = "out";
  const auto cfg = parse_config(j, dir.path);
  const auto table = run_experiment(cfg);
  REQUIRE(table.rows.size() == 10);
  CHECK_FALSE(table.any_failed());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    CAPTURE(row.key);
    CHECK(row.key == cfg.models[i].name);
    REQUIRE(row.report);
    CHECK(row.report->n_points == table.test_points);
    CHECK(row.report->auc >= 0.0);
    CHECK(row.report->auc <= 1.0);
    CHECK(row.report->failure_count == 0);
  }
  CHECK(table.rows[0].report->auc == 0.5);

  write_outputs(table, cfg, cfg.output_dir);
  for (const char* f : {"results.md", "results.csv", "run.json", "metrics/bkt.txt"}) {
    CHECK(std::filesystem::exists(cfg.output_dir / f));
  }

  // Same config and seed, same table.
  const auto again = run_experiment(cfg);
  CHECK(emit_table(again, TableFormat::kCsv) == emit_table(table, TableFormat::kCsv));
}

TEST_CASE("a failing model does not abort the others") {
  TempDir dir("isolation");
  write_toy_csv(dir.path / "toy.csv", 22, 20);
  auto j = toy_config("toy.csv");
  j["models"] = Json::parse(
      R"(["mean", {"name": "sakt", "embed_dim": 8, "num_heads": 3}, "nap", "llm-ft-minimal"])");
  j["llm"]["backend"] = "replay";
  std::ofstream(dir.path / "empty.jsonl").flush();
  j["llm"]["replay_file"] = "empty.jsonl";
  const auto table = run_experiment(parse_config(j, dir.path));
  REQUIRE(table.rows.size() == 4);
  CHECK(table.rows[0].report.has_value());
  CHECK_FALSE(table.rows[1].report.has_value());
  CHECK_FALSE(table.rows[1].error.empty());
  CHECK(table.rows[2].report.has_value());
  CHECK_FALSE(table.rows[3].report.has_value());
  CHECK(table.any_failed());
}

TEST_CASE("dataset errors are fatal") {
  TempDir dir("fatal");
  std::ofstream(dir.path / "bad.csv") << "user_id,item_id,skill_id,correct\nu1,1,1,2\n";
  CHECK_THROWS_AS(run_experiment(parse_config(toy_config("bad.csv"), dir.path)), DataError);
}

TEST_CASE("saved models reload with identical predictions") {
  TempDir dir("io");
  write_toy_csv(dir.path / "toy.csv", 23, 20);
  const auto cfg = parse_config(toy_config("toy.csv"), dir.path);
  const auto data = prepare_data(cfg);
  ModelContext ctx{make_backend(cfg.llm), std::nullopt};
  for (const auto& m : cfg.models) {
    CAPTURE(m.name);
    const auto model = train_model(m, cfg, data.split.train, ctx);
    std::stringstream ss;
    save_model(*model, data.split.train, ss);
    const auto loaded = load_model(ss, data.split.train, cfg, ctx);
    CHECK(loaded->name() == m.name);
    for (const auto& seq : data.split.test.sequences) {
      const auto a = model->predict(seq), b = loaded->predict(seq);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].prediction->p_correct == b[i].prediction->p_correct);
      }
    }
  }
  // Different vocabulary, refused.
  Rng rng(1);
  auto other = test::random_dataset(rng, 5, 3, 5, 2);
  const auto mean = train_model(cfg.models[0], cfg, data.split.train, ctx);
  std::stringstream ss;
  save_model(*mean, data.split.train, ss);
  CHECK_THROWS_AS(load_model(ss, other, cfg, ctx), DataError);
}

TEST_CASE("flipping test labels never changes emitted probabilities") {
  TempDir dir("leak");
  write_toy_csv(dir.path / "toy.csv", 24, 24);
  const auto cfg = parse_config(toy_config("toy.csv"), dir.path);
  const auto data = prepare_data(cfg);
  ModelContext ctx{make_backend(cfg.llm), std::nullopt};
  Rng rng(5);
  for (const auto& m : cfg.models) {
    CAPTURE(m.name);
    const auto model = train_model(m, cfg, data.split.train, ctx);
    const auto base = collect_predictions(*model, data.split.test);
    const auto base_report = evaluate_outcomes(base);

    // Flipping each sequence's final label moves the metrics but no
    // emitted probability.
    Dataset flipped = data.split.test;
    for (auto& seq : flipped.sequences) seq.records.back().correct ^= 1;
    const auto eval = collect_predictions(*model, flipped);
    REQUIRE(eval.outcomes.size() == base.outcomes.size());
    for (std::size_t k = 0; k < eval.outcomes.size(); ++k) {
      CHECK(eval.outcomes[k].prediction->p_correct == base.outcomes[k].prediction->p_correct);
    }
    const auto flipped_report = evaluate_outcomes(eval);
    CHECK(flipped_report.rmse != base_report.rmse);

    // Perturbing step i leaves steps <= i unchanged.
    for (const auto& seq : data.split.test.sequences) {
      const auto ref = model->predict(seq);
      const std::size_t i = rng.below(seq.size());
      auto changed = seq;
      changed.records[i].correct ^= 1;
      const auto out = model->predict(changed);
      for (std::size_t t = 0; t <= i; ++t) {
        CHECK(out[t].prediction->p_correct == ref[t].prediction->p_correct);
      }
    }
  }
}
