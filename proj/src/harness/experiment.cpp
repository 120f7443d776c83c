#include "kt/harness/experiment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>

#include "kt/error.hpp"
#include "kt/harness/table.hpp"
#include "kt/rng.hpp"
#include "kt/text_io.hpp"

namespace kt::harness {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

bool ResultsTable::any_failed() const {
  return std::any_of(rows.begin(), rows.end(), [](const ModelResult& r) { return !r.report; });
}

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData data;
  Dataset raw = load_interactions(config.dataset.path, config.dataset.format);
  if (!config.dataset.name.empty()) raw.name = config.dataset.name;
  if (config.filter) {
    std::tie(data.full, data.filter) = filter_degenerate_students(raw);
  } else {
    data.full = std::move(raw);
    data.filter.students_before = data.full.sequences.size();
  }
  SplitSpec spec;
  if (config.split.mode == SplitSpec::Mode::kExternal) {
    spec = SplitSpec::external(read_user_list(config.split.train_users),
                               read_user_list(config.split.test_users));
    // Listed users may have been removed by the filter.
    spec.allow_missing_users = config.filter;
  } else {
    spec = SplitSpec::seeded(config.split.train_fraction, derive_seed(config.seed, 1000));
  }
  data.split = apply_split(data.full, spec);
  spdlog::info("{}: {} students after filtering ({} removed), {} train / {} test", data.full.name,
               data.full.sequences.size(), data.filter.students_removed,
               data.split.train.sequences.size(), data.split.test.sequences.size());
  return data;
}

EvaluationData collect_predictions(const TrainedModel& model, const Dataset& test) {
  EvaluationData data;
  data.labels.reserve(test.num_interactions());
  data.outcomes.reserve(test.num_interactions());
  for (const auto& seq : test.sequences) {
    auto outcomes = model.predict(seq);
    if (outcomes.size() != seq.size()) {
      throw ModelError(model.name() + " returned " + std::to_string(outcomes.size()) +
                       " predictions for " + std::to_string(seq.size()) + " records");
    }
    for (std::size_t i = 0; i < seq.size(); ++i) {
      data.labels.push_back(seq.records[i].correct);
      data.outcomes.push_back(std::move(outcomes[i]));
    }
  }
  return data;
}

MetricReport evaluate_outcomes(const EvaluationData& data) {
  std::vector<std::uint8_t> labels;
  std::vector<Prediction> predictions;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < data.outcomes.size(); ++i) {
    if (data.outcomes[i].prediction) {
      labels.push_back(data.labels[i]);
      predictions.push_back(*data.outcomes[i].prediction);
    } else {
      ++failures;
    }
  }
  return metric_report(labels, predictions, failures);
}

ResultsTable run_models(const ExperimentConfig& config, const PreparedData& data,
                        const ModelContext& base_context) {
  ResultsTable table;
  table.dataset = data.full.name;
  table.seed = config.seed;
  table.config_hash = config_hash(config);
  table.filter = data.filter;
  table.train_students = data.split.train.sequences.size();
  table.test_students = data.split.test.sequences.size();
  table.test_points = data.split.test.num_interactions();

  for (const auto& m : config.models) {
    ModelResult row;
    row.key = m.name;
    row.family = model_family(m.name);
    row.model = model_display_name(m.name);
    ModelContext context = base_context;
    const auto budget = m.budget_seconds ? m.budget_seconds : config.budget_seconds;
    const auto start = std::chrono::steady_clock::now();
    if (budget) {
      context.deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double>(*budget));
    }
    try {
      const auto model = train_model(m, config, data.split.train, context);
      row.train_seconds = seconds_since(start);
      row.truncated = model->truncated();
      const auto predict_start = std::chrono::steady_clock::now();
      const auto eval = collect_predictions(*model, data.split.test);
      row.predict_seconds = seconds_since(predict_start);
      row.report = evaluate_outcomes(eval);
      spdlog::info("{} {}: auc={:.4f} rmse={:.4f} failures={} ({:.1f}s train{})", table.dataset,
                   m.name, row.report->auc, row.report->rmse, row.report->failure_count,
                   row.train_seconds, row.truncated ? ", truncated by budget" : "");
    } catch (const std::exception& e) {
      row.error = e.what();
      row.train_seconds = seconds_since(start);
      spdlog::error("{} {}: {}", table.dataset, m.name, row.error);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

ResultsTable run_experiment(const ExperimentConfig& config) {
  validate_for_run(config);
  const auto data = prepare_data(config);
  const bool needs_llm = std::any_of(config.models.begin(), config.models.end(),
                                     [](const ModelConfig& m) { return is_llm_model(m.name); });
  ModelContext context;
  if (needs_llm) context.backend = make_backend(config.llm);
  return run_models(config, data, context);
}

void write_outputs(const ResultsTable& table, const ExperimentConfig& config,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "metrics");
  write_file(dir / "results.md", emit_table(table, TableFormat::kMarkdown));
  write_file(dir / "results.csv", emit_table(table, TableFormat::kCsv));
  Json run;
  run["dataset"] = table.dataset;
  run["seed"] = table.seed;
  run["config_hash"] = table.config_hash;
  run["config"] = config_to_json(config);
  run["filter"] = {{"students_before", table.filter.students_before},
                   {"students_removed", table.filter.students_removed},
                   {"removed_fraction", table.filter.removed_fraction}};
  run["train_students"] = table.train_students;
  run["test_students"] = table.test_students;
  run["test_points"] = table.test_points;
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    Json row = {{"model", r.key},
                {"train_seconds", r.train_seconds},
                {"predict_seconds", r.predict_seconds},
                {"truncated", r.truncated},
                {"error", r.error}};
    rows.push_back(row);
    write_file(dir / "metrics" / (r.key + ".txt"),
               r.report ? format_report(*r.report) : "error=" + r.error + "\n");
  }
  run["rows"] = rows;
  write_file(dir / "run.json", run.dump(2) + "\n");
}

}  // namespace kt::harness
