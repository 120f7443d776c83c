#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kt/dataset.hpp"
#include "kt/harness/config.hpp"
#include "kt/harness/model_io.hpp"
#include "kt/metrics.hpp"

namespace kt::harness {

struct PreparedData {
  Dataset full;  // after filtering
  FilterReport filter;
  SplitResult split;
};

/// Load, filter and split per the config. Throws ConfigError/DataError.
PreparedData prepare_data(const ExperimentConfig& config);

struct ModelResult {
  std::string key;  // config name
  std::string family;
  std::string model;  // display name
  std::optional<MetricReport> report;
  std::string error;
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
  bool truncated = false;
};

struct ResultsTable {
  std::string dataset;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<ModelResult> rows;
  FilterReport filter;
  std::size_t train_students = 0;
  std::size_t test_students = 0;
  std::size_t test_points = 0;

  bool any_failed() const;
};

/// Test-set labels and outcomes of one model, in sequence order.
struct EvaluationData {
  std::vector<std::uint8_t> labels;
  std::vector<PointOutcome> outcomes;
};

EvaluationData collect_predictions(const TrainedModel& model, const Dataset& test);
MetricReport evaluate_outcomes(const EvaluationData& data);

/// Fits and evaluates every configured model on the prepared split. A
/// failing model yields a row with `error` set; the others still run.
ResultsTable run_models(const ExperimentConfig& config, const PreparedData& data,
                        const ModelContext& context);

ResultsTable run_experiment(const ExperimentConfig& config);

/// results.md, results.csv, run.json and metrics/<model>.txt.
void write_outputs(const ResultsTable& table, const ExperimentConfig& config,
                   const std::filesystem::path& dir);

}  // namespace kt::harness
