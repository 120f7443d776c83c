#pragma once

#include <string>
#include <vector>

#include "kt/harness/experiment.hpp"

namespace kt::harness {

enum class TableFormat { kMarkdown, kCsv };

/// Columns: Family, Model, AUC, F1, RMSE, Acc, Bal Acc, Precision, Recall.
/// Markdown rounds to two decimals and renders failed rows as dashes; csv
/// keeps full precision and appends n_points, failure_count and error.
std::string emit_table(const ResultsTable& table, TableFormat format);

/// Inverse of the csv form (rows only; run metadata is not part of it).
std::vector<ModelResult> parse_results_csv(const std::string& text);

}  // namespace kt::harness
