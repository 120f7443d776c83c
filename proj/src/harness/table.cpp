#include "kt/harness/table.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "kt/error.hpp"
#include "kt/text_io.hpp"

namespace kt::harness {
namespace {

constexpr const char* kDash = "\xE2\x80\x94";  // U+2014, the placeholder of failed rows

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

constexpr const char* kCsvHeader =
    "family,model,auc,f1,rmse,accuracy,balanced_accuracy,precision,recall,n_points,failure_count,"
    "error";

}  // namespace

std::string emit_table(const ResultsTable& table, TableFormat format) {
  std::ostringstream out;
  if (format == TableFormat::kMarkdown) {
    out << "| Family | Model | AUC | F1 | RMSE | Acc | Bal Acc | Precision | Recall |\n";
    out << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : table.rows) {
      out << "| " << r.family << " | " << r.model;
      if (r.report) {
        const auto& m = *r.report;
        for (double v : {m.auc, m.f1, m.rmse, m.accuracy, m.balanced_accuracy, m.precision, m.recall}) {
          out << " | " << two_decimals(v);
        }
      } else {
        for (int k = 0; k < 7; ++k) out << " | " << kDash;
      }
      out << " |\n";
    }
    return out.str();
  }
  out << kCsvHeader << '\n';
  for (const auto& r : table.rows) {
    out << csv_field(r.family) << ',' << csv_field(r.model);
    if (r.report) {
      const auto& m = *r.report;
      for (double v : {m.auc, m.f1, m.rmse, m.accuracy, m.balanced_accuracy, m.precision, m.recall}) {
        out << ',' << format_double(v);
      }
      out << ',' << m.n_points << ',' << m.failure_count << ',';
    } else {
      out << ",,,,,,,,,,";
    }
    out << csv_field(r.error) << '\n';
  }
  return out.str();
}

std::vector<ModelResult> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw DataError("results csv: unexpected header");
  std::vector<ModelResult> rows;
  while (std::getline(in, line)) {
    // A quoted error message may span lines.
    while (std::count(line.begin(), line.end(), '"') % 2 == 1) {
      std::string more;
      if (!std::getline(in, more)) throw DataError("results csv: unterminated quote");
      line += '\n' + more;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw DataError("results csv: expected 12 fields, got " + std::to_string(f.size()));
    ModelResult r;
    r.family = f[0];
    r.model = f[1];
    r.error = f[11];
    if (!f[2].empty()) {
      MetricReport m;
      m.auc = parse_double(f[2]);
      m.f1 = parse_double(f[3]);
      m.rmse = parse_double(f[4]);
      m.accuracy = parse_double(f[5]);
      m.balanced_accuracy = parse_double(f[6]);
      m.precision = parse_double(f[7]);
      m.recall = parse_double(f[8]);
      m.n_points = std::stoull(f[9]);
      m.failure_count = std::stoull(f[10]);
      r.report = m;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace kt::harness
