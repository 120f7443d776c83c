#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kt/bkt.hpp"
#include "kt/types.hpp"

namespace kt {

/// Column mapping for delimiter-separated interaction logs.
struct FormatSpec {
  char delimiter = ',';
  std::string user_column = "user_id";
  std::string item_column = "item_id";
  std::string skill_column = "skill_id";
  std::string correct_column = "correct";
  /// Optional; when present, records are stably ordered by it per user.
  std::optional<std::string> timestamp_column;
  /// Characters separating several skills in one skill cell.
  std::string skill_separators = "~;";
  /// Skip rows whose skill cell is empty instead of rejecting the file.
  bool drop_missing_skill = false;
};

Dataset load_interactions(const std::filesystem::path& path, const FormatSpec& format = {});
Dataset parse_interactions(std::istream& in, const FormatSpec& format, std::string name);

/// Writes a dataset back in the default column layout using source ids.
void write_interactions(const Dataset& d, std::ostream& out);

struct FilterReport {
  std::size_t students_before = 0;
  std::size_t students_removed = 0;
  double removed_fraction = 0.0;
};

/// Keeps the students whose sequences contain both a correct and a wrong
/// response. Throws DataError on empty input or when nobody survives.
std::pair<Dataset, FilterReport> filter_degenerate_students(const Dataset& d);

std::string format_filter_report(const FilterReport& r);

struct SplitSpec {
  enum class Mode { kExternal, kSeeded };
  Mode mode = Mode::kSeeded;
  std::vector<std::string> train_user_ids;
  std::vector<std::string> test_user_ids;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  /// External mode only: listed users absent from the dataset are skipped
  /// instead of rejected (they may have been removed by filtering).
  bool allow_missing_users = false;

  static SplitSpec seeded(double train_fraction, std::uint64_t seed);
  static SplitSpec external(std::vector<std::string> train, std::vector<std::string> test);
};

std::vector<std::string> read_user_list(const std::filesystem::path& path);
void write_user_list(const std::vector<std::string>& users, const std::filesystem::path& path);

struct SplitResult {
  Dataset train;
  Dataset test;
};

SplitResult apply_split(const Dataset& d, const SplitSpec& spec);

/// How a synthetic student picks skills.
struct SkillSampling {
  /// Distinct skills drawn per student; each step picks uniformly among them.
  std::size_t skills_per_student = 1;
  std::size_t items_per_skill = 1;
};

/// Students simulated from the BKT generative process. Skill k of the
/// result corresponds to the k-th entry of params (map order).
Dataset generate_synthetic(const std::map<std::string, BktParams>& params, std::size_t n_students,
                           std::size_t seq_len, const SkillSampling& sampling, std::uint64_t seed);

}  // namespace kt
