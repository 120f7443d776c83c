#include "kt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "kt/error.hpp"
#include "kt/rng.hpp"

namespace kt {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Splits one line; double quotes group a field and "" escapes a quote.
std::vector<std::string> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string row_error(std::size_t line, const std::string& what) {
  return "row " + std::to_string(line) + ": " + what;
}

std::optional<long long> parse_integer(std::string_view s) {
  long long value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

// Several skills in one cell: the lowest-numbered one wins (lexicographic
// minimum when the ids are not all integers).
std::string pick_skill(std::string_view cell, const std::string& separators) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= cell.size(); ++i) {
    if (i == cell.size() || separators.find(cell[i]) != std::string::npos) {
      auto part = trim(cell.substr(start, i - start));
      if (!part.empty()) parts.push_back(part);
      start = i + 1;
    }
  }
  if (parts.empty()) return {};
  if (parts.size() == 1) return std::string(parts.front());
  bool numeric = true;
  for (auto p : parts) numeric = numeric && parse_integer(p).has_value();
  auto best = parts.front();
  for (auto p : parts) {
    if (numeric ? *parse_integer(p) < *parse_integer(best) : p < best) best = p;
  }
  return std::string(best);
}

class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string>& names) : names_(names) {}

  std::uint32_t intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }

 private:
  std::vector<std::string>& names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  throw DataError(row_error(1, "missing column '" + name + "'"));
}

}  // namespace

Dataset load_interactions(const std::filesystem::path& path, const FormatSpec& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file " + path.string());
  return parse_interactions(in, format, path.stem().string());
}

Dataset parse_interactions(std::istream& in, const FormatSpec& format, std::string name) {
  Dataset d;
  d.name = std::move(name);

  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw DataError(row_error(1, "empty file (no header)"));
  }
  const auto header = split_fields(line, format.delimiter);
  const std::size_t user_col = find_column(header, format.user_column);
  const std::size_t item_col = find_column(header, format.item_column);
  const std::size_t skill_col = find_column(header, format.skill_column);
  const std::size_t correct_col = find_column(header, format.correct_column);
  std::optional<std::size_t> time_col;
  if (format.timestamp_column) time_col = find_column(header, *format.timestamp_column);
  const std::size_t needed =
      std::max({user_col, item_col, skill_col, correct_col, time_col.value_or(0)}) + 1;

  struct Pending {
    InteractionRecord record;
    double timestamp = 0.0;
  };
  std::vector<std::vector<Pending>> per_user;
  std::vector<std::string> user_names;
  Vocabulary users(user_names);
  Vocabulary items(d.item_vocab);
  Vocabulary skills(d.skill_vocab);

  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, format.delimiter);
    if (fields.size() < needed) {
      throw DataError(row_error(line_no, "expected at least " + std::to_string(needed) +
                                             " fields, found " + std::to_string(fields.size())));
    }
    const auto user = std::string(trim(fields[user_col]));
    const auto item = std::string(trim(fields[item_col]));
    const auto skill = pick_skill(fields[skill_col], format.skill_separators);
    if (user.empty()) throw DataError(row_error(line_no, "empty user id"));
    if (item.empty()) throw DataError(row_error(line_no, "empty item id"));
    if (skill.empty()) {
      if (!format.drop_missing_skill) throw DataError(row_error(line_no, "empty skill id"));
      ++d.dropped_rows;
      continue;
    }

    const auto correct_text = trim(fields[correct_col]);
    const auto correct = parse_integer(correct_text);
    if (!correct || (*correct != 0 && *correct != 1)) {
      throw DataError(row_error(line_no, "correctness value '" + std::string(correct_text) +
                                             "' is not 0 or 1"));
    }

    Pending p;
    p.record.item = items.intern(item);
    p.record.skill = skills.intern(skill);
    p.record.correct = static_cast<std::uint8_t>(*correct);
    if (time_col) {
      const auto text = trim(fields[*time_col]);
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), p.timestamp);
      if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DataError(row_error(line_no, "unparseable timestamp '" + std::string(text) + "'"));
      }
    }
    const auto u = users.intern(user);
    if (u == per_user.size()) per_user.emplace_back();
    per_user[u].push_back(p);
    ++rows;
  }
  if (rows == 0) throw DataError(row_error(line_no, "empty file (no data rows)"));

  d.sequences.reserve(per_user.size());
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    auto& pending = per_user[u];
    if (time_col) {
      std::stable_sort(pending.begin(), pending.end(),
                       [](const Pending& a, const Pending& b) { return a.timestamp < b.timestamp; });
    }
    StudentSequence seq{user_names[u], {}};
    seq.records.reserve(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
      auto r = pending[i].record;
      r.position = static_cast<std::uint32_t>(i);
      seq.records.push_back(r);
    }
    d.sequences.push_back(std::move(seq));
  }
  return d;
}

void write_interactions(const Dataset& d, std::ostream& out) {
  out << "user_id,item_id,skill_id,correct\n";
  for (const auto& seq : d.sequences) {
    for (const auto& r : seq.records) {
      out << seq.user_id << ',' << d.item_vocab[r.item] << ',' << d.skill_vocab[r.skill] << ','
          << static_cast<int>(r.correct) << '\n';
    }
  }
}

std::pair<Dataset, FilterReport> filter_degenerate_students(const Dataset& d) {
  if (d.sequences.empty()) throw DataError("cannot filter an empty dataset");
  Dataset kept = d.empty_like();
  for (const auto& seq : d.sequences) {
    bool any_correct = false;
    bool any_wrong = false;
    for (const auto& r : seq.records) {
      any_correct = any_correct || r.correct == 1;
      any_wrong = any_wrong || r.correct == 0;
    }
    if (any_correct && any_wrong) kept.sequences.push_back(seq);
  }
  FilterReport report;
  report.students_before = d.sequences.size();
  report.students_removed = d.sequences.size() - kept.sequences.size();
  report.removed_fraction =
      static_cast<double>(report.students_removed) / static_cast<double>(report.students_before);
  if (kept.sequences.empty()) {
    throw DataError("every student answered all-correct or all-wrong; dataset unusable");
  }
  return {std::move(kept), report};
}

std::string format_filter_report(const FilterReport& r) {
  std::ostringstream os;
  os << "filter.students_before=" << r.students_before << '\n'
     << "filter.students_removed=" << r.students_removed << '\n'
     << "filter.removed_fraction=" << r.removed_fraction << '\n';
  return os.str();
}

SplitSpec SplitSpec::seeded(double train_fraction, std::uint64_t seed) {
  SplitSpec s;
  s.mode = Mode::kSeeded;
  s.train_fraction = train_fraction;
  s.seed = seed;
  return s;
}

SplitSpec SplitSpec::external(std::vector<std::string> train, std::vector<std::string> test) {
  SplitSpec s;
  s.mode = Mode::kExternal;
  s.train_user_ids = std::move(train);
  s.test_user_ids = std::move(test);
  return s;
}

std::vector<std::string> read_user_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file " + path.string());
  std::vector<std::string> users;
  std::string line;
  while (std::getline(in, line)) {
    auto id = trim(line);
    if (!id.empty()) users.emplace_back(id);
  }
  return users;
}

void write_user_list(const std::vector<std::string>& users, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split file " + path.string());
  for (const auto& u : users) out << u << '\n';
}

SplitResult apply_split(const Dataset& d, const SplitSpec& spec) {
  SplitResult result{d.empty_like(), d.empty_like()};
  std::unordered_set<std::string> train_users;

  if (spec.mode == SplitSpec::Mode::kSeeded) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
      throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    // Sorting first makes the partition independent of input order.
    std::vector<std::string> users;
    users.reserve(d.sequences.size());
    for (const auto& s : d.sequences) users.push_back(s.user_id);
    std::sort(users.begin(), users.end());
    Rng rng(spec.seed);
    rng.shuffle(std::span(users));
    const auto n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(users.size())));
    train_users.insert(users.begin(), users.begin() + std::min(n_train, users.size()));
    for (const auto& s : d.sequences) {
      (train_users.count(s.user_id) ? result.train : result.test).sequences.push_back(s);
    }
  } else {
    std::unordered_map<std::string, const StudentSequence*> by_user;
    for (const auto& s : d.sequences) by_user.emplace(s.user_id, &s);
    std::unordered_set<std::string> test_users(spec.test_user_ids.begin(),
                                               spec.test_user_ids.end());
    for (const auto& u : spec.train_user_ids) {
      if (test_users.count(u)) throw DataError("user '" + u + "' listed in both train and test");
    }
    auto take = [&](const std::vector<std::string>& ids, Dataset& into) {
      for (const auto& u : ids) {
        auto it = by_user.find(u);
        if (it == by_user.end()) {
          if (spec.allow_missing_users) continue;
          throw DataError("split file references unknown user '" + u + "'");
        }
        into.sequences.push_back(*it->second);
      }
    };
    take(spec.train_user_ids, result.train);
    take(spec.test_user_ids, result.test);
  }

  if (result.train.sequences.empty()) throw DataError("split produced an empty train set");
  if (result.test.sequences.empty()) throw DataError("split produced an empty test set");
  return result;
}

Dataset generate_synthetic(const std::map<std::string, BktParams>& params, std::size_t n_students,
                           std::size_t seq_len, const SkillSampling& sampling, std::uint64_t seed) {
  if (params.empty()) throw ConfigError("generate_synthetic needs at least one skill");
  if (n_students == 0 || seq_len == 0) throw ConfigError("n_students and seq_len must be >= 1");
  if (sampling.skills_per_student == 0 || sampling.items_per_skill == 0) {
    throw ConfigError("skill sampling counts must be >= 1");
  }
  std::vector<BktParams> table;
  Dataset d;
  d.name = "synthetic";
  for (const auto& [name, p] : params) {
    // Generation accepts the closed unit interval; fitted models are clamped.
    for (double v : {p.p_init, p.p_learn, p.p_guess, p.p_slip}) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("invalid BKT parameters for skill '" + name + "'");
      }
    }
    d.skill_vocab.push_back(name);
    table.push_back(p);
    for (std::size_t j = 0; j < sampling.items_per_skill; ++j) {
      d.item_vocab.push_back(name + "/" + std::to_string(j));
    }
  }
  const std::size_t n_skills = table.size();
  const std::size_t per_student = std::min(sampling.skills_per_student, n_skills);

  Rng rng(seed);
  for (std::size_t s = 0; s < n_students; ++s) {
    std::vector<SkillId> all(n_skills);
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(std::span(all));
    std::vector<SkillId> chosen(all.begin(), all.begin() + per_student);

    std::vector<std::int8_t> known(n_skills, -1);  // -1 = not yet sampled
    StudentSequence seq;
    seq.user_id = "u" + std::to_string(s);
    seq.records.reserve(seq_len);
    for (std::size_t t = 0; t < seq_len; ++t) {
      const SkillId k = chosen[per_student == 1 ? 0 : rng.below(per_student)];
      const auto& p = table[k];
      if (known[k] < 0) known[k] = rng.bernoulli(p.p_init) ? 1 : 0;
      const double p_correct = known[k] ? 1.0 - p.p_slip : p.p_guess;
      InteractionRecord r;
      r.skill = k;
      r.item = static_cast<ItemId>(k * sampling.items_per_skill +
                                   (sampling.items_per_skill == 1
                                        ? 0
                                        : rng.below(sampling.items_per_skill)));
      r.correct = rng.bernoulli(p_correct) ? 1 : 0;
      r.position = static_cast<std::uint32_t>(t);
      seq.records.push_back(r);
      if (!known[k] && rng.bernoulli(p.p_learn)) known[k] = 1;
    }
    d.sequences.push_back(std::move(seq));
  }
  return d;
}

}  // namespace kt
