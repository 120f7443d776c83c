#include "kt/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "kt/error.hpp"
#include "kt/hash.hpp"
#include "kt/rng.hpp"

namespace kt::harness {
namespace {

enum class Kind { kInt, kDouble, kBool };

const std::map<std::string, std::map<std::string, Kind>>& model_param_kinds() {
  static const std::map<std::string, std::map<std::string, Kind>> kinds = {
      {"mean", {}},
      {"nap", {}},
      {"nap-skills", {}},
      {"bkt",
       {{"restarts", Kind::kInt},
        {"max_iterations", Kind::kInt},
        {"tolerance", Kind::kDouble},
        {"min_observations", Kind::kInt}}},
      {"best-lr",
       {{"lambda", Kind::kDouble},
        {"log_scale", Kind::kBool},
        {"per_skill_counts", Kind::kBool},
        {"skill_onehot", Kind::kBool},
        {"item_onehot", Kind::kBool},
        {"full_batch_limit", Kind::kInt},
        {"max_iterations", Kind::kInt},
        {"tolerance", Kind::kDouble},
        {"minibatch_size", Kind::kInt},
        {"minibatch_step", Kind::kDouble},
        {"minibatch_epochs", Kind::kInt}}},
      {"dkt",
       {{"hidden_size", Kind::kInt},
        {"max_seq_len", Kind::kInt},
        {"epochs", Kind::kInt},
        {"batch_size", Kind::kInt},
        {"learning_rate", Kind::kDouble},
        {"clip_norm", Kind::kDouble}}},
      {"sakt",
       {{"embed_dim", Kind::kInt},
        {"num_heads", Kind::kInt},
        {"window", Kind::kInt},
        {"epochs", Kind::kInt},
        {"batch_size", Kind::kInt},
        {"learning_rate", Kind::kDouble},
        {"clip_norm", Kind::kDouble}}},
      {"llm-zero-shot", {}},
      {"llm-ft-minimal", {}},
      {"llm-ft-extended", {}},
  };
  return kinds;
}

void require_keys(const Json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

bool kind_matches(const Json& v, Kind kind) {
  switch (kind) {
    case Kind::kInt: return v.is_number_integer() && v.get<long long>() >= 0;
    case Kind::kDouble: return v.is_number();
    case Kind::kBool: return v.is_boolean();
  }
  return false;
}

ModelConfig parse_model(const Json& entry) {
  ModelConfig m;
  if (entry.is_string()) {
    m.name = entry.get<std::string>();
  } else if (entry.is_object() && entry.contains("name") && entry["name"].is_string()) {
    m.name = entry["name"].get<std::string>();
  } else {
    throw ConfigError("models: each entry must be a name or an object with a \"name\"");
  }
  const auto& kinds = model_param_kinds();
  const auto it = kinds.find(m.name);
  if (it == kinds.end()) throw ConfigError("models: unknown model '" + m.name + "'");
  if (!entry.is_object()) return m;
  for (const auto& [key, value] : entry.items()) {
    if (key == "name") continue;
    if (key == "budget_seconds") {
      if (!value.is_number() || value.get<double>() <= 0) {
        throw ConfigError("models." + m.name + ".budget_seconds: expected a positive number");
      }
      m.budget_seconds = value.get<double>();
      continue;
    }
    const auto k = it->second.find(key);
    if (k == it->second.end()) throw ConfigError("models." + m.name + ": unknown key '" + key + "'");
    if (!kind_matches(value, k->second)) throw ConfigError("models." + m.name + "." + key + ": wrong type");
    m.params[key] = value;
  }
  return m;
}

llm::MockConfig parse_mock(const Json& j) {
  require_keys(j, "llm.mock", {"weights", "accept", "garbage_rate", "seed"});
  llm::MockConfig m;
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    if (!w.is_array() || w.size() != 4) throw ConfigError("llm.mock.weights: expected 4 numbers");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!w[i].is_number()) throw ConfigError("llm.mock.weights: expected 4 numbers");
      m.weights[i] = w[i].get<double>();
    }
  }
  const auto accept = get_or<std::string>(j, "accept", "any", "llm.mock");
  if (accept == "any") m.accept = llm::MockConfig::Accept::kAny;
  else if (accept == "minimal") m.accept = llm::MockConfig::Accept::kMinimalOnly;
  else if (accept == "extended") m.accept = llm::MockConfig::Accept::kExtendedOnly;
  else throw ConfigError("llm.mock.accept: expected any, minimal or extended");
  m.garbage_rate = get_or(j, "garbage_rate", 0.0, "llm.mock");
  if (m.garbage_rate < 0.0 || m.garbage_rate > 1.0) throw ConfigError("llm.mock.garbage_rate: outside [0, 1]");
  m.seed = get_or<std::uint64_t>(j, "seed", 0, "llm.mock");
  return m;
}

const char* accept_name(llm::MockConfig::Accept a) {
  switch (a) {
    case llm::MockConfig::Accept::kAny: return "any";
    case llm::MockConfig::Accept::kMinimalOnly: return "minimal";
    case llm::MockConfig::Accept::kExtendedOnly: return "extended";
  }
  return "any";
}

LlmConfig parse_llm(const Json& j, const std::filesystem::path& base) {
  require_keys(j, "llm",
               {"backend", "mock", "replay_file", "record_file", "http", "models", "max_in_flight",
                "retry", "surrogate_confidence", "split_ids"});
  LlmConfig c;
  c.backend = parse_backend_name(get_or<std::string>(j, "backend", "mock", "llm"));
  if (j.contains("mock")) c.mock = parse_mock(j["mock"]);
  c.replay_file = resolve(base, get_or<std::string>(j, "replay_file", "", "llm"));
  c.record_file = resolve(base, get_or<std::string>(j, "record_file", "", "llm"));
  if (j.contains("http")) {
    const auto& h = j["http"];
    require_keys(h, "llm.http", {"base_url", "timeout_seconds", "api_key_env"});
    c.http.base_url = get_or<std::string>(h, "base_url", "", "llm.http");
    c.http.timeout_seconds = get_or(h, "timeout_seconds", 60, "llm.http");
    if (h.contains("api_key_env")) {
      c.http.api_key_env = get_or<std::vector<std::string>>(h, "api_key_env", {}, "llm.http");
    }
  }
  if (j.contains("models")) {
    const auto& m = j["models"];
    require_keys(m, "llm.models", {"finetuned_minimal", "finetuned_extended", "chat"});
    c.finetuned_minimal_model = get_or(m, "finetuned_minimal", c.finetuned_minimal_model, "llm.models");
    c.finetuned_extended_model = get_or(m, "finetuned_extended", c.finetuned_extended_model, "llm.models");
    c.chat_model = get_or(m, "chat", c.chat_model, "llm.models");
  }
  c.max_in_flight = get_or<std::size_t>(j, "max_in_flight", 4, "llm");
  if (c.max_in_flight == 0) throw ConfigError("llm.max_in_flight: must be >= 1");
  if (j.contains("retry")) {
    const auto& r = j["retry"];
    require_keys(r, "llm.retry", {"attempts", "initial_backoff_ms", "multiplier"});
    c.retry.attempts = get_or(r, "attempts", 3, "llm.retry");
    c.retry.initial_backoff = std::chrono::milliseconds(get_or<long long>(r, "initial_backoff_ms", 1000, "llm.retry"));
    c.retry.multiplier = get_or(r, "multiplier", 2.0, "llm.retry");
    if (c.retry.attempts < 1) throw ConfigError("llm.retry.attempts: must be >= 1");
  }
  c.surrogate_confidence = get_or(j, "surrogate_confidence", 0.75, "llm");
  if (!(c.surrogate_confidence >= 0.5 && c.surrogate_confidence <= 1.0)) {
    throw ConfigError("llm.surrogate_confidence: must lie in [0.5, 1]");
  }
  c.split_ids = get_or(j, "split_ids", true, "llm");
  return c;
}

}  // namespace

const std::vector<std::string>& known_models() {
  static const std::vector<std::string> names = {
      "mean", "nap", "nap-skills", "bkt", "best-lr", "dkt", "sakt",
      "llm-zero-shot", "llm-ft-minimal", "llm-ft-extended"};
  return names;
}

bool is_llm_model(std::string_view name) { return name.starts_with("llm-"); }

std::string model_family(std::string_view name) {
  if (name == "mean" || name == "nap" || name == "nap-skills") return "Baselines";
  if (is_llm_model(name)) return "LLM";
  return "KT models";
}

std::string model_display_name(std::string_view name) {
  static const std::map<std::string, std::string, std::less<>> names = {
      {"mean", "Mean"},          {"nap", "NaP"},
      {"nap-skills", "NaP Skills"}, {"bkt", "BKT"},
      {"best-lr", "Best-LR"},    {"dkt", "DKT"},
      {"sakt", "SAKT"},          {"llm-zero-shot", "Zero-shot chat"},
      {"llm-ft-minimal", "Fine-tuned (Min)"}, {"llm-ft-extended", "Fine-tuned (Ext)"}};
  const auto it = names.find(name);
  return it == names.end() ? std::string(name) : it->second;
}

const char* backend_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kMock: return "mock";
    case BackendKind::kReplay: return "replay";
    case BackendKind::kHttp: return "http";
  }
  return "mock";
}

BackendKind parse_backend_name(std::string_view name) {
  if (name == "mock") return BackendKind::kMock;
  if (name == "replay") return BackendKind::kReplay;
  if (name == "http") return BackendKind::kHttp;
  throw ConfigError("unknown backend '" + std::string(name) + "' (expected mock, replay or http)");
}

FormatSpec parse_format(const Json& j) {
  require_keys(j, "dataset.format",
               {"delimiter", "user_column", "item_column", "skill_column", "correct_column",
                "timestamp_column", "skill_separators", "drop_missing_skill"});
  FormatSpec f;
  const auto delimiter = get_or<std::string>(j, "delimiter", ",", "dataset.format");
  if (delimiter == "\\t" || delimiter == "tab") f.delimiter = '\t';
  else if (delimiter.size() == 1) f.delimiter = delimiter[0];
  else throw ConfigError("dataset.format.delimiter: expected a single character");
  f.user_column = get_or(j, "user_column", f.user_column, "dataset.format");
  f.item_column = get_or(j, "item_column", f.item_column, "dataset.format");
  f.skill_column = get_or(j, "skill_column", f.skill_column, "dataset.format");
  f.correct_column = get_or(j, "correct_column", f.correct_column, "dataset.format");
  if (j.contains("timestamp_column") && !j["timestamp_column"].is_null()) {
    f.timestamp_column = get_or<std::string>(j, "timestamp_column", "", "dataset.format");
  }
  f.skill_separators = get_or(j, "skill_separators", f.skill_separators, "dataset.format");
  f.drop_missing_skill = get_or(j, "drop_missing_skill", f.drop_missing_skill, "dataset.format");
  return f;
}

FormatSpec load_format(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open format file " + path.string());
  try {
    return parse_format(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base) {
  require_keys(j, "config",
               {"dataset", "filter", "split", "models", "llm", "output_dir", "seed", "budget_seconds"});
  ExperimentConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", 0, "config");
  c.output_dir = resolve(base, get_or<std::string>(j, "output_dir", "results", "config"));
  if (j.contains("budget_seconds")) {
    const double b = get_or(j, "budget_seconds", 0.0, "config");
    if (b <= 0) throw ConfigError("config.budget_seconds: must be positive");
    c.budget_seconds = b;
  }
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    require_keys(d, "dataset", {"name", "path", "format"});
    c.dataset.path = resolve(base, get_or<std::string>(d, "path", "", "dataset"));
    c.dataset.name = get_or<std::string>(d, "name", c.dataset.path.stem().string(), "dataset");
    if (d.contains("format")) c.dataset.format = parse_format(d["format"]);
  }
  if (j.contains("filter")) {
    const auto& f = j["filter"];
    require_keys(f, "filter", {"enabled"});
    c.filter = get_or(f, "enabled", true, "filter");
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    require_keys(s, "split", {"mode", "train_users", "test_users", "train_fraction"});
    const auto mode = get_or<std::string>(s, "mode", "seeded", "split");
    if (mode == "seeded") c.split.mode = SplitSpec::Mode::kSeeded;
    else if (mode == "external") c.split.mode = SplitSpec::Mode::kExternal;
    else throw ConfigError("split.mode: expected seeded or external");
    c.split.train_users = resolve(base, get_or<std::string>(s, "train_users", "", "split"));
    c.split.test_users = resolve(base, get_or<std::string>(s, "test_users", "", "split"));
    c.split.train_fraction = get_or(s, "train_fraction", 0.8, "split");
    if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0)) {
      throw ConfigError("split.train_fraction: must lie strictly between 0 and 1");
    }
    if (c.split.mode == SplitSpec::Mode::kExternal &&
        (c.split.train_users.empty() || c.split.test_users.empty())) {
      throw ConfigError("split: external mode needs train_users and test_users");
    }
  }
  if (j.contains("models")) {
    if (!j["models"].is_array()) throw ConfigError("models: expected a list");
    std::set<std::string> seen;
    for (const auto& entry : j["models"]) {
      auto m = parse_model(entry);
      if (!seen.insert(m.name).second) throw ConfigError("models: '" + m.name + "' listed twice");
      c.models.push_back(std::move(m));
    }
  }
  if (j.contains("llm")) c.llm = parse_llm(j["llm"], base);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  if (c.budget_seconds) j["budget_seconds"] = *c.budget_seconds;
  const auto& f = c.dataset.format;
  j["dataset"] = {{"name", c.dataset.name},
                  {"path", c.dataset.path.string()},
                  {"format",
                   {{"delimiter", std::string(1, f.delimiter)},
                    {"user_column", f.user_column},
                    {"item_column", f.item_column},
                    {"skill_column", f.skill_column},
                    {"correct_column", f.correct_column},
                    {"timestamp_column", f.timestamp_column ? Json(*f.timestamp_column) : Json(nullptr)},
                    {"skill_separators", f.skill_separators},
                    {"drop_missing_skill", f.drop_missing_skill}}}};
  j["filter"] = {{"enabled", c.filter}};
  j["split"] = {{"mode", c.split.mode == SplitSpec::Mode::kSeeded ? "seeded" : "external"},
                {"train_users", c.split.train_users.string()},
                {"test_users", c.split.test_users.string()},
                {"train_fraction", c.split.train_fraction}};
  Json models = Json::array();
  for (const auto& m : c.models) {
    Json e = m.params;
    e["name"] = m.name;
    if (m.budget_seconds) e["budget_seconds"] = *m.budget_seconds;
    models.push_back(e);
  }
  j["models"] = models;
  const auto& l = c.llm;
  j["llm"] = {{"backend", backend_name(l.backend)},
              {"mock",
               {{"weights", l.mock.weights},
                {"accept", accept_name(l.mock.accept)},
                {"garbage_rate", l.mock.garbage_rate},
                {"seed", l.mock.seed}}},
              {"replay_file", l.replay_file.string()},
              {"record_file", l.record_file.string()},
              {"http",
               {{"base_url", l.http.base_url},
                {"timeout_seconds", l.http.timeout_seconds},
                {"api_key_env", l.http.api_key_env}}},
              {"models",
               {{"finetuned_minimal", l.finetuned_minimal_model},
                {"finetuned_extended", l.finetuned_extended_model},
                {"chat", l.chat_model}}},
              {"max_in_flight", l.max_in_flight},
              {"retry",
               {{"attempts", l.retry.attempts},
                {"initial_backoff_ms", l.retry.initial_backoff.count()},
                {"multiplier", l.retry.multiplier}}},
              {"surrogate_confidence", l.surrogate_confidence},
              {"split_ids", l.split_ids}};
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  return hex64(fnv1a64(config_to_json(config).dump()));
}

void validate_for_run(const ExperimentConfig& c) {
  if (c.models.empty()) throw ConfigError("config lists no models");
  if (c.dataset.path.empty()) throw ConfigError("config names no dataset path");
  if (!std::filesystem::exists(c.dataset.path)) {
    throw ConfigError("dataset file not found: " + c.dataset.path.string());
  }
  if (c.split.mode == SplitSpec::Mode::kExternal) {
    for (const auto& p : {c.split.train_users, c.split.test_users}) {
      if (!std::filesystem::exists(p)) throw ConfigError("split file not found: " + p.string());
    }
  }
  const bool needs_llm = std::any_of(c.models.begin(), c.models.end(),
                                     [](const ModelConfig& m) { return is_llm_model(m.name); });
  if (needs_llm && c.llm.backend == BackendKind::kReplay && !std::filesystem::exists(c.llm.replay_file)) {
    throw ConfigError("replay file not found: " + c.llm.replay_file.string());
  }
  if (needs_llm && c.llm.backend == BackendKind::kHttp && c.llm.http.base_url.empty()) {
    throw ConfigError("llm.http.base_url is required for the http backend");
  }
}

std::uint64_t model_seed(const ExperimentConfig& config, std::string_view model) {
  const auto& names = known_models();
  const auto it = std::find(names.begin(), names.end(), model);
  return derive_seed(config.seed, static_cast<std::uint64_t>(it - names.begin()));
}

}  // namespace kt::harness
