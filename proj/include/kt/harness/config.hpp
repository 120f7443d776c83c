#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kt/dataset.hpp"
#include "kt/llm/http_backend.hpp"
#include "kt/llm/mock_backend.hpp"

namespace kt::harness {

using Json = nlohmann::json;

/// Model names accepted in a config, in table order.
const std::vector<std::string>& known_models();
/// Table family of a known model ("Baselines", "KT models", "LLM").
std::string model_family(std::string_view name);
/// Display name used in result tables.
std::string model_display_name(std::string_view name);
bool is_llm_model(std::string_view name);

struct DatasetConfig {
  std::string name;
  std::filesystem::path path;
  FormatSpec format;
};

struct SplitConfig {
  SplitSpec::Mode mode = SplitSpec::Mode::kSeeded;
  std::filesystem::path train_users;
  std::filesystem::path test_users;
  double train_fraction = 0.8;
};

struct ModelConfig {
  std::string name;
  /// Family-specific hyperparameters; validated against the family's keys.
  Json params = Json::object();
  std::optional<double> budget_seconds;
};

enum class BackendKind { kMock, kReplay, kHttp };
const char* backend_name(BackendKind kind);
BackendKind parse_backend_name(std::string_view name);

struct LlmConfig {
  BackendKind backend = BackendKind::kMock;
  llm::MockConfig mock;
  std::filesystem::path replay_file;
  /// When set, every exchange with the backend is appended here.
  std::filesystem::path record_file;
  llm::HttpConfig http;
  /// Remote model identifiers, per mode.
  std::string finetuned_minimal_model = "ft-minimal";
  std::string finetuned_extended_model = "ft-extended";
  std::string chat_model = "chat";
  std::size_t max_in_flight = 4;
  llm::RetryPolicy retry;
  double surrogate_confidence = 0.75;
  bool split_ids = true;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  bool filter = true;
  SplitConfig split;
  std::vector<ModelConfig> models;
  LlmConfig llm;
  std::filesystem::path output_dir = "results";
  std::uint64_t seed = 0;
  /// Default wall-clock budget per model; models may override it.
  std::optional<double> budget_seconds;
};

/// Relative paths resolve against base_dir. Throws ConfigError on unknown
/// keys, wrong types or invalid values.
ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Reads a FormatSpec object ({"delimiter", "user_column", ...}).
FormatSpec parse_format(const Json& j);
FormatSpec load_format(const std::filesystem::path& path);

/// Complete canonical form, defaults included.
Json config_to_json(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

/// Throws ConfigError when the config cannot run: no models, missing paths.
void validate_for_run(const ExperimentConfig& config);

/// Seed of a model, independent of its position in the config.
std::uint64_t model_seed(const ExperimentConfig& config, std::string_view model);

}  // namespace kt::harness
