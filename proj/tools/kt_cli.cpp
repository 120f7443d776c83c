// kt: knowledge-tracing experiment runner.

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kt/dataset.hpp"
#include "kt/error.hpp"
#include "kt/harness/config.hpp"
#include "kt/harness/experiment.hpp"
#include "kt/harness/model_io.hpp"
#include "kt/harness/table.hpp"
#include "kt/llm/prompts.hpp"

namespace fs = std::filesystem;
using namespace kt;
using namespace kt::harness;

namespace {

struct Options {
  std::string config;
  std::string dataset;
  std::string format;
  std::string models;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string backend;
  std::string template_name = "minimal";
  std::string capture;
  bool verbose = false;
};

void setup_logging(const Options& o, const fs::path& log_file = {}) {
  std::vector<spdlog::sink_ptr> sinks{std::make_shared<spdlog::sinks::stderr_color_sink_mt>()};
  if (!log_file.empty()) {
    fs::create_directories(log_file.parent_path());
    sinks.push_back(std::make_shared<spdlog::sinks::basic_file_sink_mt>(log_file.string(), true));
  }
  auto logger = std::make_shared<spdlog::logger>("kt", sinks.begin(), sinks.end());
  logger->set_level(o.verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_default_logger(logger);
}

std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (!name.empty()) out.push_back(name);
  }
  return out;
}

ExperimentConfig effective_config(const Options& o) {
  ExperimentConfig c = o.config.empty() ? parse_config(Json::object()) : load_config(o.config);
  if (!o.dataset.empty()) {
    c.dataset.path = o.dataset;
    c.dataset.name = fs::path(o.dataset).parent_path().filename().string();
    if (c.dataset.name.empty()) c.dataset.name = fs::path(o.dataset).stem().string();
  }
  if (!o.format.empty()) c.dataset.format = load_format(o.format);
  if (!o.models.empty()) {
    Json list = Json::array();
    for (const auto& n : split_names(o.models)) list.push_back(n);
    c.models = parse_config(Json{{"models", list}}).models;
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.backend.empty()) c.llm.backend = parse_backend_name(o.backend);
  return c;
}

Dataset load_dataset(const ExperimentConfig& c) {
  if (c.dataset.path.empty()) throw ConfigError("no dataset given (--dataset or config)");
  auto d = load_interactions(c.dataset.path, c.dataset.format);
  if (!c.dataset.name.empty()) d.name = c.dataset.name;
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

int cmd_ingest(const Options& o) {
  const auto c = effective_config(o);
  const auto d = load_dataset(c);
  std::size_t correct = 0;
  for (const auto& s : d.sequences)
    for (const auto& r : s.records) correct += r.correct;
  std::ostringstream summary;
  summary << "dataset=" << d.name << "\nstudents=" << d.sequences.size()
          << "\nitems=" << d.num_items() << "\nskills=" << d.num_skills()
          << "\ninteractions=" << d.num_interactions() << "\ndropped_rows=" << d.dropped_rows
          << "\ncorrect_rate="
          << (d.num_interactions() ? static_cast<double>(correct) / d.num_interactions() : 0.0)
          << '\n';
  std::cout << summary.str();
  if (!o.out.empty()) {
    std::ostringstream csv;
    write_interactions(d, csv);
    write_text(fs::path(o.out) / "interactions.csv", csv.str());
    write_text(fs::path(o.out) / "summary.txt", summary.str());
  }
  return 0;
}

int cmd_filter(const Options& o) {
  const auto c = effective_config(o);
  const auto [filtered, report] = filter_degenerate_students(load_dataset(c));
  std::cout << format_filter_report(report);
  if (!o.out.empty()) {
    std::ostringstream csv;
    write_interactions(filtered, csv);
    write_text(fs::path(o.out) / "interactions.csv", csv.str());
    write_text(fs::path(o.out) / "filter_report.txt", format_filter_report(report));
  }
  return 0;
}

int cmd_split(const Options& o) {
  auto c = effective_config(o);
  const auto data = prepare_data(c);
  const fs::path dir = o.out.empty() ? c.output_dir : fs::path(o.out);
  fs::create_directories(dir);
  std::vector<std::string> train, test;
  for (const auto& s : data.split.train.sequences) train.push_back(s.user_id);
  for (const auto& s : data.split.test.sequences) test.push_back(s.user_id);
  write_user_list(train, dir / "train_users.txt");
  write_user_list(test, dir / "test_users.txt");
  std::cout << "train_students=" << train.size() << "\ntest_students=" << test.size() << '\n';
  return 0;
}

int cmd_export_prompts(const Options& o) {
  const auto c = effective_config(o);
  const auto t = llm::parse_template_name(o.template_name);
  const auto data = prepare_data(c);
  const fs::path dir = o.out.empty() ? c.output_dir : fs::path(o.out);
  fs::create_directories(dir);
  llm::PromptOptions options;
  options.split_ids = c.llm.split_ids;
  std::size_t total = 0;
  for (const auto& [part, d] : {std::pair{"train", &data.split.train}, std::pair{"test", &data.split.test}}) {
    const auto path = dir / (std::string("corpus_") + llm::template_name(t) + "_" + part + ".jsonl");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    total += llm::export_finetune_corpus(*d, t, out, options);
  }
  // Dense ids used in prompts, with their source identifiers.
  std::ostringstream items, skills;
  for (std::size_t i = 0; i < data.full.item_vocab.size(); ++i) items << i << '\t' << data.full.item_vocab[i] << '\n';
  for (std::size_t k = 0; k < data.full.skill_vocab.size(); ++k) skills << k << '\t' << data.full.skill_vocab[k] << '\n';
  write_text(dir / "item_ids.tsv", items.str());
  write_text(dir / "skill_ids.tsv", skills.str());
  std::cout << "records=" << total << '\n';
  return 0;
}

ModelContext context_for(const ExperimentConfig& c) {
  ModelContext ctx;
  for (const auto& m : c.models) {
    if (is_llm_model(m.name)) {
      ctx.backend = make_backend(c.llm);
      break;
    }
  }
  return ctx;
}

int cmd_train(const Options& o) {
  const auto c = effective_config(o);
  validate_for_run(c);
  const auto data = prepare_data(c);
  const auto ctx = context_for(c);
  const fs::path dir = c.output_dir / "models";
  fs::create_directories(dir);
  int status = 0;
  for (const auto& m : c.models) {
    try {
      const auto model = train_model(m, c, data.split.train, ctx);
      std::ofstream out(dir / (m.name + ".model"), std::ios::binary);
      save_model(*model, data.full, out);
      spdlog::info("saved {}", (dir / (m.name + ".model")).string());
    } catch (const ModelError& e) {
      spdlog::error("{}: {}", m.name, e.what());
      status = 3;
    }
  }
  return status;
}

int cmd_evaluate(const Options& o) {
  const auto c = effective_config(o);
  validate_for_run(c);
  const auto data = prepare_data(c);
  const auto ctx = context_for(c);
  ResultsTable table;
  table.dataset = data.full.name;
  table.seed = c.seed;
  table.config_hash = config_hash(c);
  table.filter = data.filter;
  table.train_students = data.split.train.sequences.size();
  table.test_students = data.split.test.sequences.size();
  table.test_points = data.split.test.num_interactions();
  for (const auto& m : c.models) {
    ModelResult row{m.name, model_family(m.name), model_display_name(m.name)};
    const auto path = c.output_dir / "models" / (m.name + ".model");
    try {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw DataError("no trained model at " + path.string());
      const auto model = load_model(in, data.full, c, ctx);
      row.report = evaluate_outcomes(collect_predictions(*model, data.split.test));
    } catch (const ModelError& e) {
      row.error = e.what();
      spdlog::error("{}: {}", m.name, row.error);
    }
    table.rows.push_back(std::move(row));
  }
  write_outputs(table, c, c.output_dir);
  std::cout << emit_table(table, TableFormat::kMarkdown);
  return table.any_failed() ? 3 : 0;
}

int cmd_run(const Options& o) {
  const auto c = effective_config(o);
  setup_logging(o, c.output_dir / "run.log");
  const auto table = run_experiment(c);
  write_outputs(table, c, c.output_dir);
  std::cout << emit_table(table, TableFormat::kMarkdown);
  return table.any_failed() ? 3 : 0;
}

int cmd_replay_capture(const Options& o) {
  auto c = effective_config(o);
  if (c.llm.backend == BackendKind::kReplay) throw ConfigError("replay-capture needs a live backend (mock or http)");
  std::vector<ModelConfig> llm_models;
  for (const auto& m : c.models) {
    if (is_llm_model(m.name)) llm_models.push_back(m);
  }
  if (llm_models.empty()) throw ConfigError("replay-capture: no LLM models configured");
  c.models = llm_models;
  c.llm.record_file = o.capture.empty() ? c.output_dir / "capture.jsonl" : fs::path(o.capture);
  fs::create_directories(c.llm.record_file.parent_path().empty() ? fs::path(".") : c.llm.record_file.parent_path());
  fs::remove(c.llm.record_file);
  const auto table = run_experiment(c);
  std::cout << "capture=" << c.llm.record_file.string() << '\n';
  std::cout << emit_table(table, TableFormat::kMarkdown);
  return table.any_failed() ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-tracing experiments: classical models, sequence models and LLM prompts"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)");
    sub->add_option("--dataset", o.dataset, "Interaction log (CSV)");
    sub->add_option("--format", o.format, "Column mapping (JSON)");
    sub->add_option("--models", o.models, "Comma-separated model names");
    sub->add_option("--seed", o.seed, "Experiment seed");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--backend", o.backend, "LLM backend")->check(CLI::IsMember({"mock", "replay", "http"}));
    sub->add_flag("-v,--verbose", o.verbose, "Debug logging");
  };
  auto* ingest = app.add_subcommand("ingest", "Load an interaction log and report its size");
  auto* filter = app.add_subcommand("filter", "Drop students with only correct or only wrong answers");
  auto* split = app.add_subcommand("split", "Write train/test user lists");
  auto* exp = app.add_subcommand("export-prompts", "Write prompt/completion corpora (JSONL)");
  auto* train = app.add_subcommand("train", "Fit models and save them under <out>/models");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate saved models on the test split");
  auto* run = app.add_subcommand("run", "Filter, split, fit, evaluate and emit tables");
  auto* capture = app.add_subcommand("replay-capture", "Record LLM exchanges for offline replay");
  for (auto* s : {ingest, filter, split, exp, train, evaluate, run, capture}) common(s);
  exp->add_option("--template", o.template_name, "minimal or extended");
  capture->add_option("--capture", o.capture, "Capture file (default <out>/capture.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  setup_logging(o);
  try {
    if (*ingest) return cmd_ingest(o);
    if (*filter) return cmd_filter(o);
    if (*split) return cmd_split(o);
    if (*exp) return cmd_export_prompts(o);
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*run) return cmd_run(o);
    if (*capture) return cmd_replay_capture(o);
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 1;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    return 2;
  } catch (const ModelError& e) {
    spdlog::error("model error: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
