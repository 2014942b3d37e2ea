#pragma once

#include "halbench/analyzer.hpp"
#include "halbench/catalog.hpp"
#include "halbench/gateway.hpp"
#include "halbench/prompt.hpp"
#include "halbench/sandbox.hpp"
#include "halbench/surface.hpp"
#include "halbench/taxonomy.hpp"

#include "json.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace halbench {

enum class ExecutionMode { Process, Record, Recorded };

std::string_view to_string(ExecutionMode mode);
std::optional<ExecutionMode> parse_execution_mode(std::string_view text);

struct ProviderConfig {
  std::string kind = "openai"; // or "scripted"
  OpenAiConfig openai;
  std::string responses_ref; // scripted: JSON array of response strings
};

/// One experiment. `*_ref` fields keep the text written in the config file
/// and are what reports show; resolved paths are absolute.
struct RunConfig {
  std::string experiment_id;
  std::string task_text;
  PromptStrategy strategy = PromptStrategy::Baseline;
  std::string signal_list_ref;
  std::string template_ref;
  TaskSignalSpec expected_signals;
  std::string model_id;
  GatewayMode gateway_mode = GatewayMode::Replay;
  std::string transcript_ref;
  std::string catalog_ref;
  std::string surface_ref;
  std::string scenario_ref;
  RepairMode repair_mode = RepairMode::Detailed;
  int max_iterations = 4;
  bool restate_task = true;
  GenerationParams generation;
  PromptLabels labels;
  ExecutionMode execution = ExecutionMode::Process;
  std::string recorded_runs_ref;
  ProcessConfig process;
  ProviderConfig provider;
  std::string report_ref;

  /// Directory that relative refs are resolved against.
  std::string base_dir;
  std::string resolve(const std::string &ref) const;
};

/// Parses one experiment object. Missing required keys, unknown enum values
/// and bad types raise ConfigError.
RunConfig parse_run_config(const nlohmann::json &document, const std::string &base_dir);
/// A config file holds one experiment, or `{"experiments": [...]}` whose
/// entries inherit every other top-level key.
std::vector<RunConfig> load_run_configs(const std::string &path);

struct IterationRecord {
  int index = 0;
  bool success = false;
  bool refused = false;
  std::set<TaxonomyLeaf> taxonomy_tags;
  std::string description;
  ScoreBreakdown score;
  std::string code_digest;
  std::vector<Diagnostic> diagnostics;
  /// Absent when the sandbox did not run.
  std::optional<FunctionalVerdict> functional_verdict;

  bool operator==(const IterationRecord &) const = default;
};

enum class ExperimentOutcome { Solved, Exhausted, Refused };

std::string_view to_string(ExperimentOutcome outcome);
std::optional<ExperimentOutcome> parse_experiment_outcome(std::string_view text);

struct ReportConfig {
  std::string experiment_id;
  PromptStrategy strategy = PromptStrategy::Baseline;
  std::string model_id;
  RepairMode repair_mode = RepairMode::Detailed;
  int max_iterations = 4;
  GatewayMode gateway_mode = GatewayMode::Replay;
  std::string transcript_ref;
  std::string catalog_ref;
  std::string surface_ref;
  std::string scenario_ref;

  bool operator==(const ReportConfig &) const = default;
};

struct ExperimentReport {
  ReportConfig run_config;
  std::vector<IterationRecord> iterations;
  ExperimentOutcome outcome = ExperimentOutcome::Exhausted;

  bool operator==(const ExperimentReport &) const = default;
};

/// Builds the transport behind network providers; tests substitute one.
using TransportFactory = std::function<std::unique_ptr<HttpTransport>(int timeout_seconds)>;

/// Loaded resources of one experiment.
struct Experiment {
  RunConfig config;
  Catalog catalog;
  SdkSurface surface;
  Scenario scenario;
  std::vector<std::string> signal_list;
  std::optional<std::string> code_template;
  std::shared_ptr<Gateway> gateway;
  std::shared_ptr<ScenarioExecutor> executor;
};

/// Loads every referenced resource. A provider is built only for record and
/// live gateway modes.
Experiment prepare_experiment(const RunConfig &config,
                              const TransportFactory &transport = make_http_transport);

/// Static verdict of one generated program followed, when no execution-class
/// static diagnostic exists, by the scenario run.
struct Evaluation {
  std::vector<Diagnostic> diagnostics;
  std::optional<FunctionalVerdict> functional_verdict;
};
Evaluation evaluate_code(const std::string &code, Experiment &experiment);

ExperimentReport run_experiment(Experiment &experiment);
ExperimentReport run_experiment(const RunConfig &config,
                                const TransportFactory &transport = make_http_transport);

/// Runs independent experiments on up to `jobs` threads; reports keep input
/// order. Experiments must not share a transcript file.
std::vector<ExperimentReport> run_grid(const std::vector<RunConfig> &configs, int jobs,
                                       const TransportFactory &transport = make_http_transport);

enum class ReportFormat { Markdown, Csv, Json };

std::optional<ReportFormat> parse_report_format(std::string_view text);

nlohmann::json diagnostic_to_json(const Diagnostic &diagnostic);
Diagnostic diagnostic_from_json(const nlohmann::json &record);
nlohmann::json report_to_json(const ExperimentReport &report);
ExperimentReport report_from_json(const nlohmann::json &document);

std::string render_report(const ExperimentReport &report, ReportFormat format);

} // namespace halbench
