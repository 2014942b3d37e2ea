#include "halbench/analyzer.hpp"
#include "halbench/catalog.hpp"
#include "halbench/errors.hpp"
#include "halbench/orchestrator.hpp"
#include "halbench/surface.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

using namespace halbench;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kDiagnostics = 1, kFailure = 2, kExhausted = 3, kRefused = 4 };

std::string default_fixture(const std::string &name) {
  return std::string(HALBENCH_DEFAULT_FIXTURES) + "/" + name;
}

int outcome_code(ExperimentOutcome outcome) {
  switch (outcome) {
  case ExperimentOutcome::Solved:
    return kOk;
  case ExperimentOutcome::Exhausted:
    return kExhausted;
  case ExperimentOutcome::Refused:
    return kRefused;
  }
  return kFailure;
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out)
    throw ConfigError("cannot write '" + path + "'");
}

int run_experiments(const std::string &config_path, int jobs, bool replay,
                    const std::string &out_path) {
  auto configs = load_run_configs(config_path);
  for (auto &c : configs) {
    if (!replay)
      continue;
    c.gateway_mode = GatewayMode::Replay;
    if (c.execution == ExecutionMode::Record)
      c.execution = ExecutionMode::Recorded;
    if (c.execution == ExecutionMode::Process)
      std::cerr << "warning: " << c.experiment_id
                << ": replay with live process execution is not byte-reproducible\n";
  }
  for (const auto &c : configs)
    std::cerr << "experiment " << c.experiment_id << ": " << to_string(c.strategy) << ", "
              << c.model_id << ", gateway " << to_string(c.gateway_mode) << "\n";
  auto reports = run_grid(configs, jobs);

  int code = kOk;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto &r = reports[i];
    std::cerr << "experiment " << r.run_config.experiment_id << ": " << to_string(r.outcome)
              << " after " << r.iterations.size() << " iteration(s)\n";
    if (!configs[i].report_ref.empty() && out_path.empty())
      write_file(configs[i].resolve(configs[i].report_ref), render_report(r, ReportFormat::Json));
    code = std::max(code, outcome_code(r.outcome));
  }
  std::string text;
  if (reports.size() == 1) {
    text = render_report(reports.front(), ReportFormat::Json);
  } else {
    json all = json::array();
    for (const auto &r : reports)
      all.push_back(report_to_json(r));
    text = all.dump(2) + "\n";
  }
  if (out_path.empty())
    std::cout << text;
  else
    write_file(out_path, text);
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Hallucination evaluation harness for generated vehicle guest code"};
  app.require_subcommand(1);
  app.fallthrough(false);

  auto *catalog_cmd = app.add_subcommand("catalog", "Signal catalog tools");
  catalog_cmd->require_subcommand(1);
  auto *catalog_validate = catalog_cmd->add_subcommand("validate", "Load and check a catalog file");
  std::string catalog_file;
  catalog_validate->add_option("file", catalog_file, "Catalog file")->required();

  auto *surface_cmd = app.add_subcommand("surface", "SDK surface tools");
  surface_cmd->require_subcommand(1);
  auto *surface_validate = surface_cmd->add_subcommand("validate", "Load and check a surface file");
  std::string surface_file;
  std::string surface_catalog;
  surface_validate->add_option("file", surface_file, "Surface file")->required();
  surface_validate->add_option("--catalog", surface_catalog,
                               "Also merge the signal model of this catalog");

  auto *analyze = app.add_subcommand("analyze", "Statically analyze one guest source");
  std::string source_file;
  std::string analyze_catalog = default_fixture("appendix.vss");
  std::string analyze_surface = default_fixture("reference.surface");
  std::vector<std::string> expects;
  analyze->add_option("file", source_file, "Guest source file")->required();
  analyze->add_option("--catalog", analyze_catalog, "Catalog file")->capture_default_str();
  analyze->add_option("--surface", analyze_surface, "Surface file")->capture_default_str();
  analyze->add_option("--expect", expects, "Expected signal as role=path (repeatable)");

  auto *run = app.add_subcommand("run", "Run the experiments of a config file");
  auto *replay = app.add_subcommand("replay", "Run a config from stored transcripts only");
  std::string config_path;
  int jobs = 1;
  std::string out_path;
  for (auto *cmd : {run, replay}) {
    cmd->add_option("--config", config_path, "Run-config file")->required();
    cmd->add_option("--jobs", jobs, "Experiments run in parallel")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--out", out_path, "Write the JSON report here instead of stdout");
  }

  auto *report = app.add_subcommand("report", "Render a JSON report");
  std::string report_in;
  std::string format = "markdown";
  report->add_option("--in", report_in, "Report JSON file")->required();
  report->add_option("--format", format, "markdown, csv or json")
      ->check(CLI::IsMember({"markdown", "csv", "json"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kFailure;
  }

  try {
    if (catalog_validate->parsed()) {
      auto catalog = load_catalog_file(catalog_file);
      std::cout << catalog.size() << " signals\n";
      return kOk;
    }
    if (surface_validate->parsed()) {
      auto surface = load_surface_file(surface_file);
      if (!surface_catalog.empty())
        surface = surface.with_signal_model(load_catalog_file(surface_catalog));
      std::cout << surface.modules().size() << " modules, " << surface.classes().size()
                << " classes\n";
      return kOk;
    }
    if (analyze->parsed()) {
      TaskSignalSpec expected;
      for (const auto &e : expects) {
        auto eq = e.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == e.size())
          throw UsageError("--expect takes role=path, got '" + e + "'");
        expected.signals.push_back({e.substr(0, eq), e.substr(eq + 1)});
      }
      auto catalog = load_catalog_file(analyze_catalog);
      auto surface = load_surface_file(analyze_surface).with_signal_model(catalog);
      auto diagnostics = analyze_source(read_file(source_file), surface, catalog, expected);
      json list = json::array();
      for (const auto &d : diagnostics)
        list.push_back(diagnostic_to_json(d));
      auto score = score_iteration(diagnostics);
      json out = {{"file", source_file},
                  {"diagnostics", list},
                  {"score", score.score}};
      std::cout << out.dump(2) << "\n";
      return diagnostics.empty() ? kOk : kDiagnostics;
    }
    if (run->parsed() || replay->parsed())
      return run_experiments(config_path, jobs, replay->parsed(), out_path);
    if (report->parsed()) {
      json doc;
      try {
        doc = json::parse(read_file(report_in));
      } catch (const json::parse_error &e) {
        throw ConfigError("report '" + report_in + "': " + e.what());
      }
      std::cout << render_report(report_from_json(doc), *parse_report_format(format));
      return kOk;
    }
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
