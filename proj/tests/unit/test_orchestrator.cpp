#include "doctest.h"
#include "support.hpp"

#include "halbench/errors.hpp"
#include "halbench/orchestrator.hpp"

#include <array>
#include <cstdio>
#include <filesystem>

using namespace halbench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char *kFixtureConfigs[] = {"replay/actuator_repair/config.json", "replay/type_repair/config.json",
                                 "replay/refused_repair/config.json", "replay/never_parses/config.json"};

RunConfig fixture_config(const std::string &name) {
  return load_run_configs(testing::fixture_path(name)).at(0);
}

ExperimentReport replay(const std::string &name) { return run_experiment(fixture_config(name)); }

class CapturingProvider : public Provider {
public:
  explicit CapturingProvider(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  std::string complete(const std::string &prompt, const std::string &, const GenerationParams &) override {
    prompts.push_back(prompt);
    if (prompts.size() > responses_.size())
      throw UsageError("out of responses");
    return responses_[prompts.size() - 1];
  }
  std::vector<std::string> prompts;

private:
  std::vector<std::string> responses_;
};

Experiment live_experiment(const std::shared_ptr<Provider> &provider, RunConfig config) {
  config.gateway_mode = GatewayMode::Replay;
  auto x = prepare_experiment(config);
  x.config.gateway_mode = GatewayMode::Live;
  x.gateway = std::make_shared<Gateway>(GatewayMode::Live, nullptr, provider);
  return x;
}

std::string fenced(const std::string &code) { return "```python\n" + code + "```\n"; }

json minimal_config() {
  return {{"experiment_id", "x"},
          {"task", "do it"},
          {"model_id", "m"},
          {"transcript", "t.jsonl"},
          {"catalog", "c.vss"},
          {"surface", "s.surface"},
          {"scenario", "s.json"}};
}

std::string run_cli(const std::string &args, int &status) {
  std::string out;
  FILE *pipe = ::popen((std::string(HALBENCH_CLI) + " " + args + " 2>/dev/null").c_str(), "r");
  REQUIRE(pipe);
  std::array<char, 4096> buffer{};
  std::size_t n;
  while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
    out.append(buffer.data(), n);
  int raw = ::pclose(pipe);
  status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return out;
}

} // namespace

TEST_CASE("run config parsing") {
  auto c = parse_run_config(minimal_config(), "/base");
  CHECK(c.repair_mode == RepairMode::Detailed);
  CHECK(c.max_iterations == 4);
  CHECK(c.gateway_mode == GatewayMode::Replay);
  CHECK(c.generation.temperature == 0.0);
  CHECK(c.resolve("t.jsonl") == "/base/t.jsonl");
  CHECK(c.resolve("/abs/x") == "/abs/x");

  auto bad = minimal_config();
  bad["colour"] = "red";
  CHECK_THROWS_AS(parse_run_config(bad, "/"), ConfigError);
  bad = minimal_config();
  bad["task_file"] = "task.txt";
  CHECK_THROWS_AS(parse_run_config(bad, "/"), ConfigError);
  bad = minimal_config();
  bad["strategy"] = "clever";
  CHECK_THROWS_AS(parse_run_config(bad, "/"), ConfigError);
  bad = minimal_config();
  bad.erase("transcript");
  CHECK_THROWS_AS(parse_run_config(bad, "/"), ConfigError);
  bad = minimal_config();
  bad["max_iterations"] = -1;
  CHECK_THROWS_AS(parse_run_config(bad, "/"), ConfigError);
  bad = minimal_config();
  bad["execution"] = {{"mode", "recorded"}};
  CHECK_THROWS_AS(parse_run_config(bad, "/"), ConfigError);
  bad = minimal_config();
  bad["generation"] = {{"temperature", "hot"}};
  CHECK_THROWS_AS(parse_run_config(bad, "/"), ConfigError);
  CHECK_THROWS_AS(load_run_configs("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("experiment lists inherit top-level keys") {
  auto dir = fs::temp_directory_path() / "halbench-grid-config";
  fs::create_directories(dir);
  auto doc = minimal_config();
  doc["experiments"] = json::array({{{"experiment_id", "a"}},
                                    {{"experiment_id", "b"}, {"strategy", "signal_augmented"}}});
  {
    std::ofstream out(dir / "grid.json");
    out << doc.dump();
  }
  auto configs = load_run_configs((dir / "grid.json").string());
  REQUIRE(configs.size() == 2);
  CHECK(configs[0].experiment_id == "a");
  CHECK(configs[0].strategy == PromptStrategy::Baseline);
  CHECK(configs[1].strategy == PromptStrategy::SignalAugmented);
  CHECK(configs[1].model_id == "m");
  CHECK(configs[1].base_dir == fs::absolute(dir).string());
  fs::remove_all(dir);
}

TEST_CASE("never-parsing responses exhaust the loop with syntax violations") {
  auto r = replay("replay/never_parses/config.json");
  CHECK(r.outcome == ExperimentOutcome::Exhausted);
  REQUIRE(r.iterations.size() == 5);
  for (const auto &rec : r.iterations) {
    CHECK(rec.taxonomy_tags == std::set<TaxonomyLeaf>{TaxonomyLeaf::SyntaxViolation});
    CHECK_FALSE(rec.functional_verdict);
    CHECK_FALSE(rec.success);
  }
}

TEST_CASE("report invariants hold for every fixture") {
  for (const char *name : kFixtureConfigs) {
    CAPTURE(name);
    auto config = fixture_config(name);
    auto r = run_experiment(config);
    REQUIRE_FALSE(r.iterations.empty());
    CHECK(r.iterations.size() <= static_cast<std::size_t>(config.max_iterations + 1));
    CHECK((r.outcome == ExperimentOutcome::Solved) == r.iterations.back().success);
    for (std::size_t i = 0; i < r.iterations.size(); ++i) {
      const auto &rec = r.iterations[i];
      CHECK(rec.index == static_cast<int>(i));
      std::set<TaxonomyLeaf> tags;
      for (const auto &d : rec.diagnostics)
        tags.insert(classify(d).first);
      CHECK(rec.taxonomy_tags == tags);
      if (rec.success) {
        CHECK(rec.diagnostics.empty());
        CHECK(rec.score.score == 1.0);
        CHECK(i + 1 == r.iterations.size());
      }
      if (!rec.diagnostics.empty() && !rec.refused)
        CHECK(rec.description == rec.diagnostics.front().description);
      for (const auto &d : rec.diagnostics)
        CHECK_NOTHROW(check_diagnostic(d));
    }
  }
}

TEST_CASE("json report round-trips") {
  for (const char *name : kFixtureConfigs) {
    auto r = replay(name);
    auto text = render_report(r, ReportFormat::Json);
    CHECK(report_from_json(json::parse(text)) == r);
  }
  ExperimentReport empty;
  CHECK(report_from_json(report_to_json(empty)) == empty);
  CHECK_THROWS_AS(report_from_json(json{{"iterations", 1}}), ValidationError);
}

TEST_CASE("markdown and csv rendering") {
  auto r = replay("replay/actuator_repair/config.json");
  auto md = render_report(r, ReportFormat::Markdown);
  CHECK(md.rfind("| It | Suc. | Taxonomy | Description | Score |\n", 0) == 0);
  CHECK(std::count(md.begin(), md.end(), '\n') == 5);
  CHECK(md.find("| 0 | × | API KConflict | set target value for non-actuator is not allowed | 0.8 |") !=
        std::string::npos);
  CHECK(md.find("| 2 | ✓ | - | - | 1.0 |") != std::string::npos);

  ExperimentReport empty;
  auto header = render_report(empty, ReportFormat::Markdown);
  CHECK(std::count(header.begin(), header.end(), '\n') == 2);

  auto csv = render_report(r, ReportFormat::Csv);
  CHECK(csv.rfind("It,Suc.,Taxonomy,Description,Score\n", 0) == 0);
  CHECK(csv.find("2,true,,,1.0\n") != std::string::npos);

  ExperimentReport odd;
  IterationRecord rec;
  rec.description = "a, \"quoted\" | piped";
  odd.iterations.push_back(rec);
  CHECK(render_report(odd, ReportFormat::Csv).find("\"a, \"\"quoted\"\" | piped\"") !=
        std::string::npos);
  CHECK(render_report(odd, ReportFormat::Markdown).find("a, \"quoted\" \\| piped") !=
        std::string::npos);
}

TEST_CASE("repair prompts carry the previous diagnostics and code") {
  auto golden = testing::read_fixture("guest/golden.py");
  auto broken = testing::read_fixture("replay/never_parses/it0.py");
  auto provider = std::make_shared<CapturingProvider>(
      std::vector<std::string>{fenced(broken), fenced(golden)});
  auto config = fixture_config("replay/type_repair/config.json");
  auto x = live_experiment(provider, config);
  x.executor = std::make_shared<RecordedExecutor>(
      testing::fixture_path("replay/type_repair/recorded_runs.jsonl"));
  auto r = run_experiment(x);
  CHECK(r.outcome == ExperimentOutcome::Solved);
  REQUIRE(provider->prompts.size() == 2);
  CHECK(provider->prompts[0].find("Code skeleton:") != std::string::npos);
  CHECK(provider->prompts[1].find("[Syntactic/SyntaxViolation] expected ':' (line 8)") !=
        std::string::npos);
  CHECK(provider->prompts[1].find(fence_code(broken)) != std::string::npos);

  x.config.repair_mode = RepairMode::Simple;
  auto simple = std::make_shared<CapturingProvider>(
      std::vector<std::string>{fenced(broken), fenced(golden)});
  x.gateway = std::make_shared<Gateway>(GatewayMode::Live, nullptr, simple);
  run_experiment(x);
  REQUIRE(simple->prompts.size() == 2);
  CHECK(simple->prompts[1].find("SyntaxViolation") == std::string::npos);
  CHECK(simple->prompts[1].find(PromptLabels{}.simple_feedback) != std::string::npos);
}

TEST_CASE("a refusal at the first iteration is a requirement deviation") {
  auto provider = std::make_shared<CapturingProvider>(
      std::vector<std::string>{"I cannot help with that request."});
  auto x = live_experiment(provider, fixture_config("replay/type_repair/config.json"));
  auto r = run_experiment(x);
  CHECK(r.outcome == ExperimentOutcome::Refused);
  REQUIRE(r.iterations.size() == 1);
  CHECK(r.iterations[0].refused);
  CHECK(r.iterations[0].description == "response contained no code");
  CHECK(r.iterations[0].score.tenths() == 8);
  CHECK(r.iterations[0].taxonomy_tags ==
        std::set<TaxonomyLeaf>{TaxonomyLeaf::RequirementDeviation});
}

TEST_CASE("a refusal after a failed iteration carries the score forward") {
  auto r = replay("replay/refused_repair/config.json");
  REQUIRE(r.iterations.size() == 3);
  CHECK(r.iterations[2].refused);
  CHECK(r.iterations[2].score == r.iterations[1].score);
  CHECK(r.iterations[2].functional_verdict == FunctionalVerdict::Fail);
  CHECK(r.iterations[2].code_digest == code_digest(""));
}

TEST_CASE("max_iterations zero runs only the initial generation") {
  auto config = fixture_config("replay/never_parses/config.json");
  config.max_iterations = 0;
  auto r = run_experiment(config);
  CHECK(r.iterations.size() == 1);
  CHECK(r.outcome == ExperimentOutcome::Exhausted);
}

TEST_CASE("replay misses and missing resources abort the experiment") {
  auto config = fixture_config("replay/actuator_repair/config.json");
  config.model_id = "another-model";
  CHECK_THROWS_AS(run_experiment(config), ReplayMissError);
  config = fixture_config("replay/actuator_repair/config.json");
  config.scenario_ref = "missing.json";
  CHECK_THROWS_AS(prepare_experiment(config), ConfigError);
  config = fixture_config("replay/actuator_repair/config.json");
  config.expected_signals.signals.push_back({"x", "Vehicle.Nope"});
  CHECK_THROWS_AS(prepare_experiment(config), ConfigError);
}

TEST_CASE("run_grid keeps input order and rejects shared record files") {
  std::vector<RunConfig> configs;
  for (const char *name : kFixtureConfigs)
    configs.push_back(fixture_config(name));
  auto reports = run_grid(configs, 3);
  REQUIRE(reports.size() == configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    CHECK(reports[i].run_config.experiment_id == configs[i].experiment_id);
    CHECK(render_report(reports[i], ReportFormat::Json) ==
          render_report(run_experiment(configs[i]), ReportFormat::Json));
  }
  auto shared = configs;
  for (auto &c : shared) {
    c.gateway_mode = GatewayMode::Record;
    c.transcript_ref = "/tmp/shared.jsonl";
  }
  CHECK_THROWS_AS(run_grid(shared, 2), ConfigError);
}

TEST_CASE("cli exit codes and output") {
  int status = -1;
  auto out = run_cli("catalog validate " + testing::fixture_path("appendix.vss"), status);
  CHECK(status == 0);
  CHECK(out == "25 signals\n");

  out = run_cli("surface validate " + testing::fixture_path("reference.surface"), status);
  CHECK(status == 0);

  auto bad = fs::temp_directory_path() / "halbench_cli_bad.py";
  {
    std::ofstream f(bad);
    f << "from sdv.databroker import Client\n" << testing::read_fixture("guest/golden.py");
  }
  out = run_cli("analyze " + bad.string(), status);
  CHECK(status == 1);
  auto doc = json::parse(out);
  CHECK(doc.at("diagnostics").size() == 1);
  CHECK(doc.at("diagnostics")[0].at("taxonomy_leaf") == "APIKnowledgeConflict");
  fs::remove(bad);

  out = run_cli("analyze " + testing::fixture_path("guest/golden.py"), status);
  CHECK(status == 0);
  run_cli("replay --config missing.cfg", status);
  CHECK(status == 2);
  run_cli("frobnicate", status);
  CHECK(status == 2);
  run_cli("analyze --no-such-flag x.py", status);
  CHECK(status == 2);
  run_cli("--help", status);
  CHECK(status == 0);
  run_cli("run --help", status);
  CHECK(status == 0);

  run_cli("replay --config " + testing::fixture_path("replay/actuator_repair/config.json"), status);
  CHECK(status == 0);
  run_cli("replay --config " + testing::fixture_path("replay/never_parses/config.json"), status);
  CHECK(status == 3);
  auto report_path = fs::temp_directory_path() / "halbench_cli_report.json";
  run_cli("replay --config " + testing::fixture_path("replay/refused_repair/config.json") + " --out " +
              report_path.string(),
          status);
  CHECK(status == 4);
  out = run_cli("report --in " + report_path.string() + " --format markdown", status);
  CHECK(status == 0);
  CHECK(out.find("Wipers are still on, when hood is open") != std::string::npos);
  out = run_cli("report --in " + report_path.string() + " --format csv", status);
  CHECK(out.rfind("It,Suc.,Taxonomy,Description,Score\n", 0) == 0);
  run_cli("report --in " + report_path.string() + " --format yaml", status);
  CHECK(status == 2);
  fs::remove(report_path);
}
