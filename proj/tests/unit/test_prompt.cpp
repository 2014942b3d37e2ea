#include "doctest.h"
#include "support.hpp"

#include "halbench/errors.hpp"
#include "halbench/prompt.hpp"

#include <sstream>

using namespace halbench;

namespace {

std::vector<std::string> appendix_paths() {
  std::vector<std::string> out;
  std::istringstream in(testing::read_fixture("appendix_signals.txt"));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty())
      out.push_back(line);
  return out;
}

Diagnostic unknown_import() {
  Diagnostic d;
  d.taxonomy_leaf = TaxonomyLeaf::APIKnowledgeConflict;
  d.penalty_class = PenaltyClass::ExecError;
  d.description = "cannot import name 'subscribe_signal' from 'sdv.vehicle_app'";
  d.location = SourceLocation{3, 1};
  d.source_stage = SourceStage::Resolve;
  return d;
}

} // namespace

TEST_CASE("baseline prompt is the task text") {
  auto task = testing::read_fixture("tasks/baseline.txt");
  auto spec = build_initial(PromptStrategy::Baseline, task, {}, std::nullopt);
  CHECK(spec.rendered == task);
  CHECK(spec.rendered ==
        "Generate a full python code example using SDV python SDK and Covesa VSS signals to "
        "turn off the wipers as soon as the hood is open.");
}

TEST_CASE("signal-augmented prompt lists every path in input order") {
  auto paths = appendix_paths();
  REQUIRE(paths.size() == 21);
  auto spec = build_initial(PromptStrategy::SignalAugmented,
                            testing::read_fixture("tasks/signal_augmented.txt"), paths,
                            std::nullopt);
  std::size_t cursor = 0;
  for (const auto &p : paths) {
    auto at = spec.rendered.find("\n" + p + "\n", cursor);
    if (at == std::string::npos && spec.rendered.size() >= p.size() &&
        spec.rendered.compare(spec.rendered.size() - p.size(), p.size(), p) == 0)
      at = spec.rendered.size() - p.size() - 1;
    REQUIRE(at != std::string::npos);
    CHECK(at >= cursor);
    cursor = at + 1;
  }
  CHECK(spec.rendered.find("Available VSS signals:") != std::string::npos);
  auto reversed = paths;
  std::reverse(reversed.begin(), reversed.end());
  auto other = build_initial(PromptStrategy::SignalAugmented, spec.task_text, reversed,
                             std::nullopt);
  CHECK(other.rendered != spec.rendered);
}

TEST_CASE("template-augmented prompt ends with the fenced template") {
  auto tmpl = testing::read_fixture("guest/template.py");
  auto spec = build_initial(PromptStrategy::TemplateAugmented,
                            testing::read_fixture("tasks/template_augmented.txt"),
                            appendix_paths(), tmpl);
  std::string fenced = "```python\n" + tmpl + "```";
  REQUIRE(spec.rendered.size() > fenced.size());
  CHECK(spec.rendered.substr(spec.rendered.size() - fenced.size()) == fenced);
  CHECK(spec.rendered.find("Available VSS signals:") < spec.rendered.find("```python"));
}

TEST_CASE("strategy shape violations") {
  CHECK_THROWS_AS(build_initial(PromptStrategy::TemplateAugmented, "t", {"Vehicle.A"},
                                std::nullopt),
                  UsageError);
  CHECK_THROWS_AS(build_initial(PromptStrategy::Baseline, "t", {"Vehicle.A"}, std::nullopt),
                  UsageError);
  CHECK_THROWS_AS(build_initial(PromptStrategy::Baseline, "t", {}, std::string("x")),
                  UsageError);
  CHECK_THROWS_AS(build_initial(PromptStrategy::SignalAugmented, "t", {}, std::nullopt),
                  UsageError);
  CHECK_THROWS_AS(build_initial(PromptStrategy::Baseline, "", {}, std::nullopt), UsageError);
}

TEST_CASE("labels are overridable") {
  PromptLabels labels;
  labels.signal_header = "Signals:";
  auto spec = build_initial(PromptStrategy::SignalAugmented, "t", {"Vehicle.A"}, std::nullopt,
                            labels);
  CHECK(spec.rendered == "t\n\nSignals:\nVehicle.A");
}

TEST_CASE("simple repair carries no diagnostic text") {
  auto prompt = build_repair(RepairMode::Simple, "print(1)\n", {unknown_import()});
  CHECK(prompt.diagnostics_rendered.empty());
  CHECK(prompt.rendered.find("subscribe_signal") == std::string::npos);
  CHECK(prompt.rendered.find("Runtime Execution") == std::string::npos);
  CHECK(prompt.rendered.find("print(1)") != std::string::npos);
}

TEST_CASE("detailed repair lists categorized diagnostics then the code") {
  auto prompt = build_repair(RepairMode::Detailed, "from sdv.vehicle_app import subscribe_signal\n",
                             {unknown_import()}, std::string("task"));
  CHECK(prompt.diagnostics_rendered ==
        "[Runtime Execution/APIKnowledgeConflict] cannot import name 'subscribe_signal' from "
        "'sdv.vehicle_app' (line 3)");
  CHECK(prompt.rendered.rfind("task\n\n", 0) == 0);
  CHECK(prompt.rendered.find(prompt.diagnostics_rendered) <
        prompt.rendered.find("```python\nfrom sdv.vehicle_app"));
}

TEST_CASE("detailed repair without diagnostics is a usage error") {
  CHECK_THROWS_AS(build_repair(RepairMode::Detailed, "x = 1\n", {}), UsageError);
  CHECK_THROWS_AS(build_repair(RepairMode::Detailed, "", {unknown_import()}), UsageError);
}

TEST_CASE("strategy and mode names") {
  for (auto s : {PromptStrategy::Baseline, PromptStrategy::SignalAugmented,
                 PromptStrategy::TemplateAugmented})
    CHECK(parse_prompt_strategy(to_string(s)) == s);
  CHECK(parse_repair_mode("simple") == RepairMode::Simple);
  CHECK_FALSE(parse_repair_mode("verbose"));
}
