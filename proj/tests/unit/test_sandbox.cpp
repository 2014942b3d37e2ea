#include "doctest.h"
#include "support.hpp"

#include "halbench/errors.hpp"
#include "halbench/sandbox.hpp"

#include <chrono>
#include <csignal>
#include <filesystem>
#include <thread>

using namespace halbench;
using nlohmann::json;

namespace {

const std::string kHood = "Vehicle.Body.Hood.IsOpen";
const std::string kMode = "Vehicle.Body.Windshield.Front.Wiping.Mode";

Scenario hood_scenario() {
  return load_scenario_file(testing::fixture_path("scenarios/hood_open.json"));
}

RunContext context() {
  return {&testing::appendix_catalog(), &testing::reference_surface(),
          testing::fixture_path("appendix.vss")};
}

ProcessConfig fast_config() {
  ProcessConfig config;
  config.quiescence_ms = 10;
  config.max_tick_ms = 100;
  config.grace_ms = 300;
  return config;
}

std::string fake(const std::string &name) {
  return testing::read_fixture("guest/fake/" + name + ".py");
}

BrokerEvent ev(EventOp op, Direction dir, std::int64_t tick, std::string path = {},
               std::optional<json> value = std::nullopt) {
  BrokerEvent e;
  e.op = op;
  e.direction = dir;
  e.tick = tick;
  e.path = std::move(path);
  e.value = std::move(value);
  return e;
}

bool process_gone(int pid) {
  if (::kill(pid, 0) != 0)
    return true;
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string text((std::istreambuf_iterator<char>(stat)), {});
  auto close = text.rfind(')');
  return close != std::string::npos && close + 2 < text.size() && text[close + 2] == 'Z';
}

} // namespace

TEST_CASE("scenario fixture parses, validates and round-trips") {
  auto s = hood_scenario();
  CHECK(s.id == "hood-open-wipers-off");
  CHECK(s.events.size() == 1);
  CHECK(s.events[0].delay_ticks == 2);
  CHECK(s.expectation.path == kMode);
  CHECK(s.expectation.value == "OFF");
  CHECK(s.failure_description == "Wipers are still on, when hood is open");
  CHECK_NOTHROW(validate_scenario(s, testing::appendix_catalog()));
  CHECK(parse_scenario(scenario_to_json(s)) == s);
}

TEST_CASE("scenario validation rejects bad paths, types and sensor targets") {
  auto s = hood_scenario();
  auto bad = s;
  bad.expectation.path = kHood;
  bad.expectation.value = true;
  CHECK_THROWS_AS(validate_scenario(bad, testing::appendix_catalog()), ValidationError);
  bad = s;
  bad.events[0].value = "yes";
  CHECK_THROWS_AS(validate_scenario(bad, testing::appendix_catalog()), ValidationError);
  bad = s;
  bad.initial_values["Vehicle.Body.Hood.Colour"] = "red";
  CHECK_THROWS_AS(validate_scenario(bad, testing::appendix_catalog()), ValidationError);
  CHECK_THROWS_AS(parse_scenario(json{{"id", "x"}}), ValidationError);
  auto doc = scenario_to_json(s);
  doc["expectation"]["deadline_ticks"] = 0;
  CHECK_THROWS_AS(parse_scenario(doc), ValidationError);
}

TEST_CASE("decode_event accepts every guest op") {
  auto hello = decode_event(R"({"op":"hello","version":1})");
  CHECK(hello.op == EventOp::Hello);
  CHECK(hello.message == "1");
  auto sub = decode_event(R"({"op":"subscribe","path":"Vehicle.Speed"})");
  CHECK(sub.op == EventOp::Subscribe);
  CHECK(sub.path == "Vehicle.Speed");
  auto get = decode_event(R"({"op":"get","path":"Vehicle.Speed","id":4})");
  CHECK(get.request_id == 4);
  auto set = decode_event(R"({"op":"set_target","path":"Vehicle.A","value":null})");
  CHECK(set.op == EventOp::SetTarget);
  REQUIRE(set.value);
  CHECK(set.value->is_null());
  auto log = decode_event(R"({"op":"log","level":"info","message":"hi"})");
  CHECK(log.op == EventOp::Log);
  CHECK(log.message == "hi");
}

TEST_CASE("decode_event turns malformed frames into protocol violations") {
  for (const char *line : {"not json", "[1,2]", R"({"path":"x"})", R"({"op":"launch"})",
                           R"({"op":"hello"})", R"({"op":"subscribe"})",
                           R"({"op":"set_target","path":"Vehicle.A"})",
                           R"({"op":"get","path":"Vehicle.A","id":"x"})", R"({"op":"log"})",
                           ""}) {
    CAPTURE(line);
    CHECK(decode_event(line).op == EventOp::ProtocolViolation);
    CHECK_FALSE(decode_event(line).message.empty());
  }
}

TEST_CASE("encode and decode round-trip every frame kind") {
  std::vector<BrokerEvent> frames;
  auto add = [&](EventOp op, std::string path, std::optional<json> value, std::string message,
                 std::optional<std::int64_t> id) {
    BrokerEvent e;
    e.op = op;
    e.path = std::move(path);
    e.value = std::move(value);
    e.message = std::move(message);
    e.request_id = id;
    frames.push_back(std::move(e));
  };
  add(EventOp::Hello, "", std::nullopt, "1", std::nullopt);
  add(EventOp::HelloAck, "", std::nullopt, "1", std::nullopt);
  add(EventOp::Subscribe, kHood, std::nullopt, "", std::nullopt);
  add(EventOp::Get, kHood, std::nullopt, "", 3);
  add(EventOp::SetTarget, kMode, json("OFF"), "", std::nullopt);
  add(EventOp::Log, "", std::nullopt, "hello there", std::nullopt);
  add(EventOp::Value, kHood, json(false), "", 3);
  add(EventOp::Value, kHood, json(nullptr), "", std::nullopt);
  add(EventOp::SignalUpdate, kHood, json(true), "", std::nullopt);
  add(EventOp::Shutdown, "", std::nullopt, "", std::nullopt);
  for (const auto &e : frames) {
    CAPTURE(encode_event(e));
    CHECK(decode_event(encode_event(e)) == e);
    auto logged = e;
    logged.tick = 5;
    logged.direction = is_guest_op(e.op) ? Direction::Guest : Direction::Harness;
    CHECK(event_from_json(event_to_json(logged)) == logged);
  }
}

TEST_CASE("verdict needs the expected write after the last update and within the deadline") {
  Expectation x{kMode, "OFF", 10};
  using D = Direction;
  std::vector<BrokerEvent> log = {ev(EventOp::SignalUpdate, D::Harness, 2, kHood, true),
                                  ev(EventOp::SetTarget, D::Guest, 3, kMode, "OFF")};
  CHECK(evaluate_verdict(log, x, false) == FunctionalVerdict::Pass);
  CHECK(evaluate_verdict(log, x, true) == FunctionalVerdict::Pass);

  auto late = log;
  late[1].tick = 13;
  CHECK(evaluate_verdict(late, x, false) == FunctionalVerdict::Fail);
  late[1].tick = 12;
  CHECK(evaluate_verdict(late, x, false) == FunctionalVerdict::Pass);

  std::vector<BrokerEvent> early = {ev(EventOp::SetTarget, D::Guest, 0, kMode, "OFF"),
                                    ev(EventOp::SignalUpdate, D::Harness, 2, kHood, true)};
  CHECK(evaluate_verdict(early, x, false) == FunctionalVerdict::Fail);
  CHECK(evaluate_verdict(early, x, true) == FunctionalVerdict::Timeout);

  auto wrong_value = log;
  wrong_value[1].value = "SLOW";
  CHECK(evaluate_verdict(wrong_value, x, false) == FunctionalVerdict::Fail);
  auto harness_side = log;
  harness_side[1].direction = D::Harness;
  CHECK(evaluate_verdict(harness_side, x, false) == FunctionalVerdict::Fail);
  CHECK(evaluate_verdict({}, x, false) == FunctionalVerdict::Fail);
}

TEST_CASE("traceback classification") {
  auto surface = &testing::reference_surface();
  auto tb = [&](const std::string &last) {
    return classify_traceback("noise\nTraceback (most recent call last):\n"
                              "  File \"/usr/lib/python3/asyncio/base.py\", line 9, in run\n"
                              "  File \"/tmp/halbench-x/guest.py\", line 14, in on_start\n"
                              "    await thing()\n" +
                                  last + "\n",
                              surface);
  };
  CHECK_FALSE(classify_traceback("just a warning\n", surface));

  auto name = tb("NameError: name 'veh' is not defined");
  REQUIRE(name);
  CHECK(name->taxonomy_leaf == TaxonomyLeaf::InvalidReferenceError);
  CHECK(name->description == "name 'veh' is not defined");
  CHECK(name->source_stage == SourceStage::Runtime);
  REQUIRE(name->location);
  CHECK(name->location->line == 14);

  auto surface_attr = tb("AttributeError: 'VehicleApp' object has no attribute 'logger'");
  CHECK(surface_attr->taxonomy_leaf == TaxonomyLeaf::APIKnowledgeConflict);
  auto user_attr = tb("AttributeError: 'WiperControlApp' object has no attribute 'vehicle'");
  CHECK(user_attr->taxonomy_leaf == TaxonomyLeaf::InvalidReferenceError);

  auto import = tb("ModuleNotFoundError: No module named 'sdv.databroker'");
  CHECK(import->taxonomy_leaf == TaxonomyLeaf::APIKnowledgeConflict);
  CHECK(import->penalty_class == PenaltyClass::ExecError);

  auto type_misuse =
      tb("TypeError: setting int for string variable Vehicle.Body.Windshield.Front.Wiping.Mode");
  CHECK(type_misuse->penalty_class == PenaltyClass::SignalMisuse);
  CHECK(type_misuse->taxonomy_leaf == TaxonomyLeaf::APIKnowledgeConflict);

  auto actuator = tb(std::string("sdv.errors.VehicleDataError: ") + kNonActuatorMessage);
  CHECK(actuator->description == kNonActuatorMessage);
  CHECK(actuator->penalty_class == PenaltyClass::ExecError);

  auto syntax = tb("SyntaxError: invalid syntax");
  CHECK(syntax->taxonomy_leaf == TaxonomyLeaf::SyntaxViolation);
  CHECK(syntax->source_stage == SourceStage::Parse);

  auto other = tb("ZeroDivisionError: division by zero");
  CHECK(other->taxonomy_leaf == TaxonomyLeaf::IncorrectLogicalFlow);
  CHECK(other->description == "ZeroDivisionError: division by zero");
  CHECK(tb("KeyboardInterrupt")->description == "KeyboardInterrupt");
}

TEST_CASE("assemble_outcome checks set_target frames against the catalog") {
  using D = Direction;
  RunCapture capture;
  capture.exit_status = 0;
  capture.event_log = {ev(EventOp::Subscribe, D::Guest, 0, "Vehicle.Body.Hood.IsClosed"),
                       ev(EventOp::SignalUpdate, D::Harness, 2, kHood, true),
                       ev(EventOp::SetTarget, D::Guest, 2, kHood, false),
                       ev(EventOp::SetTarget, D::Guest, 2, kHood, false),
                       ev(EventOp::SetTarget, D::Guest, 2, kMode, 0),
                       ev(EventOp::SetTarget, D::Guest, 2, kMode, "STOP"),
                       ev(EventOp::ProtocolViolation, D::Guest, 3)};
  capture.event_log.back().message = "malformed frame: x";
  auto out = assemble_outcome(capture, hood_scenario(), context());
  CHECK(out.functional_verdict == FunctionalVerdict::Fail);
  REQUIRE(out.runtime_diagnostics.size() == 5);
  CHECK(out.runtime_diagnostics[0].description == "'Hood' object has no attribute 'IsClosed'");
  CHECK(out.runtime_diagnostics[1].description == kNonActuatorMessage);
  CHECK(out.runtime_diagnostics[1].penalty_class == PenaltyClass::ExecError);
  CHECK(out.runtime_diagnostics[2].description ==
        "setting int for string variable " + kMode);
  CHECK(out.runtime_diagnostics[2].penalty_class == PenaltyClass::SignalMisuse);
  CHECK(out.runtime_diagnostics[3].description == "value 'STOP' is not allowed for " + kMode);
  CHECK(out.runtime_diagnostics[4].description == "protocol violation: malformed frame: x");
  for (const auto &d : out.runtime_diagnostics)
    CHECK(d.source_stage == SourceStage::Runtime);
}

TEST_CASE("assemble_outcome reports a silent nonzero exit and merges the traceback") {
  RunCapture capture;
  capture.exit_status = 3;
  auto out = assemble_outcome(capture, hood_scenario(), context());
  REQUIRE(out.runtime_diagnostics.size() == 1);
  CHECK(out.runtime_diagnostics[0].description == "guest exited with status 3");

  capture.exit_status = 1;
  capture.event_log = {ev(EventOp::SetTarget, Direction::Guest, 2, kHood, false)};
  capture.stderr_text = std::string("Traceback (most recent call last):\n"
                                    "  File \"/tmp/h/guest.py\", line 3, in f\n"
                                    "sdv.VehicleDataError: ") +
                        kNonActuatorMessage + "\n";
  out = assemble_outcome(capture, hood_scenario(), context());
  CHECK(out.runtime_diagnostics.size() == 1);
}

TEST_CASE("recorded runs round-trip and are served by digest") {
  RecordedRun run;
  run.code_digest = code_digest("print(1)\n");
  run.capture.event_log = {ev(EventOp::Hello, Direction::Guest, 0),
                           ev(EventOp::SignalUpdate, Direction::Harness, 2, kHood, true),
                           ev(EventOp::SetTarget, Direction::Guest, 2, kMode, "OFF")};
  run.capture.event_log[0].message = "1";
  run.capture.exit_status = 0;
  run.capture.stderr_text = "warn\n";
  auto back = recorded_run_from_json(recorded_run_to_json(run));
  CHECK(back.code_digest == run.code_digest);
  CHECK(back.capture.event_log == run.capture.event_log);
  CHECK(back.capture.exit_status == 0);
  CHECK(back.capture.stderr_text == "warn\n");

  auto path = std::filesystem::temp_directory_path() / "halbench_recorded_test.jsonl";
  {
    std::ofstream out(path);
    out << recorded_run_to_json(run).dump() << "\n\n";
  }
  RecordedExecutor executor(path.string());
  CHECK(executor.size() == 1);
  auto outcome = executor.run("print(1)\n", hood_scenario(), context());
  CHECK(outcome.functional_verdict == FunctionalVerdict::Pass);
  CHECK_THROWS_AS(executor.run("print(2)\n", hood_scenario(), context()), InfrastructureError);
  {
    std::ofstream out(path);
    out << "{broken\n";
  }
  CHECK_THROWS_AS(RecordedExecutor(path.string()), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("process executor: a responsive guest passes") {
  ProcessExecutor executor(fast_config());
  auto out = executor.run(fake("pass"), hood_scenario(), context());
  CHECK(out.functional_verdict == FunctionalVerdict::Pass);
  CHECK(out.runtime_diagnostics.empty());
  CHECK_FALSE(out.timed_out);
  CHECK(out.exit_status == 0);
  REQUIRE(out.event_log.size() >= 6);
  CHECK(out.event_log[0].op == EventOp::Hello);
  CHECK(out.event_log[1].op == EventOp::HelloAck);
  bool answered = false;
  std::int64_t update_tick = -1;
  for (const auto &e : out.event_log) {
    if (e.op == EventOp::Value && e.request_id == 7)
      answered = e.value == json(false);
    if (e.op == EventOp::SignalUpdate)
      update_tick = e.tick;
  }
  CHECK(answered);
  CHECK(update_tick == 2);
  CHECK(out.event_log.back().op == EventOp::Shutdown);
}

TEST_CASE("process executor: writing a sensor yields runtime diagnostics and a fail") {
  ProcessExecutor executor(fast_config());
  auto out = executor.run(fake("sensor_write"), hood_scenario(), context());
  CHECK(out.functional_verdict == FunctionalVerdict::Fail);
  REQUIRE(out.runtime_diagnostics.size() == 2);
  CHECK(out.runtime_diagnostics[0].description == kNonActuatorMessage);
  CHECK(out.runtime_diagnostics[1].description == "setting int for string variable " + kMode);
}

TEST_CASE("process executor: stray stdout and harness ops are protocol violations") {
  ProcessExecutor executor(fast_config());
  auto out = executor.run(fake("garbage"), hood_scenario(), context());
  REQUIRE(out.runtime_diagnostics.size() == 2);
  CHECK(out.runtime_diagnostics[0].description.rfind("protocol violation: malformed frame", 0) ==
        0);
  CHECK(out.runtime_diagnostics[1].description ==
        "protocol violation: unexpected op 'value' from guest");
}

TEST_CASE("process executor: an unresponsive guest is cut at the deadline and killed") {
  auto config = fast_config();
  config.grace_ms = 100;
  ProcessExecutor executor(config);
  auto start = std::chrono::steady_clock::now();
  auto out = executor.run(fake("ignores_shutdown"), hood_scenario(), context());
  auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(out.functional_verdict == FunctionalVerdict::Fail);
  CHECK_FALSE(out.timed_out);
  CHECK(out.term_signal == SIGKILL);
  CHECK(out.runtime_diagnostics.empty());
  CHECK(elapsed < std::chrono::seconds(5));
  std::int64_t last_tick = 0;
  for (const auto &e : out.event_log)
    last_tick = std::max(last_tick, e.tick);
  CHECK(last_tick == 2 + 10 + 1);
}

TEST_CASE("process executor: the wall clock bounds a guest stuck before hello") {
  auto scenario = hood_scenario();
  scenario.wall_timeout_s = 0.5;
  ProcessExecutor executor(fast_config());
  auto out = executor.run("import time\ntime.sleep(60)\n", scenario, context());
  CHECK(out.timed_out);
  CHECK(out.functional_verdict == FunctionalVerdict::Timeout);
  CHECK(out.term_signal == SIGKILL);
}

TEST_CASE("process executor: crashes become runtime diagnostics") {
  ProcessExecutor executor(fast_config());
  auto out = executor.run(fake("crash_before_hello"), hood_scenario(), context());
  CHECK(out.exit_status == 1);
  REQUIRE(out.runtime_diagnostics.size() == 1);
  CHECK(out.runtime_diagnostics[0].description == "No module named 'sdv'");
  CHECK(out.runtime_diagnostics[0].location->line == 1);

  out = executor.run(fake("exits_early"), hood_scenario(), context());
  REQUIRE(out.runtime_diagnostics.size() == 1);
  CHECK(out.runtime_diagnostics[0].penalty_class == PenaltyClass::SignalMisuse);
  CHECK(out.runtime_diagnostics[0].location->line == 7);
}

TEST_CASE("process executor: infrastructure failures throw") {
  ProcessExecutor executor(fast_config());
  CHECK_THROWS_AS(executor.run(fake("wrong_version"), hood_scenario(), context()),
                  InfrastructureError);
  auto config = fast_config();
  CHECK_THROWS_AS(executor.run("import sys\nsys.exit(0)\n", hood_scenario(), context()),
                  InfrastructureError);
  config.python = "/nonexistent/python3";
  ProcessExecutor missing(config);
  CHECK_THROWS_AS(missing.run(fake("pass"), hood_scenario(), context()), InfrastructureError);
  config.max_tick_ms = 1;
  CHECK_THROWS_AS(ProcessExecutor{config}, ConfigError);
}

TEST_CASE("process executor: no guest process outlives the run") {
  auto config = fast_config();
  config.grace_ms = 50;
  ProcessExecutor executor(config);
  auto out = executor.run(fake("forks_child"), hood_scenario(), context());
  int child = 0;
  for (const auto &e : out.event_log)
    if (e.op == EventOp::Log && e.message.rfind("child ", 0) == 0)
      child = std::stoi(e.message.substr(6));
  REQUIRE(child > 0);
  bool gone = false;
  for (int i = 0; i < 50 && !gone; ++i) {
    gone = process_gone(child);
    if (!gone)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  CHECK(gone);
}

TEST_CASE("process executor exports the catalog and scenario to the guest") {
  ProcessExecutor executor(fast_config());
  std::string probe = "import json, os, sys\n"
                      "sys.stdout.write(json.dumps({'op': 'hello', 'version': 1}) + '\\n')\n"
                      "sys.stdout.write(json.dumps({'op': 'log', 'message': "
                      "os.environ['HALBENCH_CATALOG'] + '|' + os.environ['HALBENCH_SCENARIO']})"
                      " + '\\n')\n"
                      "sys.stdout.flush()\n";
  auto out = executor.run(probe, hood_scenario(), context());
  bool seen = false;
  for (const auto &e : out.event_log)
    if (e.op == EventOp::Log)
      seen = e.message == testing::fixture_path("appendix.vss") + "|hood-open-wipers-off";
  CHECK(seen);
}

TEST_CASE("recording executor appends captures that replay identically") {
  auto path = std::filesystem::temp_directory_path() / "halbench_recording_test.jsonl";
  std::filesystem::remove(path);
  RecordingExecutor recorder(fast_config(), path.string());
  auto live = recorder.run(fake("sensor_write"), hood_scenario(), context());
  RecordedExecutor replay(path.string());
  auto again = replay.run(fake("sensor_write"), hood_scenario(), context());
  CHECK(again.runtime_diagnostics == live.runtime_diagnostics);
  CHECK(again.event_log == live.event_log);
  CHECK(again.functional_verdict == live.functional_verdict);
  std::filesystem::remove(path);
}
