#pragma once

#include "halbench/catalog.hpp"
#include "halbench/surface.hpp"
#include "halbench/taxonomy.hpp"

#include "json.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace halbench {

inline constexpr int kProtocolVersion = 1;
/// Environment variables the guest shim reads.
inline constexpr const char *kCatalogEnv = "HALBENCH_CATALOG";
inline constexpr const char *kScenarioEnv = "HALBENCH_SCENARIO";
/// Exact guest-side text of the actuator rule.
inline constexpr const char *kNonActuatorMessage =
    "set target value for non-actuator is not allowed";

struct ScenarioEvent {
  int delay_ticks = 0; // after the previous event (or the start)
  std::string path;
  nlohmann::json value;

  bool operator==(const ScenarioEvent &) const = default;
};

struct Expectation {
  std::string path;
  nlohmann::json value;
  int deadline_ticks = 10; // counted from the last injected event

  bool operator==(const Expectation &) const = default;
};

struct Scenario {
  std::string id;
  std::map<std::string, nlohmann::json> initial_values;
  std::vector<ScenarioEvent> events;
  Expectation expectation;
  double wall_timeout_s = 10.0;
  /// Reported when the expectation is not met.
  std::string failure_description;

  bool operator==(const Scenario &) const = default;
};

Scenario parse_scenario(const nlohmann::json &document);
Scenario load_scenario_file(const std::string &path);
nlohmann::json scenario_to_json(const Scenario &scenario);
/// Paths resolve, the expectation targets an actuator, values match types.
/// Throws ValidationError.
void validate_scenario(const Scenario &scenario, const Catalog &catalog);

enum class EventOp {
  Hello,
  Subscribe,
  Get,
  SetTarget,
  Log,
  HelloAck,
  Value,
  SignalUpdate,
  Shutdown,
  ProtocolViolation,
};

std::string_view to_string(EventOp op);
bool is_guest_op(EventOp op);

enum class Direction { Guest, Harness };

struct BrokerEvent {
  EventOp op = EventOp::ProtocolViolation;
  Direction direction = Direction::Guest;
  std::int64_t tick = 0;
  std::string path;
  std::optional<nlohmann::json> value;
  /// Log text, violation detail, or the hello version as text.
  std::string message;
  std::optional<std::int64_t> request_id;

  bool operator==(const BrokerEvent &) const = default;
};

/// Parses one protocol frame. Malformed frames, unknown ops and missing
/// fields decode to ProtocolViolation; never throws.
BrokerEvent decode_event(std::string_view line);
/// The wire form of a frame (no tick, no trailing newline).
std::string encode_event(const BrokerEvent &event);

nlohmann::json event_to_json(const BrokerEvent &event);
BrokerEvent event_from_json(const nlohmann::json &record);

struct RunOutcome {
  std::vector<Diagnostic> runtime_diagnostics;
  std::vector<BrokerEvent> event_log;
  FunctionalVerdict functional_verdict = FunctionalVerdict::Fail;
  std::optional<int> exit_status;
  std::optional<int> term_signal;
  bool timed_out = false;
};

/// Pass iff the log holds a guest set_target of the expected value on the
/// expected path after the last injected update and within the deadline.
/// Timeout when the run was cut by the wall clock without passing.
FunctionalVerdict evaluate_verdict(const std::vector<BrokerEvent> &event_log,
                                   const Expectation &expectation, bool timed_out);

struct RunContext {
  const Catalog *catalog = nullptr;
  const SdkSurface *surface = nullptr;
  std::string catalog_path;
};

/// Raw material of one run, as produced by a process or read from a recording.
struct RunCapture {
  std::vector<BrokerEvent> event_log;
  std::optional<int> exit_status;
  std::optional<int> term_signal;
  bool timed_out = false;
  std::string stderr_text;
};

/// Verdict plus runtime diagnostics from the frames and the guest traceback.
RunOutcome assemble_outcome(const RunCapture &capture, const Scenario &scenario,
                            const RunContext &context);

/// Diagnostic for the final exception of a guest traceback, if any.
std::optional<Diagnostic> classify_traceback(const std::string &stderr_text,
                                             const SdkSurface *surface);

class ScenarioExecutor {
public:
  virtual ~ScenarioExecutor() = default;
  virtual RunOutcome run(const std::string &source, const Scenario &scenario,
                         const RunContext &context) = 0;
};

struct ProcessConfig {
  std::string python = "python3";
  /// Directory prepended to PYTHONPATH (the guest shim package).
  std::string shim_path;
  int quiescence_ms = 25;
  int max_tick_ms = 250;
  int grace_ms = 1000;
};

/// Runs the guest as `python -u guest.py` in its own process group and
/// speaks the line protocol over its stdio.
class ProcessExecutor : public ScenarioExecutor {
public:
  explicit ProcessExecutor(ProcessConfig config);
  RunOutcome run(const std::string &source, const Scenario &scenario,
                 const RunContext &context) override;
  RunCapture capture(const std::string &source, const Scenario &scenario,
                     const RunContext &context);

private:
  ProcessConfig config_;
};

std::string code_digest(const std::string &source);

struct RecordedRun {
  std::string code_digest;
  RunCapture capture;
};

nlohmann::json recorded_run_to_json(const RecordedRun &run);
RecordedRun recorded_run_from_json(const nlohmann::json &record);

/// Serves runs from a JSONL file keyed by code digest.
class RecordedExecutor : public ScenarioExecutor {
public:
  explicit RecordedExecutor(const std::string &path);
  RunOutcome run(const std::string &source, const Scenario &scenario,
                 const RunContext &context) override;
  std::size_t size() const { return runs_.size(); }

private:
  std::map<std::string, RunCapture> runs_;
};

/// Executes through a ProcessExecutor and appends every capture to a file.
class RecordingExecutor : public ScenarioExecutor {
public:
  RecordingExecutor(ProcessConfig config, std::string path);
  RunOutcome run(const std::string &source, const Scenario &scenario,
                 const RunContext &context) override;

private:
  ProcessExecutor inner_;
  std::string path_;
  std::mutex mutex_;
};

} // namespace halbench
