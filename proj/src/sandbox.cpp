#include "halbench/sandbox.hpp"

#include "halbench/errors.hpp"
#include "halbench/gateway.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace halbench {

using nlohmann::json;

namespace {

std::string python_type_name(const json &value) {
  switch (value.type()) {
  case json::value_t::boolean:
    return "bool";
  case json::value_t::number_integer:
  case json::value_t::number_unsigned:
    return "int";
  case json::value_t::number_float:
    return "float";
  case json::value_t::string:
    return "str";
  case json::value_t::array:
    return "list";
  case json::value_t::object:
    return "dict";
  default:
    return "NoneType";
  }
}

bool value_matches(DataType type, const json &value) {
  switch (type) {
  case DataType::Boolean:
    return value.is_boolean();
  case DataType::String:
    return value.is_string();
  case DataType::Integer:
    return value.is_number_integer();
  case DataType::Float:
    return value.is_number();
  case DataType::None:
    return false;
  }
  return false;
}

std::string missing_attribute(const std::string &path) {
  auto segments = split_path(path);
  std::string owner = segments.size() > 1 ? segments[segments.size() - 2] : "Vehicle";
  return "'" + owner + "' object has no attribute '" + segments.back() + "'";
}

Diagnostic runtime(TaxonomyLeaf leaf, PenaltyClass penalty, std::string description) {
  Diagnostic d;
  d.taxonomy_leaf = leaf;
  d.penalty_class = penalty;
  d.description = std::move(description);
  d.source_stage = SourceStage::Runtime;
  return d;
}

const json &require(const json &doc, const char *key, const std::string &where) {
  if (!doc.is_object() || !doc.contains(key))
    throw ValidationError(where + ": missing '" + key + "'");
  return doc.at(key);
}

} // namespace

Scenario parse_scenario(const json &doc) {
  Scenario s;
  try {
    s.id = require(doc, "id", "scenario").get<std::string>();
    if (doc.contains("initial_values"))
      for (const auto &[path, value] : doc.at("initial_values").items())
        s.initial_values[path] = value;
    if (doc.contains("events"))
      for (const auto &e : doc.at("events")) {
        ScenarioEvent event;
        event.delay_ticks = e.value("delay_ticks", 0);
        event.path = require(e, "path", "scenario event").get<std::string>();
        event.value = require(e, "value", "scenario event");
        if (event.delay_ticks < 0)
          throw ValidationError("scenario event: negative delay_ticks");
        s.events.push_back(std::move(event));
      }
    const auto &x = require(doc, "expectation", "scenario");
    s.expectation.path = require(x, "path", "expectation").get<std::string>();
    s.expectation.value = require(x, "value", "expectation");
    s.expectation.deadline_ticks = x.value("deadline_ticks", 10);
    s.wall_timeout_s = doc.value("wall_timeout_s", 10.0);
    s.failure_description = doc.value("failure_description", std::string());
  } catch (const json::exception &e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  if (s.expectation.deadline_ticks < 1)
    throw ValidationError("scenario: deadline_ticks must be positive");
  if (!(s.wall_timeout_s > 0))
    throw ValidationError("scenario: wall_timeout_s must be positive");
  if (s.failure_description.empty())
    s.failure_description = "expected " + s.expectation.path + " = " +
                            s.expectation.value.dump() + " was not observed";
  return s;
}

Scenario load_scenario_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open scenario file '" + path + "'");
  try {
    return parse_scenario(json::parse(in));
  } catch (const json::parse_error &e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

json scenario_to_json(const Scenario &s) {
  json initial = json::object();
  for (const auto &[path, value] : s.initial_values)
    initial[path] = value;
  json events = json::array();
  for (const auto &e : s.events)
    events.push_back({{"delay_ticks", e.delay_ticks}, {"path", e.path}, {"value", e.value}});
  return {
      {"id", s.id},
      {"initial_values", initial},
      {"events", events},
      {"expectation",
       {{"path", s.expectation.path},
        {"value", s.expectation.value},
        {"deadline_ticks", s.expectation.deadline_ticks}}},
      {"wall_timeout_s", s.wall_timeout_s},
      {"failure_description", s.failure_description},
  };
}

void validate_scenario(const Scenario &s, const Catalog &catalog) {
  auto check_value = [&](const std::string &path, const json &value, const char *what) {
    const auto *node = catalog.resolve(path);
    if (!node)
      throw ValidationError(std::string(what) + " path '" + path + "' is not in the catalog");
    if (!value_matches(node->datatype, value))
      throw ValidationError(std::string(what) + " value " + value.dump() + " does not fit " +
                            std::string(to_string(node->datatype)) + " signal '" + path + "'");
    return node;
  };
  for (const auto &[path, value] : s.initial_values)
    check_value(path, value, "initial");
  for (const auto &e : s.events)
    check_value(e.path, e.value, "event");
  const auto *target = check_value(s.expectation.path, s.expectation.value, "expectation");
  if (target->kind != SignalKind::Actuator)
    throw ValidationError("expectation path '" + s.expectation.path + "' is not an actuator");
}

std::string_view to_string(EventOp op) {
  switch (op) {
  case EventOp::Hello:
    return "hello";
  case EventOp::Subscribe:
    return "subscribe";
  case EventOp::Get:
    return "get";
  case EventOp::SetTarget:
    return "set_target";
  case EventOp::Log:
    return "log";
  case EventOp::HelloAck:
    return "hello_ack";
  case EventOp::Value:
    return "value";
  case EventOp::SignalUpdate:
    return "signal_update";
  case EventOp::Shutdown:
    return "shutdown";
  case EventOp::ProtocolViolation:
    return "protocol_violation";
  }
  return "protocol_violation";
}

bool is_guest_op(EventOp op) {
  return op == EventOp::Hello || op == EventOp::Subscribe || op == EventOp::Get ||
         op == EventOp::SetTarget || op == EventOp::Log;
}

namespace {

std::optional<EventOp> op_from_string(std::string_view text) {
  for (auto op : {EventOp::Hello, EventOp::Subscribe, EventOp::Get, EventOp::SetTarget,
                  EventOp::Log, EventOp::HelloAck, EventOp::Value, EventOp::SignalUpdate,
                  EventOp::Shutdown})
    if (to_string(op) == text)
      return op;
  return std::nullopt;
}

BrokerEvent violation(std::string detail) {
  BrokerEvent e;
  e.op = EventOp::ProtocolViolation;
  e.message = std::move(detail);
  return e;
}

} // namespace

BrokerEvent decode_event(std::string_view line) {
  json frame;
  try {
    frame = json::parse(line);
  } catch (const json::exception &) {
    return violation("malformed frame: " + std::string(line.substr(0, 120)));
  }
  if (!frame.is_object())
    return violation("frame is not an object");
  auto op_it = frame.find("op");
  if (op_it == frame.end() || !op_it->is_string())
    return violation("frame without op");
  auto op = op_from_string(op_it->get<std::string>());
  if (!op)
    return violation("unknown op '" + op_it->get<std::string>() + "'");

  BrokerEvent e;
  e.op = *op;
  auto need_path = [&]() {
    auto it = frame.find("path");
    if (it == frame.end() || !it->is_string() || it->get<std::string>().empty())
      return false;
    e.path = it->get<std::string>();
    return true;
  };
  auto need_value = [&]() {
    auto it = frame.find("value");
    if (it == frame.end())
      return false;
    e.value = *it;
    return true;
  };
  switch (*op) {
  case EventOp::Hello:
  case EventOp::HelloAck: {
    auto it = frame.find("version");
    if (it == frame.end() || !it->is_number_integer())
      return violation(std::string(to_string(*op)) + " without integer version");
    e.message = std::to_string(it->get<std::int64_t>());
    break;
  }
  case EventOp::Subscribe:
    if (!need_path())
      return violation("subscribe without path");
    break;
  case EventOp::Get:
    if (!need_path())
      return violation("get without path");
    if (auto it = frame.find("id"); it != frame.end()) {
      if (!it->is_number_integer())
        return violation("get with non-integer id");
      e.request_id = it->get<std::int64_t>();
    }
    break;
  case EventOp::SetTarget:
    if (!need_path() || !need_value())
      return violation("set_target without path or value");
    break;
  case EventOp::Log: {
    auto it = frame.find("message");
    if (it == frame.end() || !it->is_string())
      return violation("log without message");
    e.message = it->get<std::string>();
    break;
  }
  case EventOp::Value:
    if (!need_path() || !need_value())
      return violation("value without path or value");
    if (auto it = frame.find("id"); it != frame.end() && it->is_number_integer())
      e.request_id = it->get<std::int64_t>();
    break;
  case EventOp::SignalUpdate:
    if (!need_path() || !need_value())
      return violation("signal_update without path or value");
    break;
  case EventOp::Shutdown:
  case EventOp::ProtocolViolation:
    break;
  }
  return e;
}

std::string encode_event(const BrokerEvent &e) {
  json frame = {{"op", std::string(to_string(e.op))}};
  switch (e.op) {
  case EventOp::Hello:
  case EventOp::HelloAck:
    frame["version"] = e.message.empty() ? kProtocolVersion : std::stoll(e.message);
    break;
  case EventOp::Log:
  case EventOp::ProtocolViolation:
    frame["message"] = e.message;
    break;
  case EventOp::Shutdown:
    break;
  default:
    frame["path"] = e.path;
    if (e.value)
      frame["value"] = *e.value;
    if (e.request_id)
      frame["id"] = *e.request_id;
  }
  return frame.dump();
}

json event_to_json(const BrokerEvent &e) {
  json record = {{"tick", e.tick},
                 {"dir", e.direction == Direction::Guest ? "guest" : "harness"},
                 {"op", std::string(to_string(e.op))}};
  if (!e.path.empty())
    record["path"] = e.path;
  if (e.value)
    record["value"] = *e.value;
  if (!e.message.empty())
    record["message"] = e.message;
  if (e.request_id)
    record["id"] = *e.request_id;
  return record;
}

BrokerEvent event_from_json(const json &record) {
  try {
    BrokerEvent e;
    auto op_text = record.at("op").get<std::string>();
    auto op = op_text == "protocol_violation" ? std::optional(EventOp::ProtocolViolation)
                                              : op_from_string(op_text);
    if (!op)
      throw ValidationError("event log: unknown op '" + op_text + "'");
    e.op = *op;
    e.tick = record.at("tick").get<std::int64_t>();
    auto dir = record.value("dir", std::string("guest"));
    if (dir != "guest" && dir != "harness")
      throw ValidationError("event log: bad direction '" + dir + "'");
    e.direction = dir == "guest" ? Direction::Guest : Direction::Harness;
    e.path = record.value("path", std::string());
    if (record.contains("value"))
      e.value = record.at("value");
    e.message = record.value("message", std::string());
    if (record.contains("id"))
      e.request_id = record.at("id").get<std::int64_t>();
    return e;
  } catch (const json::exception &ex) {
    throw ValidationError(std::string("event log: ") + ex.what());
  }
}

FunctionalVerdict evaluate_verdict(const std::vector<BrokerEvent> &log,
                                   const Expectation &expectation, bool timed_out) {
  std::optional<std::size_t> anchor;
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i].direction == Direction::Harness && log[i].op == EventOp::SignalUpdate)
      anchor = i;
  if (anchor) {
    std::int64_t limit = log[*anchor].tick + expectation.deadline_ticks;
    for (std::size_t i = *anchor + 1; i < log.size(); ++i) {
      const auto &e = log[i];
      if (e.direction == Direction::Guest && e.op == EventOp::SetTarget &&
          e.path == expectation.path && e.value && *e.value == expectation.value &&
          e.tick <= limit)
        return FunctionalVerdict::Pass;
    }
  }
  return timed_out ? FunctionalVerdict::Timeout : FunctionalVerdict::Fail;
}

std::optional<Diagnostic> classify_traceback(const std::string &stderr_text,
                                             const SdkSurface *surface) {
  auto header = stderr_text.rfind("Traceback (most recent call last):");
  if (header == std::string::npos)
    return std::nullopt;
  std::istringstream in(stderr_text.substr(header));
  std::string line;
  std::string final_line;
  std::optional<std::size_t> guest_line;
  static const std::regex frame(R"re(^\s*File "([^"]*)", line (\d+))re");
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    std::smatch m;
    if (std::regex_search(line, m, frame)) {
      std::string file = m[1].str();
      if (file == "guest.py" || (file.size() > 9 && file.compare(file.size() - 9, 9, "/guest.py") == 0))
        guest_line = std::stoul(m[2].str());
      continue;
    }
    if (!line.empty() && line[0] != ' ' && line[0] != '\t' &&
        line.rfind("Traceback", 0) != 0)
      final_line = line;
  }
  if (final_line.empty())
    return std::nullopt;

  std::string type = final_line;
  std::string message;
  if (auto colon = final_line.find(": "); colon != std::string::npos) {
    type = final_line.substr(0, colon);
    message = final_line.substr(colon + 2);
  } else if (!final_line.empty() && final_line.back() == ':') {
    type.pop_back();
  }
  if (auto dot = type.rfind('.'); dot != std::string::npos)
    type = type.substr(dot + 1);

  Diagnostic d = runtime(TaxonomyLeaf::IncorrectLogicalFlow, PenaltyClass::ExecError,
                         message.empty() ? type : type + ": " + message);
  static const std::regex type_misuse(R"(^setting \w+ for \w+ variable\b)");
  static const std::regex attribute(R"(^'(\w+)' object has no attribute '(\w+)')");
  static const std::regex module_attribute(R"(^module '([\w.]+)' has no attribute)");
  if (message.find(kNonActuatorMessage) != std::string::npos) {
    d.taxonomy_leaf = TaxonomyLeaf::APIKnowledgeConflict;
    d.description = kNonActuatorMessage;
  } else if (std::regex_search(message, type_misuse)) {
    d.taxonomy_leaf = TaxonomyLeaf::APIKnowledgeConflict;
    d.penalty_class = PenaltyClass::SignalMisuse;
    d.description = message;
  } else if (message.rfind("No async routine", 0) == 0) {
    d.taxonomy_leaf = TaxonomyLeaf::APIKnowledgeConflict;
    d.description = message;
  } else if (type == "NameError" || type == "UnboundLocalError") {
    d.taxonomy_leaf = TaxonomyLeaf::InvalidReferenceError;
    d.description = message;
  } else if (type == "AttributeError") {
    std::smatch m;
    bool surface_known = false;
    if (surface && std::regex_search(message, m, attribute))
      surface_known = surface->find_class(m[1].str()) != nullptr;
    else if (surface && std::regex_search(message, m, module_attribute))
      surface_known = surface->is_known_module(m[1].str());
    d.taxonomy_leaf = surface_known ? TaxonomyLeaf::APIKnowledgeConflict
                                    : TaxonomyLeaf::InvalidReferenceError;
    d.description = message;
  } else if (type == "ImportError" || type == "ModuleNotFoundError" || type == "TypeError") {
    d.taxonomy_leaf = TaxonomyLeaf::APIKnowledgeConflict;
    d.description = message;
  } else if (type == "SyntaxError" || type == "IndentationError" || type == "TabError") {
    d.taxonomy_leaf = TaxonomyLeaf::SyntaxViolation;
    d.source_stage = SourceStage::Parse;
  }
  if (d.description.empty())
    d.description = type;
  if (guest_line)
    d.location = SourceLocation{*guest_line, 0};
  return d;
}

RunOutcome assemble_outcome(const RunCapture &capture, const Scenario &scenario,
                            const RunContext &context) {
  RunOutcome out;
  out.event_log = capture.event_log;
  out.exit_status = capture.exit_status;
  out.term_signal = capture.term_signal;
  out.timed_out = capture.timed_out;
  out.functional_verdict =
      evaluate_verdict(capture.event_log, scenario.expectation, capture.timed_out);

  std::set<std::pair<TaxonomyLeaf, std::string>> seen;
  auto add = [&](Diagnostic d) {
    if (seen.insert({d.taxonomy_leaf, d.description}).second)
      out.runtime_diagnostics.push_back(std::move(d));
  };
  const Catalog *catalog = context.catalog;
  for (const auto &e : capture.event_log) {
    if (e.direction != Direction::Guest)
      continue;
    if (e.op == EventOp::ProtocolViolation) {
      add(runtime(TaxonomyLeaf::APIKnowledgeConflict, PenaltyClass::ExecError,
                  "protocol violation: " + e.message));
      continue;
    }
    if (e.op != EventOp::Subscribe && e.op != EventOp::Get && e.op != EventOp::SetTarget)
      continue;
    const SignalNode *node = catalog ? catalog->resolve(e.path) : nullptr;
    if (catalog && !node) {
      add(runtime(TaxonomyLeaf::APIKnowledgeConflict, PenaltyClass::SignalMisuse,
                  missing_attribute(e.path)));
      continue;
    }
    if (e.op != EventOp::SetTarget || !node)
      continue;
    if (node->kind != SignalKind::Actuator) {
      add(runtime(TaxonomyLeaf::APIKnowledgeConflict, PenaltyClass::ExecError,
                  kNonActuatorMessage));
      continue;
    }
    const json &value = e.value ? *e.value : json();
    if (!value_matches(node->datatype, value)) {
      add(runtime(TaxonomyLeaf::APIKnowledgeConflict, PenaltyClass::SignalMisuse,
                  "setting " + python_type_name(value) + " for " +
                      std::string(to_string(node->datatype)) + " variable " + node->path));
      continue;
    }
    if (!node->allowed_values.empty() &&
        std::find(node->allowed_values.begin(), node->allowed_values.end(),
                  value.get<std::string>()) == node->allowed_values.end())
      add(runtime(TaxonomyLeaf::APIKnowledgeConflict, PenaltyClass::SignalMisuse,
                  "value '" + value.get<std::string>() + "' is not allowed for " + node->path));
  }

  auto traceback = classify_traceback(capture.stderr_text, context.surface);
  if (traceback)
    add(std::move(*traceback));
  else if (!capture.timed_out && capture.exit_status && *capture.exit_status != 0)
    add(runtime(TaxonomyLeaf::IncorrectLogicalFlow, PenaltyClass::ExecError,
                "guest exited with status " + std::to_string(*capture.exit_status)));
  return out;
}

std::string code_digest(const std::string &source) { return sha256_hex(source); }

json recorded_run_to_json(const RecordedRun &run) {
  json log = json::array();
  for (const auto &e : run.capture.event_log)
    log.push_back(event_to_json(e));
  json record = {{"code_digest", run.code_digest},
                 {"event_log", log},
                 {"exit_status", run.capture.exit_status ? json(*run.capture.exit_status) : json()},
                 {"stderr", run.capture.stderr_text}};
  if (run.capture.term_signal)
    record["term_signal"] = *run.capture.term_signal;
  if (run.capture.timed_out)
    record["timed_out"] = true;
  return record;
}

RecordedRun recorded_run_from_json(const json &record) {
  try {
    RecordedRun run;
    run.code_digest = record.at("code_digest").get<std::string>();
    for (const auto &e : record.at("event_log"))
      run.capture.event_log.push_back(event_from_json(e));
    if (record.contains("exit_status") && !record.at("exit_status").is_null())
      run.capture.exit_status = record.at("exit_status").get<int>();
    if (record.contains("term_signal") && !record.at("term_signal").is_null())
      run.capture.term_signal = record.at("term_signal").get<int>();
    run.capture.timed_out = record.value("timed_out", false);
    run.capture.stderr_text = record.value("stderr", std::string());
    return run;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("recorded run: ") + e.what());
  }
}

RecordedExecutor::RecordedExecutor(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open recorded runs '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      auto run = recorded_run_from_json(json::parse(line));
      runs_.emplace(run.code_digest, std::move(run.capture));
    } catch (const json::exception &e) {
      throw ParseError(path + ": " + e.what(), line_no);
    } catch (const ValidationError &e) {
      throw ParseError(path + ": " + e.what(), line_no);
    }
  }
}

RunOutcome RecordedExecutor::run(const std::string &source, const Scenario &scenario,
                                 const RunContext &context) {
  auto digest = code_digest(source);
  auto it = runs_.find(digest);
  if (it == runs_.end())
    throw InfrastructureError("no recorded run for code digest " + digest);
  return assemble_outcome(it->second, scenario, context);
}

RecordingExecutor::RecordingExecutor(ProcessConfig config, std::string path)
    : inner_(std::move(config)), path_(std::move(path)) {}

RunOutcome RecordingExecutor::run(const std::string &source, const Scenario &scenario,
                                  const RunContext &context) {
  RecordedRun recorded{code_digest(source), inner_.capture(source, scenario, context)};
  {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out)
      throw ConfigError("cannot write recorded runs '" + path_ + "'");
    out << recorded_run_to_json(recorded).dump() << "\n";
  }
  return assemble_outcome(recorded.capture, scenario, context);
}

} // namespace halbench
