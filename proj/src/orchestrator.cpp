#include "halbench/orchestrator.hpp"

#include "halbench/errors.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace halbench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ExecutionMode mode) {
  switch (mode) {
  case ExecutionMode::Process:
    return "process";
  case ExecutionMode::Record:
    return "record";
  case ExecutionMode::Recorded:
    return "recorded";
  }
  return "process";
}

std::optional<ExecutionMode> parse_execution_mode(std::string_view text) {
  for (auto mode : {ExecutionMode::Process, ExecutionMode::Record, ExecutionMode::Recorded})
    if (to_string(mode) == text)
      return mode;
  return std::nullopt;
}

std::string_view to_string(ExperimentOutcome outcome) {
  switch (outcome) {
  case ExperimentOutcome::Solved:
    return "solved";
  case ExperimentOutcome::Exhausted:
    return "exhausted";
  case ExperimentOutcome::Refused:
    return "refused";
  }
  return "exhausted";
}

std::optional<ExperimentOutcome> parse_experiment_outcome(std::string_view text) {
  for (auto o : {ExperimentOutcome::Solved, ExperimentOutcome::Exhausted,
                 ExperimentOutcome::Refused})
    if (to_string(o) == text)
      return o;
  return std::nullopt;
}

std::string RunConfig::resolve(const std::string &ref) const {
  if (ref.empty())
    return ref;
  fs::path p(ref);
  if (p.is_absolute() || base_dir.empty())
    return p.lexically_normal().string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

namespace {

std::string read_text(const std::string &path, const char *what) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> read_signal_list(const std::string &path) {
  std::istringstream in(read_text(path, "signal list"));
  std::vector<std::string> signals;
  std::string line;
  while (std::getline(in, line)) {
    auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos || line[begin] == '#')
      continue;
    auto end = line.find_last_not_of(" \t\r");
    signals.push_back(line.substr(begin, end - begin + 1));
  }
  return signals;
}

class ConfigReader {
public:
  ConfigReader(const json &doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object())
      throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char *key) {
    seen_.insert(key);
    return doc_.contains(key);
  }

  template <typename T> T get(const char *key) {
    if (!has(key))
      throw ConfigError(where_ + ": missing '" + key + "'");
    return convert<T>(key);
  }

  template <typename T> T get(const char *key, T fallback) {
    return has(key) ? convert<T>(key) : fallback;
  }

  const json &raw(const char *key) {
    seen_.insert(key);
    return doc_.at(key);
  }

  void finish() const {
    for (const auto &[key, value] : doc_.items())
      if (!seen_.count(key))
        throw ConfigError(where_ + ": unknown key '" + key + "'");
  }

private:
  template <typename T> T convert(const char *key) {
    try {
      return doc_.at(key).get<T>();
    } catch (const json::exception &) {
      throw ConfigError(where_ + ": bad value for '" + key + "'");
    }
  }

  const json &doc_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename T, typename Parse>
T parse_enum(ConfigReader &reader, const char *key, T fallback, Parse parse) {
  if (!reader.has(key))
    return fallback;
  auto text = reader.get<std::string>(key);
  auto value = parse(text);
  if (!value)
    throw ConfigError(std::string("run config: unknown ") + key + " '" + text + "'");
  return *value;
}

} // namespace

RunConfig parse_run_config(const json &doc, const std::string &base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  ConfigReader r(doc, "run config");
  c.experiment_id = r.get<std::string>("experiment_id");
  if (r.has("task") == r.has("task_file"))
    throw ConfigError("run config: give exactly one of 'task' and 'task_file'");
  c.task_text = r.has("task") ? r.get<std::string>("task")
                              : read_text(c.resolve(r.get<std::string>("task_file")), "task file");
  c.strategy = parse_enum(r, "strategy", c.strategy, parse_prompt_strategy);
  c.signal_list_ref = r.get<std::string>("signal_list", "");
  c.template_ref = r.get<std::string>("template", "");
  if (r.has("expected_signals")) {
    const auto &list = r.raw("expected_signals");
    if (!list.is_array())
      throw ConfigError("run config: 'expected_signals' must be an array");
    for (const auto &item : list) {
      ConfigReader s(item, "expected signal");
      c.expected_signals.signals.push_back({s.get<std::string>("role"), s.get<std::string>("path")});
      s.finish();
    }
  }
  c.model_id = r.get<std::string>("model_id");
  c.gateway_mode = parse_enum(r, "gateway_mode", c.gateway_mode, parse_gateway_mode);
  c.transcript_ref = r.get<std::string>("transcript", "");
  c.catalog_ref = r.get<std::string>("catalog");
  c.surface_ref = r.get<std::string>("surface");
  c.scenario_ref = r.get<std::string>("scenario");
  c.repair_mode = parse_enum(r, "repair_mode", c.repair_mode, parse_repair_mode);
  c.max_iterations = r.get<int>("max_iterations", c.max_iterations);
  if (c.max_iterations < 0)
    throw ConfigError("run config: max_iterations must be >= 0");
  c.restate_task = r.get<bool>("restate_task", c.restate_task);
  if (r.has("generation")) {
    ConfigReader g(r.raw("generation"), "generation");
    c.generation.temperature = g.get<double>("temperature", c.generation.temperature);
    c.generation.max_tokens = g.get<int>("max_tokens", c.generation.max_tokens);
    g.finish();
  }
  if (r.has("prompt_labels")) {
    ConfigReader l(r.raw("prompt_labels"), "prompt_labels");
    auto &labels = c.labels;
    labels.signal_header = l.get<std::string>("signal_header", labels.signal_header);
    labels.template_header = l.get<std::string>("template_header", labels.template_header);
    labels.simple_feedback = l.get<std::string>("simple_feedback", labels.simple_feedback);
    labels.detailed_header = l.get<std::string>("detailed_header", labels.detailed_header);
    labels.previous_code_header =
        l.get<std::string>("previous_code_header", labels.previous_code_header);
    labels.detailed_request = l.get<std::string>("detailed_request", labels.detailed_request);
    l.finish();
  }
  if (r.has("execution")) {
    ConfigReader e(r.raw("execution"), "execution");
    c.execution = parse_enum(e, "mode", c.execution, parse_execution_mode);
    c.recorded_runs_ref = e.get<std::string>("recorded_runs", "");
    c.process.python = e.get<std::string>("python", c.process.python);
    auto shim = e.get<std::string>("shim_path", "");
    c.process.shim_path = c.resolve(shim);
    c.process.quiescence_ms = e.get<int>("quiescence_ms", c.process.quiescence_ms);
    c.process.max_tick_ms = e.get<int>("max_tick_ms", c.process.max_tick_ms);
    c.process.grace_ms = e.get<int>("grace_ms", c.process.grace_ms);
    e.finish();
  }
  if (c.execution != ExecutionMode::Process && c.recorded_runs_ref.empty())
    throw ConfigError("run config: execution mode '" + std::string(to_string(c.execution)) +
                      "' needs 'recorded_runs'");
  if (r.has("provider")) {
    ConfigReader p(r.raw("provider"), "provider");
    auto &pc = c.provider;
    pc.kind = p.get<std::string>("kind", pc.kind);
    if (pc.kind != "openai" && pc.kind != "scripted")
      throw ConfigError("provider: unknown kind '" + pc.kind + "'");
    pc.openai.base_url = p.get<std::string>("base_url", pc.openai.base_url);
    pc.openai.path = p.get<std::string>("path", pc.openai.path);
    pc.openai.credential_env = p.get<std::string>("credential_env", pc.openai.credential_env);
    pc.openai.timeout_seconds = p.get<int>("timeout_seconds", pc.openai.timeout_seconds);
    pc.responses_ref = p.get<std::string>("responses", "");
    if (pc.kind == "scripted" && pc.responses_ref.empty())
      throw ConfigError("provider: scripted kind needs 'responses'");
    p.finish();
  }
  c.report_ref = r.get<std::string>("report", "");
  if (c.gateway_mode != GatewayMode::Live && c.transcript_ref.empty())
    throw ConfigError("run config: gateway mode '" + std::string(to_string(c.gateway_mode)) +
                      "' needs 'transcript'");
  r.finish();
  return c;
}

std::vector<RunConfig> load_run_configs(const std::string &path) {
  json doc;
  {
    std::ifstream in(path);
    if (!in)
      throw ConfigError("cannot open run config '" + path + "'");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error &e) {
      throw ConfigError("run config '" + path + "': " + e.what());
    }
  }
  auto base = fs::absolute(path).parent_path().string();
  if (!doc.is_object())
    throw ConfigError("run config '" + path + "': expected an object");
  std::vector<RunConfig> configs;
  if (!doc.contains("experiments")) {
    configs.push_back(parse_run_config(doc, base));
    return configs;
  }
  const auto &list = doc.at("experiments");
  if (!list.is_array() || list.empty())
    throw ConfigError("run config: 'experiments' must be a non-empty array");
  json shared = doc;
  shared.erase("experiments");
  for (const auto &entry : list) {
    if (!entry.is_object())
      throw ConfigError("run config: experiment entries must be objects");
    json merged = shared;
    merged.merge_patch(entry);
    configs.push_back(parse_run_config(merged, base));
  }
  return configs;
}

Experiment prepare_experiment(const RunConfig &config, const TransportFactory &transport) {
  Experiment x;
  x.config = config;
  x.catalog = load_catalog_file(config.resolve(config.catalog_ref));
  x.surface = load_surface_file(config.resolve(config.surface_ref)).with_signal_model(x.catalog);
  x.scenario = load_scenario_file(config.resolve(config.scenario_ref));
  validate_scenario(x.scenario, x.catalog);
  for (const auto &s : config.expected_signals.signals)
    if (!x.catalog.resolve(s.path))
      throw ConfigError("expected signal '" + s.path + "' is not in the catalog");
  if (!config.signal_list_ref.empty())
    x.signal_list = read_signal_list(config.resolve(config.signal_list_ref));
  if (!config.template_ref.empty())
    x.code_template = read_text(config.resolve(config.template_ref), "code template");
  build_initial(config.strategy, config.task_text, x.signal_list, x.code_template,
                config.labels);

  std::shared_ptr<TranscriptStore> store;
  if (!config.transcript_ref.empty())
    store = std::make_shared<TranscriptStore>(config.resolve(config.transcript_ref));
  std::shared_ptr<Provider> provider;
  if (config.gateway_mode != GatewayMode::Replay) {
    if (config.provider.kind == "scripted") {
      auto doc = json::parse(read_text(config.resolve(config.provider.responses_ref),
                                       "scripted responses"),
                             nullptr, false);
      if (!doc.is_array())
        throw ConfigError("scripted responses must be a JSON array of strings");
      std::vector<std::string> responses;
      for (const auto &item : doc) {
        if (!item.is_string())
          throw ConfigError("scripted responses must be a JSON array of strings");
        responses.push_back(item.get<std::string>());
      }
      provider = std::make_shared<ScriptedProvider>(std::move(responses));
    } else {
      provider = std::make_shared<OpenAiProvider>(config.provider.openai,
                                                  transport(config.provider.openai.timeout_seconds));
    }
  }
  x.gateway = std::make_shared<Gateway>(config.gateway_mode, store, provider);

  switch (config.execution) {
  case ExecutionMode::Process:
    x.executor = std::make_shared<ProcessExecutor>(config.process);
    break;
  case ExecutionMode::Record:
    x.executor = std::make_shared<RecordingExecutor>(config.process,
                                                     config.resolve(config.recorded_runs_ref));
    break;
  case ExecutionMode::Recorded:
    x.executor = std::make_shared<RecordedExecutor>(config.resolve(config.recorded_runs_ref));
    break;
  }
  return x;
}

namespace {

Diagnostic make_diagnostic(TaxonomyLeaf leaf, PenaltyClass penalty, SourceStage stage,
                           std::string description) {
  Diagnostic d;
  d.taxonomy_leaf = leaf;
  d.penalty_class = penalty;
  d.source_stage = stage;
  d.description = std::move(description);
  return d;
}

IterationRecord make_record(int index, const std::string &code, Evaluation evaluation) {
  IterationRecord rec;
  rec.index = index;
  rec.code_digest = code_digest(code);
  rec.diagnostics = std::move(evaluation.diagnostics);
  rec.functional_verdict = evaluation.functional_verdict;
  for (const auto &d : rec.diagnostics)
    rec.taxonomy_tags.insert(classify(d).first);
  rec.description = rec.diagnostics.empty() ? std::string() : rec.diagnostics.front().description;
  rec.score = score_iteration(rec.diagnostics);
  rec.success = success(rec.diagnostics, rec.functional_verdict.value_or(FunctionalVerdict::Fail));
  return rec;
}

} // namespace

Evaluation evaluate_code(const std::string &code, Experiment &x) {
  Evaluation result;
  result.diagnostics = analyze_source(code, x.surface, x.catalog, x.config.expected_signals);
  bool exec_static = false;
  bool signal_stage = false;
  for (const auto &d : result.diagnostics) {
    exec_static |= d.penalty_class == PenaltyClass::ExecError;
    signal_stage |= d.source_stage == SourceStage::Signal;
  }
  if (exec_static)
    return result;

  RunContext context{&x.catalog, &x.surface, x.config.resolve(x.config.catalog_ref)};
  auto outcome = x.executor->run(code, x.scenario, context);
  result.functional_verdict = outcome.functional_verdict;
  std::set<std::pair<TaxonomyLeaf, std::string>> seen;
  for (const auto &d : result.diagnostics)
    seen.insert({d.taxonomy_leaf, d.description});
  bool runtime = false;
  for (auto &d : outcome.runtime_diagnostics) {
    runtime = true;
    if (seen.insert({d.taxonomy_leaf, d.description}).second)
      result.diagnostics.push_back(std::move(d));
  }
  if (outcome.functional_verdict != FunctionalVerdict::Pass && !signal_stage && !runtime)
    result.diagnostics.push_back(make_diagnostic(TaxonomyLeaf::APIKnowledgeConflict,
                                                 PenaltyClass::SignalMisuse,
                                                 SourceStage::Functional,
                                                 x.scenario.failure_description));
  sort_by_stage(result.diagnostics);
  return result;
}

ExperimentReport run_experiment(Experiment &x) {
  const auto &c = x.config;
  ExperimentReport report;
  report.run_config = {c.experiment_id, c.strategy,       c.model_id,    c.repair_mode,
                       c.max_iterations, c.gateway_mode,  c.transcript_ref, c.catalog_ref,
                       c.surface_ref,   c.scenario_ref};
  auto initial = build_initial(c.strategy, c.task_text, x.signal_list, x.code_template, c.labels);
  std::string previous_code;
  for (int k = 0; k <= c.max_iterations; ++k) {
    std::string prompt;
    if (k == 0) {
      prompt = initial.rendered;
    } else {
      auto task = c.restate_task ? std::optional(c.task_text) : std::nullopt;
      prompt = build_repair(c.repair_mode, previous_code, report.iterations.back().diagnostics,
                            task, c.labels)
                   .rendered;
    }
    auto response = x.gateway->complete(prompt, c.model_id, c.generation);
    auto code = extract_code(response);
    if (code.empty()) {
      IterationRecord rec;
      if (report.iterations.empty()) {
        Evaluation refusal;
        refusal.diagnostics.push_back(make_diagnostic(TaxonomyLeaf::RequirementDeviation,
                                                      PenaltyClass::ExecError,
                                                      SourceStage::Structure,
                                                      "response contained no code"));
        rec = make_record(k, code, std::move(refusal));
      } else {
        rec = report.iterations.back();
        rec.index = k;
        rec.code_digest = code_digest(code);
      }
      rec.functional_verdict = FunctionalVerdict::Fail;
      rec.success = false;
      rec.refused = true;
      report.iterations.push_back(std::move(rec));
      report.outcome = ExperimentOutcome::Refused;
      return report;
    }
    report.iterations.push_back(make_record(k, code, evaluate_code(code, x)));
    previous_code = code;
    if (report.iterations.back().success) {
      report.outcome = ExperimentOutcome::Solved;
      return report;
    }
  }
  report.outcome = ExperimentOutcome::Exhausted;
  return report;
}

ExperimentReport run_experiment(const RunConfig &config, const TransportFactory &transport) {
  auto experiment = prepare_experiment(config, transport);
  return run_experiment(experiment);
}

std::vector<ExperimentReport> run_grid(const std::vector<RunConfig> &configs, int jobs,
                                       const TransportFactory &transport) {
  std::set<std::string> written;
  for (const auto &c : configs) {
    if (c.gateway_mode != GatewayMode::Replay &&
        !written.insert("t:" + c.resolve(c.transcript_ref)).second)
      throw ConfigError("experiments '" + c.experiment_id + "' share a transcript file");
    if (c.execution == ExecutionMode::Record &&
        !written.insert("r:" + c.resolve(c.recorded_runs_ref)).second)
      throw ConfigError("experiments '" + c.experiment_id + "' share a recorded-runs file");
  }
  std::vector<ExperimentReport> reports(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < configs.size();) {
      try {
        reports[i] = run_experiment(configs[i], transport);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1,
                                                std::max<std::size_t>(configs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t)
    pool.emplace_back(worker);
  worker();
  for (auto &t : pool)
    t.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
  return reports;
}

} // namespace halbench
