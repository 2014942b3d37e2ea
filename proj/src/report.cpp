#include "halbench/errors.hpp"
#include "halbench/orchestrator.hpp"

#include <cstdio>
#include <sstream>

namespace halbench {

using nlohmann::json;

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "markdown")
    return ReportFormat::Markdown;
  if (text == "csv")
    return ReportFormat::Csv;
  if (text == "json")
    return ReportFormat::Json;
  return std::nullopt;
}

namespace {

template <typename T, typename Parse>
T enum_field(const json &doc, const char *key, Parse parse) {
  auto text = doc.at(key).get<std::string>();
  auto value = parse(text);
  if (!value)
    throw ValidationError(std::string("report: unknown ") + key + " '" + text + "'");
  return *value;
}

std::string score_text(const ScoreBreakdown &score) {
  char buffer[16];
  std::snprintf(buffer, sizeof buffer, "%.1f", score.tenths() / 10.0);
  return buffer;
}

std::string taxonomy_text(const IterationRecord &rec, const char *separator) {
  std::string out;
  for (auto leaf : rec.taxonomy_tags) {
    if (!out.empty())
      out += separator;
    out += abbreviation(leaf);
  }
  return out;
}

std::string markdown_cell(std::string text) {
  std::string out;
  for (char ch : text) {
    if (ch == '|')
      out += "\\|";
    else if (ch == '\n' || ch == '\r')
      out += ' ';
    else
      out += ch;
  }
  return out.empty() ? "-" : out;
}

std::string csv_cell(const std::string &text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos)
    return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"')
      out += '"';
    out += ch;
  }
  return out + "\"";
}

} // namespace

json diagnostic_to_json(const Diagnostic &d) {
  json record = {
      {"taxonomy_leaf", std::string(to_string(d.taxonomy_leaf))},
      {"category", std::string(to_string(parent_category(d.taxonomy_leaf)))},
      {"penalty_class", std::string(to_string(d.penalty_class))},
      {"description", d.description},
      {"source_stage", std::string(to_string(d.source_stage))},
      {"location", d.location ? json{{"line", d.location->line}, {"column", d.location->column}}
                              : json()},
      {"suggestions", d.suggestions},
  };
  return record;
}

Diagnostic diagnostic_from_json(const json &r) {
  try {
    Diagnostic d;
    d.taxonomy_leaf = enum_field<TaxonomyLeaf>(r, "taxonomy_leaf", parse_taxonomy_leaf);
    d.penalty_class = enum_field<PenaltyClass>(r, "penalty_class", parse_penalty_class);
    d.source_stage = enum_field<SourceStage>(r, "source_stage", parse_source_stage);
    d.description = r.at("description").get<std::string>();
    if (r.contains("location") && !r.at("location").is_null())
      d.location = SourceLocation{r.at("location").at("line").get<std::size_t>(),
                                  r.at("location").at("column").get<std::size_t>()};
    if (r.contains("suggestions"))
      d.suggestions = r.at("suggestions").get<std::vector<std::string>>();
    return d;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("diagnostic: ") + e.what());
  }
}

json report_to_json(const ExperimentReport &report) {
  const auto &c = report.run_config;
  json iterations = json::array();
  for (const auto &rec : report.iterations) {
    json tags = json::array();
    for (auto leaf : rec.taxonomy_tags)
      tags.push_back(std::string(to_string(leaf)));
    json diagnostics = json::array();
    for (const auto &d : rec.diagnostics)
      diagnostics.push_back(diagnostic_to_json(d));
    iterations.push_back({
        {"index", rec.index},
        {"success", rec.success},
        {"refused", rec.refused},
        {"taxonomy_tags", tags},
        {"description", rec.description},
        {"score",
         {{"base", rec.score.base},
          {"exec_error_count", rec.score.exec_error_count},
          {"signal_misuse_count", rec.score.signal_misuse_count},
          {"score", rec.score.score}}},
        {"code_digest", rec.code_digest},
        {"functional_verdict", rec.functional_verdict
                                   ? json(std::string(to_string(*rec.functional_verdict)))
                                   : json()},
        {"diagnostics", diagnostics},
    });
  }
  return {
      {"run_config",
       {{"experiment_id", c.experiment_id},
        {"strategy", std::string(to_string(c.strategy))},
        {"model_id", c.model_id},
        {"repair_mode", std::string(to_string(c.repair_mode))},
        {"max_iterations", c.max_iterations},
        {"gateway_mode", std::string(to_string(c.gateway_mode))},
        {"transcript", c.transcript_ref},
        {"catalog", c.catalog_ref},
        {"surface", c.surface_ref},
        {"scenario", c.scenario_ref}}},
      {"iterations", iterations},
      {"outcome", std::string(to_string(report.outcome))},
  };
}

ExperimentReport report_from_json(const json &doc) {
  try {
    ExperimentReport report;
    const auto &c = doc.at("run_config");
    auto &rc = report.run_config;
    rc.experiment_id = c.at("experiment_id").get<std::string>();
    rc.strategy = enum_field<PromptStrategy>(c, "strategy", parse_prompt_strategy);
    rc.model_id = c.at("model_id").get<std::string>();
    rc.repair_mode = enum_field<RepairMode>(c, "repair_mode", parse_repair_mode);
    rc.max_iterations = c.at("max_iterations").get<int>();
    rc.gateway_mode = enum_field<GatewayMode>(c, "gateway_mode", parse_gateway_mode);
    rc.transcript_ref = c.at("transcript").get<std::string>();
    rc.catalog_ref = c.at("catalog").get<std::string>();
    rc.surface_ref = c.at("surface").get<std::string>();
    rc.scenario_ref = c.at("scenario").get<std::string>();
    for (const auto &r : doc.at("iterations")) {
      IterationRecord rec;
      rec.index = r.at("index").get<int>();
      rec.success = r.at("success").get<bool>();
      rec.refused = r.value("refused", false);
      for (const auto &tag : r.at("taxonomy_tags")) {
        auto leaf = parse_taxonomy_leaf(tag.get<std::string>());
        if (!leaf)
          throw ValidationError("report: unknown taxonomy tag " + tag.dump());
        rec.taxonomy_tags.insert(*leaf);
      }
      rec.description = r.at("description").get<std::string>();
      const auto &s = r.at("score");
      rec.score.base = s.at("base").get<double>();
      rec.score.exec_error_count = s.at("exec_error_count").get<std::size_t>();
      rec.score.signal_misuse_count = s.at("signal_misuse_count").get<std::size_t>();
      rec.score.score = s.at("score").get<double>();
      rec.code_digest = r.at("code_digest").get<std::string>();
      if (!r.at("functional_verdict").is_null())
        rec.functional_verdict =
            enum_field<FunctionalVerdict>(r, "functional_verdict", parse_functional_verdict);
      for (const auto &d : r.at("diagnostics"))
        rec.diagnostics.push_back(diagnostic_from_json(d));
      report.iterations.push_back(std::move(rec));
    }
    report.outcome = enum_field<ExperimentOutcome>(doc, "outcome", parse_experiment_outcome);
    return report;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
}

std::string render_report(const ExperimentReport &report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
  case ReportFormat::Json:
    out << report_to_json(report).dump(2) << "\n";
    break;
  case ReportFormat::Markdown:
    out << "| It | Suc. | Taxonomy | Description | Score |\n"
        << "|---:|:----:|----------|-------------|------:|\n";
    for (const auto &rec : report.iterations)
      out << "| " << rec.index << " | " << (rec.success ? "✓" : "×") << " | "
          << markdown_cell(taxonomy_text(rec, ", ")) << " | " << markdown_cell(rec.description)
          << " | " << score_text(rec.score) << " |\n";
    break;
  case ReportFormat::Csv:
    out << "It,Suc.,Taxonomy,Description,Score\n";
    for (const auto &rec : report.iterations)
      out << rec.index << "," << (rec.success ? "true" : "false") << ","
          << csv_cell(taxonomy_text(rec, ";")) << "," << csv_cell(rec.description) << ","
          << score_text(rec.score) << "\n";
    break;
  }
  return out.str();
}

} // namespace halbench
