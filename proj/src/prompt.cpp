#include "halbench/prompt.hpp"

#include "halbench/errors.hpp"

#include <sstream>

namespace halbench {

std::string_view to_string(PromptStrategy strategy) {
  switch (strategy) {
  case PromptStrategy::Baseline:
    return "baseline";
  case PromptStrategy::SignalAugmented:
    return "signal_augmented";
  case PromptStrategy::TemplateAugmented:
    return "template_augmented";
  }
  return "baseline";
}

std::string_view to_string(RepairMode mode) {
  return mode == RepairMode::Simple ? "simple" : "detailed";
}

std::optional<PromptStrategy> parse_prompt_strategy(std::string_view text) {
  for (auto s : {PromptStrategy::Baseline, PromptStrategy::SignalAugmented,
                 PromptStrategy::TemplateAugmented})
    if (to_string(s) == text)
      return s;
  return std::nullopt;
}

std::optional<RepairMode> parse_repair_mode(std::string_view text) {
  if (text == "simple")
    return RepairMode::Simple;
  if (text == "detailed")
    return RepairMode::Detailed;
  return std::nullopt;
}

std::string fence_code(std::string_view source) {
  std::string out = "```python\n";
  out += source;
  if (!source.empty() && source.back() != '\n')
    out += '\n';
  out += "```";
  return out;
}

PromptSpec build_initial(PromptStrategy strategy, const std::string &task_text,
                         const std::vector<std::string> &signal_list,
                         const std::optional<std::string> &code_template,
                         const PromptLabels &labels) {
  if (task_text.empty())
    throw UsageError("prompt: task text is empty");
  switch (strategy) {
  case PromptStrategy::Baseline:
    if (!signal_list.empty() || code_template)
      throw UsageError("prompt: baseline takes neither a signal list nor a template");
    break;
  case PromptStrategy::SignalAugmented:
    if (signal_list.empty())
      throw UsageError("prompt: signal_augmented needs a signal list");
    if (code_template)
      throw UsageError("prompt: signal_augmented takes no template");
    break;
  case PromptStrategy::TemplateAugmented:
    if (signal_list.empty())
      throw UsageError("prompt: template_augmented needs a signal list");
    if (!code_template)
      throw UsageError("prompt: template_augmented needs a template");
    break;
  }

  PromptSpec spec;
  spec.strategy = strategy;
  spec.task_text = task_text;
  spec.signal_list = signal_list;
  spec.code_template = code_template;
  spec.rendered = task_text;
  if (!signal_list.empty()) {
    spec.rendered += "\n\n" + labels.signal_header;
    for (const auto &path : signal_list)
      spec.rendered += "\n" + path;
  }
  if (code_template)
    spec.rendered += "\n\n" + labels.template_header + "\n" + fence_code(*code_template);
  return spec;
}

std::string render_diagnostics(const std::vector<Diagnostic> &diagnostics) {
  std::ostringstream out;
  for (std::size_t i = 0; i < diagnostics.size(); ++i) {
    const auto &d = diagnostics[i];
    if (i)
      out << "\n";
    out << "[" << to_string(parent_category(d.taxonomy_leaf)) << "/"
        << to_string(d.taxonomy_leaf) << "] " << d.description;
    if (d.location && d.location->line > 0)
      out << " (line " << d.location->line << ")";
  }
  return out.str();
}

RepairPrompt build_repair(RepairMode mode, const std::string &previous_code,
                          const std::vector<Diagnostic> &diagnostics,
                          const std::optional<std::string> &task_text,
                          const PromptLabels &labels) {
  RepairPrompt prompt;
  prompt.mode = mode;
  prompt.previous_code = previous_code;
  std::string head = task_text ? *task_text + "\n\n" : std::string();
  std::string code_block = previous_code.empty()
                               ? std::string()
                               : labels.previous_code_header + "\n" +
                                     fence_code(previous_code) + "\n\n";
  if (mode == RepairMode::Simple) {
    prompt.rendered = head + code_block + labels.simple_feedback;
    return prompt;
  }
  if (diagnostics.empty())
    throw UsageError("repair requested with no diagnostics");
  if (previous_code.empty())
    throw UsageError("detailed repair needs the previous code");
  prompt.diagnostics_rendered = render_diagnostics(diagnostics);
  prompt.rendered = head + labels.detailed_header + "\n" + prompt.diagnostics_rendered +
                    "\n\n" + code_block + labels.detailed_request;
  return prompt;
}

} // namespace halbench
