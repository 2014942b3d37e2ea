#pragma once

#include "halbench/taxonomy.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace halbench {

enum class PromptStrategy { Baseline, SignalAugmented, TemplateAugmented };
enum class RepairMode { Simple, Detailed };

std::string_view to_string(PromptStrategy strategy);
std::string_view to_string(RepairMode mode);
std::optional<PromptStrategy> parse_prompt_strategy(std::string_view text);
std::optional<RepairMode> parse_repair_mode(std::string_view text);

/// Fixed wording around the variable parts of a prompt.
struct PromptLabels {
  std::string signal_header = "Available VSS signals:";
  std::string template_header = "Code skeleton:";
  std::string simple_feedback =
      "The code above has quality issues. Fix them and return the complete "
      "corrected program.";
  std::string detailed_header = "The code has the following issues:";
  std::string previous_code_header = "Previous code:";
  std::string detailed_request =
      "Fix all listed issues and return the complete corrected program.";

  bool operator==(const PromptLabels &) const = default;
};

struct PromptSpec {
  PromptStrategy strategy = PromptStrategy::Baseline;
  std::string task_text;
  std::vector<std::string> signal_list;
  std::optional<std::string> code_template;
  std::string rendered;
};

struct RepairPrompt {
  RepairMode mode = RepairMode::Detailed;
  std::string previous_code;
  std::string diagnostics_rendered;
  std::string rendered;
};

/// Throws UsageError when the inputs break the strategy's shape: baseline
/// takes neither signals nor template, the augmented strategies need a
/// signal list, and only template_augmented takes (and needs) a template.
PromptSpec build_initial(PromptStrategy strategy, const std::string &task_text,
                         const std::vector<std::string> &signal_list,
                         const std::optional<std::string> &code_template,
                         const PromptLabels &labels = {});

/// One line per diagnostic: `[<category>/<leaf>] <description> (line N)`.
std::string render_diagnostics(const std::vector<Diagnostic> &diagnostics);

/// Detailed mode without diagnostics or without previous code is a usage
/// error. `task_text`, when given, is restated ahead of the feedback.
RepairPrompt build_repair(RepairMode mode, const std::string &previous_code,
                          const std::vector<Diagnostic> &diagnostics,
                          const std::optional<std::string> &task_text = std::nullopt,
                          const PromptLabels &labels = {});

/// Wraps source in a triple-backtick fence tagged `python`.
std::string fence_code(std::string_view source);

} // namespace halbench
