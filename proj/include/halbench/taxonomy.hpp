#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace halbench {

enum class TaxonomyCategory {
  Syntactic,
  RuntimeExecution,
  FunctionalCorrectness,
  CodeQuality,
};

enum class TaxonomyLeaf {
  SyntaxViolation,
  IncompleteCode,
  APIKnowledgeConflict,
  InvalidReferenceError,
  IncorrectLogicalFlow,
  RequirementDeviation,
  ResourceMishandling,
  SecurityVulnerability,
  CodeSmell,
};

inline constexpr TaxonomyLeaf kAllLeaves[] = {
    TaxonomyLeaf::SyntaxViolation,       TaxonomyLeaf::IncompleteCode,
    TaxonomyLeaf::APIKnowledgeConflict,  TaxonomyLeaf::InvalidReferenceError,
    TaxonomyLeaf::IncorrectLogicalFlow,  TaxonomyLeaf::RequirementDeviation,
    TaxonomyLeaf::ResourceMishandling,   TaxonomyLeaf::SecurityVulnerability,
    TaxonomyLeaf::CodeSmell,
};

enum class PenaltyClass { ExecError, SignalMisuse, None };

/// Pipeline stage that produced a diagnostic; also the description order.
enum class SourceStage { Parse, Resolve, Signal, Structure, Runtime, Functional };

struct SourceLocation {
  std::size_t line = 0;
  std::size_t column = 0;

  bool operator==(const SourceLocation &) const = default;
};

struct Diagnostic {
  TaxonomyLeaf taxonomy_leaf = TaxonomyLeaf::SyntaxViolation;
  PenaltyClass penalty_class = PenaltyClass::None;
  std::string description;
  std::optional<SourceLocation> location;
  SourceStage source_stage = SourceStage::Parse;
  /// Nearby catalog paths for signal diagnostics.
  std::vector<std::string> suggestions;

  bool operator==(const Diagnostic &) const = default;
};

/// Checks the stage/leaf/penalty consistency rules; throws ValidationError.
void check_diagnostic(const Diagnostic &diagnostic);

std::string_view to_string(TaxonomyCategory category);
std::string_view to_string(TaxonomyLeaf leaf);
std::string_view to_string(PenaltyClass penalty);
std::string_view to_string(SourceStage stage);

/// Short report tag, e.g. "SV" or "API KConflict".
std::string_view abbreviation(TaxonomyLeaf leaf);

std::optional<TaxonomyLeaf> parse_taxonomy_leaf(std::string_view text);
std::optional<PenaltyClass> parse_penalty_class(std::string_view text);
std::optional<SourceStage> parse_source_stage(std::string_view text);

TaxonomyCategory parent_category(TaxonomyLeaf leaf);
std::pair<TaxonomyLeaf, TaxonomyCategory> classify(const Diagnostic &diagnostic);

struct ScoreBreakdown {
  double base = 1.0;
  std::size_t exec_error_count = 0;
  std::size_t signal_misuse_count = 0;
  double score = 1.0;

  /// Score in tenths, 0..10.
  int tenths() const;

  bool operator==(const ScoreBreakdown &) const = default;
};

/// 1.0 minus 0.2 per distinct execution error and 0.1 per distinct signal
/// misuse, clamped at 0. Distinctness is by (leaf, description).
ScoreBreakdown score_iteration(const std::vector<Diagnostic> &diagnostics);

enum class FunctionalVerdict { Pass, Fail, Timeout };

std::string_view to_string(FunctionalVerdict verdict);
std::optional<FunctionalVerdict> parse_functional_verdict(std::string_view text);

bool success(const std::vector<Diagnostic> &diagnostics,
             FunctionalVerdict functional_verdict);

} // namespace halbench
