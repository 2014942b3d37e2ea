#include "halbench/taxonomy.hpp"

#include "halbench/errors.hpp"

#include <algorithm>
#include <set>

namespace halbench {

std::string_view to_string(TaxonomyCategory category) {
  switch (category) {
  case TaxonomyCategory::Syntactic:
    return "Syntactic";
  case TaxonomyCategory::RuntimeExecution:
    return "Runtime Execution";
  case TaxonomyCategory::FunctionalCorrectness:
    return "Functional Correctness";
  case TaxonomyCategory::CodeQuality:
    return "Code Quality";
  }
  return "Syntactic";
}

std::string_view to_string(TaxonomyLeaf leaf) {
  switch (leaf) {
  case TaxonomyLeaf::SyntaxViolation:
    return "SyntaxViolation";
  case TaxonomyLeaf::IncompleteCode:
    return "IncompleteCode";
  case TaxonomyLeaf::APIKnowledgeConflict:
    return "APIKnowledgeConflict";
  case TaxonomyLeaf::InvalidReferenceError:
    return "InvalidReferenceError";
  case TaxonomyLeaf::IncorrectLogicalFlow:
    return "IncorrectLogicalFlow";
  case TaxonomyLeaf::RequirementDeviation:
    return "RequirementDeviation";
  case TaxonomyLeaf::ResourceMishandling:
    return "ResourceMishandling";
  case TaxonomyLeaf::SecurityVulnerability:
    return "SecurityVulnerability";
  case TaxonomyLeaf::CodeSmell:
    return "CodeSmell";
  }
  return "SyntaxViolation";
}

std::string_view abbreviation(TaxonomyLeaf leaf) {
  switch (leaf) {
  case TaxonomyLeaf::SyntaxViolation:
    return "SV";
  case TaxonomyLeaf::IncompleteCode:
    return "IC";
  case TaxonomyLeaf::APIKnowledgeConflict:
    return "API KConflict";
  case TaxonomyLeaf::InvalidReferenceError:
    return "IRE";
  case TaxonomyLeaf::IncorrectLogicalFlow:
    return "ILF";
  case TaxonomyLeaf::RequirementDeviation:
    return "RD";
  case TaxonomyLeaf::ResourceMishandling:
    return "RM";
  case TaxonomyLeaf::SecurityVulnerability:
    return "SecV";
  case TaxonomyLeaf::CodeSmell:
    return "CS";
  }
  return "SV";
}

std::string_view to_string(PenaltyClass penalty) {
  switch (penalty) {
  case PenaltyClass::ExecError:
    return "exec_error";
  case PenaltyClass::SignalMisuse:
    return "signal_misuse";
  case PenaltyClass::None:
    return "none";
  }
  return "none";
}

std::string_view to_string(SourceStage stage) {
  switch (stage) {
  case SourceStage::Parse:
    return "parse";
  case SourceStage::Resolve:
    return "resolve";
  case SourceStage::Signal:
    return "signal";
  case SourceStage::Structure:
    return "structure";
  case SourceStage::Runtime:
    return "runtime";
  case SourceStage::Functional:
    return "functional";
  }
  return "parse";
}

std::string_view to_string(FunctionalVerdict verdict) {
  switch (verdict) {
  case FunctionalVerdict::Pass:
    return "pass";
  case FunctionalVerdict::Fail:
    return "fail";
  case FunctionalVerdict::Timeout:
    return "timeout";
  }
  return "fail";
}

std::optional<TaxonomyLeaf> parse_taxonomy_leaf(std::string_view text) {
  for (auto leaf : kAllLeaves)
    if (to_string(leaf) == text)
      return leaf;
  return std::nullopt;
}

std::optional<PenaltyClass> parse_penalty_class(std::string_view text) {
  for (auto penalty :
       {PenaltyClass::ExecError, PenaltyClass::SignalMisuse, PenaltyClass::None})
    if (to_string(penalty) == text)
      return penalty;
  return std::nullopt;
}

std::optional<SourceStage> parse_source_stage(std::string_view text) {
  for (auto stage : {SourceStage::Parse, SourceStage::Resolve,
                     SourceStage::Signal, SourceStage::Structure,
                     SourceStage::Runtime, SourceStage::Functional})
    if (to_string(stage) == text)
      return stage;
  return std::nullopt;
}

std::optional<FunctionalVerdict> parse_functional_verdict(std::string_view text) {
  for (auto verdict : {FunctionalVerdict::Pass, FunctionalVerdict::Fail,
                       FunctionalVerdict::Timeout})
    if (to_string(verdict) == text)
      return verdict;
  return std::nullopt;
}

TaxonomyCategory parent_category(TaxonomyLeaf leaf) {
  switch (leaf) {
  case TaxonomyLeaf::SyntaxViolation:
  case TaxonomyLeaf::IncompleteCode:
    return TaxonomyCategory::Syntactic;
  case TaxonomyLeaf::APIKnowledgeConflict:
  case TaxonomyLeaf::InvalidReferenceError:
    return TaxonomyCategory::RuntimeExecution;
  case TaxonomyLeaf::IncorrectLogicalFlow:
  case TaxonomyLeaf::RequirementDeviation:
    return TaxonomyCategory::FunctionalCorrectness;
  case TaxonomyLeaf::ResourceMishandling:
  case TaxonomyLeaf::SecurityVulnerability:
  case TaxonomyLeaf::CodeSmell:
    return TaxonomyCategory::CodeQuality;
  }
  return TaxonomyCategory::Syntactic;
}

void check_diagnostic(const Diagnostic &diagnostic) {
  if (diagnostic.taxonomy_leaf == TaxonomyLeaf::SyntaxViolation &&
      diagnostic.source_stage != SourceStage::Parse)
    throw ValidationError("SyntaxViolation outside the parse stage");
  if (diagnostic.penalty_class == PenaltyClass::SignalMisuse &&
      diagnostic.source_stage != SourceStage::Signal &&
      diagnostic.source_stage != SourceStage::Runtime &&
      diagnostic.source_stage != SourceStage::Functional)
    throw ValidationError("signal_misuse from stage " +
                          std::string(to_string(diagnostic.source_stage)));
}

std::pair<TaxonomyLeaf, TaxonomyCategory> classify(const Diagnostic &diagnostic) {
  return {diagnostic.taxonomy_leaf, parent_category(diagnostic.taxonomy_leaf)};
}

int ScoreBreakdown::tenths() const {
  int raw = 10 - 2 * static_cast<int>(std::min<std::size_t>(exec_error_count, 5)) -
            static_cast<int>(std::min<std::size_t>(signal_misuse_count, 10));
  return std::max(0, raw);
}

ScoreBreakdown score_iteration(const std::vector<Diagnostic> &diagnostics) {
  std::set<std::pair<TaxonomyLeaf, std::string>> exec_errors;
  std::set<std::pair<TaxonomyLeaf, std::string>> misuses;
  for (const auto &d : diagnostics) {
    if (d.penalty_class == PenaltyClass::ExecError)
      exec_errors.emplace(d.taxonomy_leaf, d.description);
    else if (d.penalty_class == PenaltyClass::SignalMisuse)
      misuses.emplace(d.taxonomy_leaf, d.description);
  }
  ScoreBreakdown breakdown;
  breakdown.exec_error_count = exec_errors.size();
  breakdown.signal_misuse_count = misuses.size();
  breakdown.score = breakdown.tenths() / 10.0;
  return breakdown;
}

bool success(const std::vector<Diagnostic> &diagnostics,
             FunctionalVerdict functional_verdict) {
  return diagnostics.empty() && functional_verdict == FunctionalVerdict::Pass;
}

} // namespace halbench
