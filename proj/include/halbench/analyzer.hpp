#pragma once

#include "halbench/catalog.hpp"
#include "halbench/surface.hpp"
#include "halbench/taxonomy.hpp"

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace halbench {

/// One use of a vehicle signal path in guest code.
struct SignalRef {
  std::string path;
  SourceLocation location;

  bool operator==(const SignalRef &) const = default;
};

/// A signal the task requires, with the role it plays (e.g. "trigger").
struct ExpectedSignal {
  std::string role;
  std::string path;

  bool operator==(const ExpectedSignal &) const = default;
};

struct TaskSignalSpec {
  std::vector<ExpectedSignal> signals;

  bool operator==(const TaskSignalSpec &) const = default;
};

/// Empty iff the source parses. End of input inside an open block, bracket or
/// string is reported as IncompleteCode, anything else as SyntaxViolation.
std::vector<Diagnostic> parse_check(std::string_view source);

/// Unknown imports, unbound names, unknown attributes on surface-known types
/// and arity mismatches on surface callables. Throws UsageError when the
/// source does not parse.
std::vector<Diagnostic> resolve_references(std::string_view source,
                                           const SdkSurface &surface);

/// Signal paths used by the source with their first location, sorted by path.
/// Chains are rooted at signal-root bindings and normalized to `Vehicle`; a
/// trailing node member (get/set/subscribe...) is stripped.
std::vector<SignalRef> extract_signal_refs(std::string_view source,
                                           const SdkSurface &surface);
std::set<std::string> extract_signal_paths(std::string_view source,
                                           const SdkSurface &surface);

std::vector<Diagnostic> validate_signals(const std::vector<SignalRef> &refs,
                                         const Catalog &catalog,
                                         const TaskSignalSpec &expected);
std::vector<Diagnostic> validate_signals(const std::set<std::string> &paths,
                                         const Catalog &catalog,
                                         const TaskSignalSpec &expected);

/// App subclasses must override the surface's async entry points with
/// coroutines; a source without any app subclass has nothing to run.
std::vector<Diagnostic> check_async_entry(std::string_view source,
                                          const SdkSurface &surface);

/// The full static pipeline: parse_check, then (only when parsing succeeds)
/// references, signals and async entry points. `surface` should already carry
/// the signal model of `catalog`.
std::vector<Diagnostic> analyze_source(std::string_view source,
                                       const SdkSurface &surface,
                                       const Catalog &catalog,
                                       const TaskSignalSpec &expected);

/// Orders diagnostics by stage, keeping the relative order within a stage.
void sort_by_stage(std::vector<Diagnostic> &diagnostics);

} // namespace halbench
