#include "halbench/analyzer.hpp"

#include "halbench/errors.hpp"
#include "semantic_model.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace halbench {

using namespace guest;
using detail::ClassInfo;
using detail::Fact;
using detail::Scope;
using detail::SemanticModel;

namespace {

const std::set<std::string> &builtins() {
  static const std::set<std::string> names = {
      "abs", "aiter", "all", "anext", "any", "ascii", "bin", "bool",
      "breakpoint", "bytearray", "bytes", "callable", "chr", "classmethod",
      "compile", "complex", "delattr", "dict", "dir", "divmod", "enumerate",
      "eval", "exec", "filter", "float", "format", "frozenset", "getattr",
      "globals", "hasattr", "hash", "help", "hex", "id", "input", "int",
      "isinstance", "issubclass", "iter", "len", "list", "locals", "map",
      "max", "memoryview", "min", "next", "object", "oct", "open", "ord",
      "pow", "print", "property", "range", "repr", "reversed", "round", "set",
      "setattr", "slice", "sorted", "staticmethod", "str", "sum", "super",
      "tuple", "type", "vars", "zip", "__import__", "__name__", "__file__",
      "__doc__", "__spec__", "__package__", "__builtins__", "__debug__",
      "NotImplemented", "Ellipsis", "BaseException", "Exception",
      "ArithmeticError", "AssertionError", "AttributeError", "EOFError",
      "FloatingPointError", "GeneratorExit", "ImportError",
      "ModuleNotFoundError", "IndexError", "KeyError", "KeyboardInterrupt",
      "LookupError", "MemoryError", "NameError", "NotImplementedError",
      "OSError", "IOError", "EnvironmentError", "OverflowError",
      "RecursionError", "ReferenceError", "RuntimeError", "StopIteration",
      "StopAsyncIteration", "SyntaxError", "IndentationError", "TabError",
      "SystemError", "SystemExit", "TypeError", "UnboundLocalError",
      "UnicodeError", "UnicodeDecodeError", "UnicodeEncodeError",
      "ValueError", "ZeroDivisionError", "ConnectionError",
      "BrokenPipeError", "ConnectionAbortedError", "ConnectionRefusedError",
      "ConnectionResetError", "FileExistsError", "FileNotFoundError",
      "InterruptedError", "IsADirectoryError", "NotADirectoryError",
      "PermissionError", "ProcessLookupError", "TimeoutError", "Warning",
      "UserWarning", "DeprecationWarning", "RuntimeWarning",
  };
  return names;
}

bool is_dunder(const std::string &name) {
  return name.size() > 4 && name.rfind("__", 0) == 0 &&
         name.compare(name.size() - 2, 2, "__") == 0;
}

SourceLocation location_of(const Position &pos) {
  return SourceLocation{pos.line, pos.column};
}

guest::Module parse_or_throw(std::string_view source) {
  auto result = guest::parse(source);
  if (!result.module)
    throw UsageError("source does not parse: " + result.failure->message);
  return std::move(*result.module);
}

// Walks the tree with the same scoping as the model's collector.
class Walker {
public:
  explicit Walker(SemanticModel &model) : model_(model) {}
  virtual ~Walker() = default;

  void run(const guest::Module &module) {
    suite(module.body, model_.module_scope());
  }

protected:
  virtual void on_load_name(const Expr &, const Scope *) {}
  virtual void on_load_attribute(const Expr &, const Scope *) {}
  virtual void on_call(const Expr &, const Scope *) {}
  virtual void on_import(const Stmt &) {}

  SemanticModel &model_;

  void suite(const Suite &body, const Scope *scope) {
    for (const auto &s : body)
      stmt(*s, scope);
  }

  void params(const std::vector<Param> &ps, const Scope *scope) {
    for (const auto &p : ps) {
      if (p.annotation)
        expr(*p.annotation, scope);
      if (p.default_value)
        expr(*p.default_value, scope);
    }
  }

  void target(const Expr &t, const Scope *scope) {
    switch (t.kind) {
    case ExprKind::Name:
      break;
    case ExprKind::Attribute:
      expr(*t.kids[0], scope);
      break;
    case ExprKind::Starred:
    case ExprKind::Tuple:
    case ExprKind::List:
      for (const auto &kid : t.kids)
        target(*kid, scope);
      break;
    default:
      expr(t, scope);
    }
  }

  void stmt(const Stmt &s, const Scope *scope) {
    switch (s.kind) {
    case StmtKind::FunctionDef:
      for (const auto &d : s.decorators)
        expr(*d, scope);
      params(s.params, scope);
      if (s.returns)
        expr(*s.returns, scope);
      suite(s.body, model_.scope_of(&s));
      break;
    case StmtKind::ClassDef:
      for (const auto &d : s.decorators)
        expr(*d, scope);
      for (const auto &b : s.bases)
        expr(*b, scope);
      suite(s.body, model_.scope_of(&s));
      break;
    case StmtKind::Assign:
      expr(*s.value, scope);
      for (const auto &t : s.targets)
        target(*t, scope);
      break;
    case StmtKind::AugAssign:
      expr(*s.value, scope);
      expr(*s.targets[0], scope);
      break;
    case StmtKind::AnnAssign:
      expr(*s.annotation, scope);
      if (s.value)
        expr(*s.value, scope);
      target(*s.targets[0], scope);
      break;
    case StmtKind::For:
      expr(*s.value, scope);
      target(*s.targets[0], scope);
      suite(s.body, scope);
      suite(s.orelse, scope);
      break;
    case StmtKind::With:
      for (const auto &item : s.items) {
        expr(*item.context, scope);
        if (item.target)
          target(*item.target, scope);
      }
      suite(s.body, scope);
      break;
    case StmtKind::Try:
      suite(s.body, scope);
      for (const auto &h : s.handlers) {
        if (h.type)
          expr(*h.type, scope);
        suite(h.body, scope);
      }
      suite(s.orelse, scope);
      suite(s.finalbody, scope);
      break;
    case StmtKind::If:
    case StmtKind::While:
      expr(*s.value, scope);
      suite(s.body, scope);
      suite(s.orelse, scope);
      break;
    case StmtKind::Import:
    case StmtKind::ImportFrom:
      on_import(s);
      break;
    case StmtKind::Del:
      for (const auto &t : s.targets)
        expr(*t, scope);
      break;
    case StmtKind::Expr:
    case StmtKind::Return:
    case StmtKind::Raise:
    case StmtKind::Assert:
      if (s.value)
        expr(*s.value, scope);
      if (s.extra)
        expr(*s.extra, scope);
      break;
    default:
      break;
    }
  }

  void expr(const Expr &e, const Scope *scope) {
    switch (e.kind) {
    case ExprKind::Name:
      on_load_name(e, scope);
      return;
    case ExprKind::Attribute:
      on_load_attribute(e, scope);
      expr(*e.kids[0], scope);
      return;
    case ExprKind::Lambda:
      params(e.params, scope);
      expr(*e.kids[0], model_.scope_of(&e));
      return;
    case ExprKind::Comprehension: {
      const Scope *inner = model_.scope_of(&e);
      for (std::size_t k = 0; k < e.clauses.size(); ++k) {
        const auto &clause = e.clauses[k];
        expr(*clause.iter, k == 0 ? scope : inner);
        target(*clause.target, inner);
        for (const auto &c : clause.conditions)
          expr(*c, inner);
      }
      for (const auto &kid : e.kids)
        expr(*kid, inner);
      return;
    }
    case ExprKind::NamedExpr:
      expr(*e.kids[1], scope);
      return;
    case ExprKind::Keyword:
      expr(*e.kids[0], scope);
      return;
    case ExprKind::Call:
      on_call(e, scope);
      break;
    default:
      break;
    }
    for (const auto &kid : e.kids)
      if (kid)
        expr(*kid, scope);
  }
};

class ReferenceChecker : public Walker {
public:
  using Walker::Walker;

  std::vector<Diagnostic> take() { return std::move(out_); }

private:
  const SdkSurface &surface() const { return model_.surface(); }

  void report(TaxonomyLeaf leaf, std::string description, const Position &pos) {
    if (!seen_.insert(description).second)
      return;
    Diagnostic d;
    d.taxonomy_leaf = leaf;
    d.penalty_class = PenaltyClass::ExecError;
    d.description = std::move(description);
    d.location = location_of(pos);
    d.source_stage = SourceStage::Resolve;
    out_.push_back(std::move(d));
  }

  void on_import(const Stmt &s) override {
    if (s.kind == StmtKind::Import) {
      for (const auto &alias : s.aliases)
        if (surface().check_import(alias.name, std::nullopt) !=
            ImportVerdict::Known)
          report(TaxonomyLeaf::APIKnowledgeConflict,
                 "No module named '" + alias.name + "'", alias.pos);
      return;
    }
    if (s.import_level > 0 || s.name == "__future__")
      return;
    if (!surface().is_known_module(s.name)) {
      report(TaxonomyLeaf::APIKnowledgeConflict,
             "No module named '" + s.name + "'", s.pos);
      return;
    }
    for (const auto &alias : s.aliases) {
      if (alias.name == "*")
        continue;
      if (surface().check_import(s.name, alias.name) != ImportVerdict::Known)
        report(TaxonomyLeaf::APIKnowledgeConflict,
               "cannot import name '" + alias.name + "' from '" + s.name + "'",
               alias.pos);
    }
  }

  void on_load_name(const Expr &e, const Scope *scope) override {
    if (model_.lookup(e.text, scope) || builtins().count(e.text) ||
        model_.star_imported(scope))
      return;
    report(TaxonomyLeaf::InvalidReferenceError,
           "name '" + e.text + "' is not defined", e.pos);
  }

  void on_load_attribute(const Expr &e, const Scope *scope) override {
    const std::string &attr = e.text;
    if (is_dunder(attr))
      return;
    Fact base = model_.type_of(*e.kids[0], scope);
    switch (base.kind) {
    case Fact::Kind::Module: {
      const auto *mod = surface().module(base.name);
      if (!mod || mod->opaque || mod->exports.count(attr) ||
          surface().is_known_module(base.name + "." + attr))
        return;
      report(TaxonomyLeaf::APIKnowledgeConflict,
             "module '" + base.name + "' has no attribute '" + attr + "'", e.pos);
      return;
    }
    case Fact::Kind::SurfaceClass:
      if (model_.is_root(base) || surface().has_attribute(base.name, attr))
        return;
      report(TaxonomyLeaf::APIKnowledgeConflict,
             "type object '" + base.name + "' has no attribute '" + attr + "'",
             e.pos);
      return;
    case Fact::Kind::SurfaceInstance:
      if (surface().has_attribute(base.name, attr))
        return;
      report(TaxonomyLeaf::APIKnowledgeConflict,
             "'" + base.name + "' object has no attribute '" + attr + "'", e.pos);
      return;
    case Fact::Kind::UserClass:
    case Fact::Kind::UserInstance:
      if (!model_.checkable(*base.cls) ||
          model_.user_has_attribute(*base.cls, attr))
        return;
      report(TaxonomyLeaf::InvalidReferenceError,
             (base.kind == Fact::Kind::UserClass ? "type object '" : "'") +
                 base.name +
                 (base.kind == Fact::Kind::UserClass ? "' has" : "' object has") +
                 " no attribute '" + attr + "'",
             e.pos);
      return;
    default:
      return;
    }
  }

  void check_arity(const Callable &callable, const std::string &label,
                   int supplied, const Position &pos) {
    if (callable.accepts(supplied))
      return;
    std::ostringstream msg;
    if (supplied < callable.min_args)
      msg << label << "() missing argument: expected at least "
          << callable.min_args << ", got " << supplied;
    else
      msg << label << "() takes " << callable.max_args
          << " positional argument" << (callable.max_args == 1 ? "" : "s")
          << " but " << supplied << (supplied == 1 ? " was" : " were")
          << " given";
    report(TaxonomyLeaf::APIKnowledgeConflict, msg.str(), pos);
  }

  void on_call(const Expr &e, const Scope *scope) override {
    int supplied = 0;
    for (std::size_t k = 1; k < e.kids.size(); ++k) {
      auto kind = e.kids[k]->kind;
      if (kind == ExprKind::Starred || kind == ExprKind::DoubleStarred)
        return;
      ++supplied;
    }
    Fact callee = model_.type_of(*e.kids[0], scope);
    switch (callee.kind) {
    case Fact::Kind::SurfaceClass: {
      const auto *cls = surface().find_class(callee.name);
      for (const auto *c : surface().lineage(callee.name))
        if (c->init) {
          check_arity(*c->init, cls->name + ".__init__", supplied, e.pos);
          break;
        }
      return;
    }
    case Fact::Kind::SurfaceFunction: {
      const auto *mod = surface().module(callee.name);
      const auto &exp = mod->exports.at(callee.member);
      if (exp.function)
        check_arity(*exp.function, callee.member, supplied, e.pos);
      return;
    }
    case Fact::Kind::SurfaceMethod: {
      const auto *method = surface().find_method(callee.name, callee.member);
      if (!method)
        return;
      if (!callee.bound) {
        if (supplied == 0)
          return;
        --supplied;
      }
      check_arity(*method, callee.name + "." + callee.member, supplied, e.pos);
      return;
    }
    case Fact::Kind::NodeMember:
      if (const auto *member = surface().node_member(callee.name))
        check_arity(*member, callee.name, supplied, e.pos);
      return;
    default:
      return;
    }
  }

  std::vector<Diagnostic> out_;
  std::set<std::string> seen_;
};

class SignalExtractor : public Walker {
public:
  using Walker::Walker;

  std::vector<SignalRef> take() {
    std::vector<SignalRef> out;
    for (auto &[path, loc] : first_)
      out.push_back(SignalRef{path, loc});
    return out;
  }

private:
  void on_load_attribute(const Expr &e, const Scope *scope) override {
    if (inner_.count(&e))
      return;
    std::vector<const Expr *> chain;
    const Expr *cur = &e;
    while (cur->kind == ExprKind::Attribute) {
      chain.push_back(cur);
      inner_.insert(cur->kids[0].get());
      cur = cur->kids[0].get();
    }
    chain.push_back(cur);
    std::reverse(chain.begin(), chain.end());
    // chain[0] is the innermost base; chain[k] is the attribute access k.
    std::size_t root = chain.size();
    for (std::size_t k = 0; k + 1 < chain.size(); ++k)
      if (model_.is_root(model_.type_of(*chain[k], scope))) {
        root = k;
        break;
      }
    if (root == chain.size())
      return;
    std::vector<std::string> segments;
    for (std::size_t k = root + 1; k < chain.size(); ++k)
      segments.push_back(chain[k]->text);
    if (segments.size() > 1 && model_.surface().node_member(segments.back()))
      segments.pop_back();
    std::string path = "Vehicle";
    for (const auto &s : segments)
      path += "." + s;
    first_.emplace(path, location_of(chain[root]->pos));
  }

  std::set<const Expr *> inner_;
  std::map<std::string, SourceLocation> first_;
};

std::string last_segment(const std::string &path) {
  auto dot = path.rfind('.');
  return dot == std::string::npos ? path : path.substr(dot + 1);
}

Diagnostic signal_diagnostic(TaxonomyLeaf leaf, std::string description,
                             std::optional<SourceLocation> location) {
  Diagnostic d;
  d.taxonomy_leaf = leaf;
  d.penalty_class = PenaltyClass::SignalMisuse;
  d.description = std::move(description);
  d.location = location;
  d.source_stage = SourceStage::Signal;
  return d;
}

} // namespace

std::vector<Diagnostic> parse_check(std::string_view source) {
  auto result = guest::parse(source);
  if (result.module)
    return {};
  const auto &failure = *result.failure;
  Diagnostic d;
  d.taxonomy_leaf = failure.incomplete ? TaxonomyLeaf::IncompleteCode
                                       : TaxonomyLeaf::SyntaxViolation;
  d.penalty_class = PenaltyClass::ExecError;
  d.description = failure.message;
  d.location = location_of(failure.pos);
  d.source_stage = SourceStage::Parse;
  return {std::move(d)};
}

std::vector<Diagnostic> resolve_references(std::string_view source,
                                           const SdkSurface &surface) {
  auto module = parse_or_throw(source);
  SemanticModel model(module, surface);
  ReferenceChecker checker(model);
  checker.run(module);
  return checker.take();
}

std::vector<SignalRef> extract_signal_refs(std::string_view source,
                                           const SdkSurface &surface) {
  auto module = parse_or_throw(source);
  SemanticModel model(module, surface);
  SignalExtractor extractor(model);
  extractor.run(module);
  return extractor.take();
}

std::set<std::string> extract_signal_paths(std::string_view source,
                                           const SdkSurface &surface) {
  std::set<std::string> out;
  for (auto &ref : extract_signal_refs(source, surface))
    out.insert(std::move(ref.path));
  return out;
}

std::vector<Diagnostic> validate_signals(const std::vector<SignalRef> &refs,
                                         const Catalog &catalog,
                                         const TaskSignalSpec &expected) {
  std::vector<Diagnostic> out;
  std::set<std::string> used;
  for (const auto &ref : refs)
    used.insert(ref.path);
  auto location = [&](const std::string &path) -> std::optional<SourceLocation> {
    for (const auto &ref : refs)
      if (ref.path == path && ref.location.line > 0)
        return ref.location;
    return std::nullopt;
  };

  for (const auto &path : used) {
    if (catalog.resolve(path))
      continue;
    auto segments = split_path(path);
    std::string owner = segments.size() > 1 ? segments[segments.size() - 2] : "Vehicle";
    auto d = signal_diagnostic(TaxonomyLeaf::APIKnowledgeConflict,
                               "'" + owner + "' object has no attribute '" +
                                   last_segment(path) + "'",
                               location(path));
    for (const auto &near : catalog.nearest(path, std::min<std::size_t>(3, catalog.size())))
      d.suggestions.push_back(near.path);
    out.push_back(std::move(d));
  }

  std::set<std::string> expected_paths;
  for (const auto &sig : expected.signals)
    expected_paths.insert(sig.path);
  std::set<std::string> claimed;
  for (const auto &sig : expected.signals) {
    if (used.count(sig.path))
      continue;
    std::optional<std::string> best;
    double best_distance = 0.5;
    for (const auto &path : used) {
      if (expected_paths.count(path) || claimed.count(path))
        continue;
      const auto *node = catalog.resolve(path);
      if (!node || node->kind == SignalKind::Branch)
        continue;
      double d = path_distance(path, sig.path);
      if (d <= best_distance && (!best || d < best_distance)) {
        best = path;
        best_distance = d;
      }
    }
    if (best) {
      claimed.insert(*best);
      out.push_back(signal_diagnostic(TaxonomyLeaf::APIKnowledgeConflict,
                                      "wrong signal: " + *best + " (expected " +
                                          sig.path + ")",
                                      location(*best)));
    } else {
      out.push_back(signal_diagnostic(TaxonomyLeaf::RequirementDeviation,
                                      "missing expected signal " + sig.path,
                                      std::nullopt));
    }
  }
  return out;
}

std::vector<Diagnostic> validate_signals(const std::set<std::string> &paths,
                                         const Catalog &catalog,
                                         const TaskSignalSpec &expected) {
  std::vector<SignalRef> refs;
  for (const auto &p : paths)
    refs.push_back(SignalRef{p, {}});
  return validate_signals(refs, catalog, expected);
}

std::vector<Diagnostic> check_async_entry(std::string_view source,
                                          const SdkSurface &surface) {
  auto module = parse_or_throw(source);
  SemanticModel model(module, surface);
  std::vector<Diagnostic> out;
  std::set<std::string> app_bases;
  for (const auto &[name, cls] : surface.classes())
    if (!cls.async_entries.empty())
      app_bases.insert(name);

  bool any_app = false;
  for (const auto &info : model.classes()) {
    auto ancestor = model.surface_ancestor(*info);
    if (!ancestor)
      continue;
    std::set<std::string> entries;
    for (const auto *c : surface.lineage(*ancestor))
      entries.insert(c->async_entries.begin(), c->async_entries.end());
    if (entries.empty())
      continue;
    any_app = true;
    for (const auto &entry : entries) {
      const Stmt *method = model.user_method(*info, entry);
      if (!method || method->is_async)
        continue;
      Diagnostic d;
      d.taxonomy_leaf = TaxonomyLeaf::APIKnowledgeConflict;
      d.penalty_class = PenaltyClass::ExecError;
      d.description = "No async routine: " + info->name + "." + entry +
                      " must be declared with async def";
      d.location = location_of(method->pos);
      d.source_stage = SourceStage::Structure;
      out.push_back(std::move(d));
    }
  }
  if (!any_app) {
    std::string bases;
    for (const auto &b : app_bases)
      bases += (bases.empty() ? "" : ", ") + b;
    Diagnostic d;
    d.taxonomy_leaf = TaxonomyLeaf::RequirementDeviation;
    d.penalty_class = PenaltyClass::ExecError;
    d.description = "no application class deriving from " +
                    (bases.empty() ? std::string("an app base") : bases);
    d.source_stage = SourceStage::Structure;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Diagnostic> analyze_source(std::string_view source,
                                       const SdkSurface &surface,
                                       const Catalog &catalog,
                                       const TaskSignalSpec &expected) {
  auto out = parse_check(source);
  if (!out.empty())
    return out;
  auto refs = resolve_references(source, surface);
  auto signals = validate_signals(extract_signal_refs(source, surface), catalog,
                                  expected);
  auto entries = check_async_entry(source, surface);
  out.insert(out.end(), refs.begin(), refs.end());
  out.insert(out.end(), signals.begin(), signals.end());
  out.insert(out.end(), entries.begin(), entries.end());
  sort_by_stage(out);
  return out;
}

void sort_by_stage(std::vector<Diagnostic> &diagnostics) {
  std::stable_sort(diagnostics.begin(), diagnostics.end(),
                   [](const Diagnostic &a, const Diagnostic &b) {
                     return a.source_stage < b.source_stage;
                   });
}

} // namespace halbench
