#pragma once

// Flow-insensitive lexical binding model of a parsed guest module, shared by
// the reference checker and the signal extractor.

#include "halbench/analyzer.hpp"
#include "halbench/guest_syntax.hpp"
#include "halbench/surface.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace halbench::detail {

enum class ScopeKind { Module, Function, Class, Lambda, Comprehension };

struct ClassInfo;
struct Scope;

enum class SiteKind { Import, ImportFrom, Param, Value, ClassDef, FunctionDef, Other };

struct BindingSite {
  SiteKind kind = SiteKind::Other;
  Scope *scope = nullptr;
  const guest::Expr *value = nullptr;
  const guest::Param *param = nullptr;
  std::size_t param_index = 0;
  const guest::Stmt *function = nullptr;
  ClassInfo *method_owner = nullptr;
  std::string module;
  std::optional<std::string> imported;
  ClassInfo *cls = nullptr;
};

struct Scope {
  ScopeKind kind = ScopeKind::Module;
  Scope *parent = nullptr;
  ClassInfo *class_info = nullptr;
  const guest::Stmt *function = nullptr;
  std::map<std::string, std::vector<BindingSite>> bindings;
  std::set<std::string> globals;
  std::set<std::string> nonlocals;
  bool star_import = false;
};

struct ClassInfo {
  std::string name;
  const guest::Stmt *stmt = nullptr;
  Scope *defining_scope = nullptr;
  Scope *body_scope = nullptr;
  std::map<std::string, const guest::Stmt *> methods;
  std::map<std::string, std::vector<std::pair<const guest::Expr *, Scope *>>>
      self_attrs;
};

struct Fact {
  enum class Kind {
    Unknown,
    Module,
    SurfaceClass,
    SurfaceInstance,
    SurfaceFunction,
    SurfaceMethod,
    UserClass,
    UserInstance,
    SignalRoot,
    SignalChain,
    NodeMember,
  };
  Kind kind = Kind::Unknown;
  std::string name;   // module path, class name, member name
  std::string member; // function or method name
  const ClassInfo *cls = nullptr;
  bool bound = false; // method reached through an instance

  bool operator==(const Fact &) const = default;
};

class SemanticModel {
public:
  SemanticModel(const guest::Module &module, const SdkSurface &surface);

  Scope *module_scope() const { return scopes_.front().get(); }
  Scope *scope_of(const void *node) const;
  const std::vector<std::unique_ptr<ClassInfo>> &classes() const {
    return classes_;
  }

  /// Binding sites of a name as seen from `scope`; nullptr when unbound.
  const std::vector<BindingSite> *lookup(const std::string &name,
                                         const Scope *scope) const;
  bool star_imported(const Scope *scope) const;

  Fact type_of(const guest::Expr &expr, const Scope *scope);
  bool is_root(const Fact &fact) const;

  /// Every base resolves to a known user or surface class, and at least one
  /// surface class is an ancestor.
  bool checkable(const ClassInfo &cls);
  bool user_has_attribute(const ClassInfo &cls, const std::string &name);
  /// First surface class in the ancestry, searching depth first.
  std::optional<std::string> surface_ancestor(const ClassInfo &cls);
  /// A user-defined `method` anywhere in the user part of the ancestry.
  const guest::Stmt *user_method(const ClassInfo &cls, const std::string &name);
  std::vector<const ClassInfo *> user_bases(const ClassInfo &cls);

  const SdkSurface &surface() const { return surface_; }

private:
  friend class Collector;

  Fact site_fact(const BindingSite &site);
  Fact combine(const std::vector<Fact> &facts) const;
  Fact export_fact(const std::string &module, const std::string &name) const;

  const SdkSurface &surface_;
  std::vector<std::unique_ptr<Scope>> scopes_;
  std::vector<std::unique_ptr<ClassInfo>> classes_;
  std::map<const void *, Scope *> scope_of_;
  std::vector<std::pair<const guest::Expr *, Scope *>> calls_;
  std::map<const guest::Expr *, Fact> expr_memo_;
  std::set<const guest::Expr *> expr_active_;
  std::map<const BindingSite *, Fact> site_memo_;
  std::set<const BindingSite *> site_active_;
  std::map<const ClassInfo *, bool> checkable_memo_;
  /// Results computed while a cycle was cut are only cached at the top.
  std::size_t cycle_cuts_ = 0;
  bool outermost() const { return expr_active_.empty() && site_active_.empty(); }
};

} // namespace halbench::detail
