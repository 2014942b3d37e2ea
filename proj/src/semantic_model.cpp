#include "semantic_model.hpp"

#include <algorithm>

namespace halbench::detail {

using namespace guest;

namespace {

bool has_decorator(const Stmt &def, std::string_view name) {
  for (const auto &d : def.decorators)
    if (d->kind == ExprKind::Name && d->text == name)
      return true;
  return false;
}

Fact root_fact() {
  Fact f;
  f.kind = Fact::Kind::SignalRoot;
  return f;
}

} // namespace

class Collector {
public:
  Collector(SemanticModel &model) : m_(model) {}

  void run(const Module &module) {
    auto *scope = new_scope(ScopeKind::Module, nullptr, nullptr);
    visit_suite(module.body, scope);
  }

private:
  Scope *new_scope(ScopeKind kind, Scope *parent, const void *node) {
    auto scope = std::make_unique<Scope>();
    scope->kind = kind;
    scope->parent = parent;
    Scope *raw = scope.get();
    m_.scopes_.push_back(std::move(scope));
    if (node)
      m_.scope_of_[node] = raw;
    return raw;
  }

  Scope *module_scope() { return m_.scopes_.front().get(); }

  Scope *binding_target(Scope *scope, const std::string &name) {
    if (scope->globals.count(name))
      return module_scope();
    if (scope->nonlocals.count(name)) {
      for (Scope *s = scope->parent; s; s = s->parent)
        if (s->kind == ScopeKind::Function && s->bindings.count(name))
          return s;
    }
    return scope;
  }

  void bind(Scope *scope, const std::string &name, BindingSite site) {
    Scope *target = binding_target(scope, name);
    if (!site.scope)
      site.scope = scope;
    target->bindings[name].push_back(std::move(site));
  }

  // First parameter of a method, reached from `scope` without rebinding.
  ClassInfo *self_owner(const std::string &name, Scope *scope) {
    for (Scope *s = scope; s; s = s->parent) {
      if (s->kind == ScopeKind::Class)
        continue;
      auto it = s->bindings.find(name);
      if (it == s->bindings.end())
        continue;
      for (const auto &site : it->second)
        if (site.kind == SiteKind::Param && site.method_owner &&
            site.param_index == 0)
          return site.method_owner;
      return nullptr;
    }
    return nullptr;
  }

  void bind_target(const Expr &target, Scope *scope, const Expr *value) {
    switch (target.kind) {
    case ExprKind::Name: {
      BindingSite site;
      site.kind = value ? SiteKind::Value : SiteKind::Other;
      site.value = value;
      bind(scope, target.text, std::move(site));
      break;
    }
    case ExprKind::Attribute:
      if (target.kids[0]->kind == ExprKind::Name)
        if (auto *owner = self_owner(target.kids[0]->text, scope))
          owner->self_attrs[target.text].emplace_back(value, scope);
      visit_expr(*target.kids[0], scope);
      break;
    case ExprKind::Subscript:
      visit_expr(*target.kids[0], scope);
      visit_expr(*target.kids[1], scope);
      break;
    case ExprKind::Starred:
      bind_target(*target.kids[0], scope, nullptr);
      break;
    case ExprKind::Tuple:
    case ExprKind::List:
      for (const auto &kid : target.kids)
        bind_target(*kid, scope, nullptr);
      break;
    default:
      visit_expr(target, scope);
    }
  }

  void prescan_declarations(const Suite &body, Scope *scope) {
    for (const auto &stmt : body) {
      if (stmt->kind == StmtKind::Global)
        scope->globals.insert(stmt->names.begin(), stmt->names.end());
      else if (stmt->kind == StmtKind::Nonlocal)
        scope->nonlocals.insert(stmt->names.begin(), stmt->names.end());
      else if (stmt->kind != StmtKind::FunctionDef &&
               stmt->kind != StmtKind::ClassDef) {
        prescan_declarations(stmt->body, scope);
        prescan_declarations(stmt->orelse, scope);
        prescan_declarations(stmt->finalbody, scope);
        for (const auto &h : stmt->handlers)
          prescan_declarations(h.body, scope);
      }
    }
  }

  void visit_suite(const Suite &body, Scope *scope) {
    for (const auto &stmt : body)
      visit_stmt(*stmt, scope);
  }

  void visit_params(const std::vector<Param> &params, Scope *outer) {
    for (const auto &p : params) {
      if (p.annotation)
        visit_expr(*p.annotation, outer);
      if (p.default_value)
        visit_expr(*p.default_value, outer);
    }
  }

  void visit_stmt(const Stmt &s, Scope *scope) {
    switch (s.kind) {
    case StmtKind::FunctionDef: {
      for (const auto &d : s.decorators)
        visit_expr(*d, scope);
      visit_params(s.params, scope);
      if (s.returns)
        visit_expr(*s.returns, scope);
      BindingSite site;
      site.kind = SiteKind::FunctionDef;
      site.function = &s;
      bind(scope, s.name, std::move(site));
      ClassInfo *owner = nullptr;
      if (scope->kind == ScopeKind::Class) {
        scope->class_info->methods[s.name] = &s;
        if (!has_decorator(s, "staticmethod"))
          owner = scope->class_info;
      }
      auto *fn = new_scope(ScopeKind::Function, scope, &s);
      fn->function = &s;
      prescan_declarations(s.body, fn);
      for (std::size_t k = 0; k < s.params.size(); ++k) {
        BindingSite p;
        p.kind = SiteKind::Param;
        p.param = &s.params[k];
        p.param_index = k;
        p.function = &s;
        p.method_owner = owner;
        p.scope = scope;
        fn->bindings[s.params[k].name].push_back(std::move(p));
      }
      visit_suite(s.body, fn);
      break;
    }
    case StmtKind::ClassDef: {
      for (const auto &d : s.decorators)
        visit_expr(*d, scope);
      for (const auto &b : s.bases)
        visit_expr(*b, scope);
      auto info = std::make_unique<ClassInfo>();
      info->name = s.name;
      info->stmt = &s;
      info->defining_scope = scope;
      ClassInfo *raw = info.get();
      m_.classes_.push_back(std::move(info));
      BindingSite site;
      site.kind = SiteKind::ClassDef;
      site.cls = raw;
      bind(scope, s.name, std::move(site));
      auto *body = new_scope(ScopeKind::Class, scope, &s);
      body->class_info = raw;
      raw->body_scope = body;
      visit_suite(s.body, body);
      break;
    }
    case StmtKind::Assign:
      visit_expr(*s.value, scope);
      for (const auto &t : s.targets)
        bind_target(*t, scope, s.value.get());
      break;
    case StmtKind::AugAssign:
      visit_expr(*s.value, scope);
      bind_target(*s.targets[0], scope, nullptr);
      break;
    case StmtKind::AnnAssign:
      visit_expr(*s.annotation, scope);
      if (s.value)
        visit_expr(*s.value, scope);
      bind_target(*s.targets[0], scope, s.value.get());
      break;
    case StmtKind::For:
      visit_expr(*s.value, scope);
      bind_target(*s.targets[0], scope, nullptr);
      visit_suite(s.body, scope);
      visit_suite(s.orelse, scope);
      break;
    case StmtKind::With:
      for (const auto &item : s.items) {
        visit_expr(*item.context, scope);
        if (item.target)
          bind_target(*item.target, scope, nullptr);
      }
      visit_suite(s.body, scope);
      break;
    case StmtKind::Try:
      visit_suite(s.body, scope);
      for (const auto &h : s.handlers) {
        if (h.type)
          visit_expr(*h.type, scope);
        if (h.name)
          bind(scope, *h.name, BindingSite{});
        visit_suite(h.body, scope);
      }
      visit_suite(s.orelse, scope);
      visit_suite(s.finalbody, scope);
      break;
    case StmtKind::If:
    case StmtKind::While:
      visit_expr(*s.value, scope);
      visit_suite(s.body, scope);
      visit_suite(s.orelse, scope);
      break;
    case StmtKind::Import:
      for (const auto &alias : s.aliases) {
        BindingSite site;
        site.kind = SiteKind::Import;
        std::string local = alias.asname.value_or(alias.name.substr(0, alias.name.find('.')));
        site.module = alias.asname ? alias.name : local;
        bind(scope, local, std::move(site));
      }
      break;
    case StmtKind::ImportFrom:
      for (const auto &alias : s.aliases) {
        if (alias.name == "*") {
          const auto *mod = m_.surface_.module(s.name);
          if (mod && !mod->opaque && s.import_level == 0) {
            for (const auto &name : mod->export_order) {
              BindingSite site;
              site.kind = SiteKind::ImportFrom;
              site.module = s.name;
              site.imported = name;
              bind(scope, name, std::move(site));
            }
          } else {
            scope->star_import = true;
          }
          continue;
        }
        BindingSite site;
        site.kind = SiteKind::ImportFrom;
        site.module = s.import_level ? std::string() : s.name;
        site.imported = alias.name;
        bind(scope, alias.asname.value_or(alias.name), std::move(site));
      }
      break;
    case StmtKind::Del:
      for (const auto &t : s.targets)
        visit_expr(*t, scope);
      break;
    case StmtKind::Expr:
    case StmtKind::Return:
      if (s.value)
        visit_expr(*s.value, scope);
      break;
    case StmtKind::Raise:
    case StmtKind::Assert:
      if (s.value)
        visit_expr(*s.value, scope);
      if (s.extra)
        visit_expr(*s.extra, scope);
      break;
    case StmtKind::Global:
    case StmtKind::Nonlocal:
    case StmtKind::Pass:
    case StmtKind::Break:
    case StmtKind::Continue:
      break;
    }
  }

  Scope *non_comprehension(Scope *scope) {
    while (scope->kind == ScopeKind::Comprehension)
      scope = scope->parent;
    return scope;
  }

  void visit_expr(const Expr &e, Scope *scope) {
    switch (e.kind) {
    case ExprKind::Lambda: {
      visit_params(e.params, scope);
      auto *fn = new_scope(ScopeKind::Lambda, scope, &e);
      for (std::size_t k = 0; k < e.params.size(); ++k) {
        BindingSite p;
        p.kind = SiteKind::Param;
        p.param = &e.params[k];
        p.param_index = k;
        p.scope = scope;
        fn->bindings[e.params[k].name].push_back(std::move(p));
      }
      visit_expr(*e.kids[0], fn);
      return;
    }
    case ExprKind::Comprehension: {
      auto *comp = new_scope(ScopeKind::Comprehension, scope, &e);
      for (std::size_t k = 0; k < e.clauses.size(); ++k) {
        const auto &clause = e.clauses[k];
        visit_expr(*clause.iter, k == 0 ? scope : comp);
        bind_target(*clause.target, comp, nullptr);
        for (const auto &c : clause.conditions)
          visit_expr(*c, comp);
      }
      for (const auto &kid : e.kids)
        visit_expr(*kid, comp);
      return;
    }
    case ExprKind::NamedExpr: {
      visit_expr(*e.kids[1], scope);
      BindingSite site;
      site.kind = SiteKind::Value;
      site.value = e.kids[1].get();
      site.scope = scope;
      bind(non_comprehension(scope), e.kids[0]->text, std::move(site));
      return;
    }
    case ExprKind::Call:
      m_.calls_.emplace_back(&e, scope);
      break;
    default:
      break;
    }
    for (const auto &kid : e.kids)
      if (kid)
        visit_expr(*kid, scope);
  }

  SemanticModel &m_;
};

SemanticModel::SemanticModel(const Module &module, const SdkSurface &surface)
    : surface_(surface) {
  Collector(*this).run(module);
}

Scope *SemanticModel::scope_of(const void *node) const {
  auto it = scope_of_.find(node);
  return it == scope_of_.end() ? nullptr : it->second;
}

const std::vector<BindingSite> *SemanticModel::lookup(const std::string &name,
                                                      const Scope *scope) const {
  const Scope *start = scope;
  for (const Scope *s = scope; s; s = s->parent) {
    if (s != start && s->kind == ScopeKind::Class)
      continue;
    if (s->kind == ScopeKind::Function && s->globals.count(name)) {
      s = module_scope();
      auto it = s->bindings.find(name);
      return it == s->bindings.end() ? nullptr : &it->second;
    }
    if (s->nonlocals.count(name))
      continue;
    auto it = s->bindings.find(name);
    if (it != s->bindings.end())
      return &it->second;
  }
  return nullptr;
}

bool SemanticModel::star_imported(const Scope *scope) const {
  for (const Scope *s = scope; s; s = s->parent)
    if (s->star_import)
      return true;
  return false;
}

bool SemanticModel::is_root(const Fact &fact) const {
  if (fact.kind == Fact::Kind::SignalRoot)
    return true;
  if (fact.kind == Fact::Kind::SurfaceClass) {
    const auto *cls = surface_.find_class(fact.name);
    return cls && cls->signal_root;
  }
  return false;
}

Fact SemanticModel::combine(const std::vector<Fact> &facts) const {
  if (facts.empty())
    return {};
  for (const auto &f : facts)
    if (f.kind == Fact::Kind::SignalRoot)
      return f;
  for (const auto &f : facts)
    if (!(f == facts.front()))
      return {};
  return facts.front();
}

Fact SemanticModel::export_fact(const std::string &module,
                                const std::string &name) const {
  const auto *mod = surface_.module(module);
  Fact fact;
  if (!mod || mod->opaque)
    return fact;
  auto it = mod->exports.find(name);
  if (it == mod->exports.end()) {
    if (surface_.is_known_module(module + "." + name)) {
      fact.kind = Fact::Kind::Module;
      fact.name = module + "." + name;
    }
    return fact;
  }
  const auto &e = it->second;
  switch (e.kind) {
  case ExportKind::Class:
    fact.kind = Fact::Kind::SurfaceClass;
    fact.name = e.name;
    break;
  case ExportKind::Function:
    fact.kind = Fact::Kind::SurfaceFunction;
    fact.name = module;
    fact.member = e.name;
    break;
  case ExportKind::Value:
    if (e.signal_root) {
      fact.kind = Fact::Kind::SignalRoot;
    } else if (e.value_type) {
      const auto *cls = surface_.find_class(*e.value_type);
      fact.kind = cls && cls->signal_root ? Fact::Kind::SignalRoot
                                          : Fact::Kind::SurfaceInstance;
      fact.name = *e.value_type;
    }
    break;
  }
  return fact;
}

Fact SemanticModel::site_fact(const BindingSite &site) {
  if (auto it = site_memo_.find(&site); it != site_memo_.end())
    return it->second;
  if (!site_active_.insert(&site).second) {
    ++cycle_cuts_;
    return {};
  }
  const auto cuts_before = cycle_cuts_;
  Fact fact;
  switch (site.kind) {
  case SiteKind::Import:
    if (surface_.is_known_module(site.module) && !surface_.is_opaque(site.module)) {
      fact.kind = Fact::Kind::Module;
      fact.name = site.module;
    }
    break;
  case SiteKind::ImportFrom:
    if (!site.module.empty())
      fact = export_fact(site.module, *site.imported);
    break;
  case SiteKind::ClassDef:
    fact.kind = Fact::Kind::UserClass;
    fact.cls = site.cls;
    fact.name = site.cls->name;
    break;
  case SiteKind::Param: {
    if (site.method_owner && site.param_index == 0 &&
        site.param->kind == ParamKind::Positional) {
      fact.kind = has_decorator(*site.function, "classmethod")
                      ? Fact::Kind::UserClass
                      : Fact::Kind::UserInstance;
      fact.cls = site.method_owner;
      fact.name = site.method_owner->name;
      break;
    }
    if (site.param->annotation) {
      Fact annotated = type_of(*site.param->annotation, site.scope);
      if (annotated.kind == Fact::Kind::SurfaceClass) {
        if (is_root(annotated)) {
          fact.kind = Fact::Kind::SignalRoot;
        } else {
          fact.kind = Fact::Kind::SurfaceInstance;
          fact.name = annotated.name;
        }
        break;
      }
      if (annotated.kind == Fact::Kind::UserClass) {
        fact.kind = Fact::Kind::UserInstance;
        fact.cls = annotated.cls;
        fact.name = annotated.name;
        break;
      }
    }
    // Constructor arguments one level deep: Cls(root) binds __init__'s param.
    if (site.method_owner && site.function && site.function->name == "__init__" &&
        site.param_index > 0 && site.param->kind == ParamKind::Positional) {
      for (const auto &[call, call_scope] : calls_) {
        Fact callee = type_of(*call->kids[0], call_scope);
        if (callee.kind != Fact::Kind::UserClass || callee.cls != site.method_owner)
          continue;
        std::size_t positional = 0;
        for (std::size_t k = 1; k < call->kids.size(); ++k) {
          const auto &arg = *call->kids[k];
          if (arg.kind == ExprKind::Keyword) {
            if (arg.text == site.param->name && is_root(type_of(*arg.kids[0], call_scope)))
              fact.kind = Fact::Kind::SignalRoot;
            continue;
          }
          if (arg.kind == ExprKind::Starred || arg.kind == ExprKind::DoubleStarred)
            break;
          if (++positional == site.param_index && is_root(type_of(arg, call_scope)))
            fact.kind = Fact::Kind::SignalRoot;
        }
      }
    }
    break;
  }
  case SiteKind::Value:
    fact = type_of(*site.value, site.scope);
    if (fact.kind == Fact::Kind::SurfaceClass && is_root(fact))
      fact = root_fact();
    break;
  case SiteKind::FunctionDef:
  case SiteKind::Other:
    break;
  }
  site_active_.erase(&site);
  if (cycle_cuts_ == cuts_before || outermost())
    site_memo_[&site] = fact;
  return fact;
}

std::vector<const ClassInfo *> SemanticModel::user_bases(const ClassInfo &cls) {
  std::vector<const ClassInfo *> out;
  for (const auto &base : cls.stmt->bases) {
    if (base->kind == ExprKind::Keyword)
      continue;
    Fact f = type_of(*base, cls.defining_scope);
    if (f.kind == Fact::Kind::UserClass && f.cls != &cls)
      out.push_back(f.cls);
  }
  return out;
}

bool SemanticModel::checkable(const ClassInfo &cls) {
  if (auto it = checkable_memo_.find(&cls); it != checkable_memo_.end())
    return it->second;
  checkable_memo_[&cls] = false;
  bool ok = true;
  bool surface_known = false;
  for (const auto &base : cls.stmt->bases) {
    if (base->kind == ExprKind::Keyword) {
      ok = false;
      break;
    }
    if (base->kind == ExprKind::Name && base->text == "object" &&
        !lookup("object", cls.defining_scope))
      continue;
    Fact f = type_of(*base, cls.defining_scope);
    if (f.kind == Fact::Kind::SurfaceClass && !is_root(f)) {
      surface_known = true;
    } else if (f.kind == Fact::Kind::UserClass && f.cls != &cls) {
      if (!checkable(*f.cls)) {
        ok = false;
        break;
      }
      surface_known = true;
    } else {
      ok = false;
      break;
    }
  }
  if (ok)
    for (const char *dynamic : {"__getattr__", "__getattribute__", "__setattr__"})
      if (cls.methods.count(dynamic))
        ok = false;
  bool result = ok && surface_known;
  checkable_memo_[&cls] = result;
  return result;
}

bool SemanticModel::user_has_attribute(const ClassInfo &cls,
                                       const std::string &name) {
  if (name.size() > 4 && name.rfind("__", 0) == 0 &&
      name.compare(name.size() - 2, 2, "__") == 0)
    return true;
  if (cls.body_scope->bindings.count(name) || cls.self_attrs.count(name))
    return true;
  for (const auto *base : user_bases(cls))
    if (user_has_attribute(*base, name))
      return true;
  for (const auto &base : cls.stmt->bases) {
    if (base->kind == ExprKind::Keyword)
      continue;
    Fact f = type_of(*base, cls.defining_scope);
    if (f.kind == Fact::Kind::SurfaceClass && surface_.has_attribute(f.name, name))
      return true;
  }
  return false;
}

std::optional<std::string> SemanticModel::surface_ancestor(const ClassInfo &cls) {
  for (const auto &base : cls.stmt->bases) {
    if (base->kind == ExprKind::Keyword)
      continue;
    Fact f = type_of(*base, cls.defining_scope);
    if (f.kind == Fact::Kind::SurfaceClass)
      return f.name;
    if (f.kind == Fact::Kind::UserClass && f.cls != &cls)
      if (auto found = surface_ancestor(*f.cls))
        return found;
  }
  return std::nullopt;
}

const Stmt *SemanticModel::user_method(const ClassInfo &cls,
                                       const std::string &name) {
  if (auto it = cls.methods.find(name); it != cls.methods.end())
    return it->second;
  for (const auto *base : user_bases(cls))
    if (const auto *found = user_method(*base, name))
      return found;
  return nullptr;
}

Fact SemanticModel::type_of(const Expr &expr, const Scope *scope) {
  if (auto it = expr_memo_.find(&expr); it != expr_memo_.end())
    return it->second;
  if (!expr_active_.insert(&expr).second) {
    ++cycle_cuts_;
    return {};
  }
  const auto cuts_before = cycle_cuts_;
  Fact fact;
  switch (expr.kind) {
  case ExprKind::Name:
    if (const auto *sites = lookup(expr.text, scope)) {
      std::vector<Fact> facts;
      for (const auto &site : *sites)
        facts.push_back(site_fact(site));
      fact = combine(facts);
    }
    break;
  case ExprKind::NamedExpr:
    fact = type_of(*expr.kids[1], scope);
    break;
  case ExprKind::Attribute: {
    Fact base = type_of(*expr.kids[0], scope);
    const std::string &attr = expr.text;
    switch (base.kind) {
    case Fact::Kind::SignalRoot:
    case Fact::Kind::SignalChain:
      if (base.kind == Fact::Kind::SignalChain && surface_.node_member(attr)) {
        fact.kind = Fact::Kind::NodeMember;
        fact.name = attr;
      } else {
        fact.kind = Fact::Kind::SignalChain;
      }
      break;
    case Fact::Kind::Module:
      fact = export_fact(base.name, attr);
      break;
    case Fact::Kind::SurfaceClass:
    case Fact::Kind::SurfaceInstance:
      if (is_root(base)) {
        fact.kind = Fact::Kind::SignalChain;
      } else if (surface_.find_method(base.name, attr)) {
        fact.kind = Fact::Kind::SurfaceMethod;
        fact.name = base.name;
        fact.member = attr;
        fact.bound = base.kind == Fact::Kind::SurfaceInstance;
      }
      break;
    case Fact::Kind::UserClass:
    case Fact::Kind::UserInstance: {
      const ClassInfo *cls = base.cls;
      std::vector<Fact> facts;
      std::vector<const ClassInfo *> pending{cls};
      std::set<const ClassInfo *> seen;
      bool user_defined = false;
      while (!pending.empty()) {
        const ClassInfo *c = pending.back();
        pending.pop_back();
        if (!seen.insert(c).second)
          continue;
        if (auto it = c->self_attrs.find(attr); it != c->self_attrs.end()) {
          user_defined = true;
          for (const auto &[value, value_scope] : it->second)
            facts.push_back(value ? type_of(*value, value_scope) : Fact{});
        }
        if (c->body_scope->bindings.count(attr))
          user_defined = true;
        for (const auto *b : user_bases(*c))
          pending.push_back(b);
      }
      if (!facts.empty()) {
        fact = combine(facts);
        if (user_defined && cls->body_scope->bindings.count(attr))
          fact = {};
        if (fact.kind == Fact::Kind::SurfaceClass && is_root(fact))
          fact = root_fact();
      } else if (!user_defined) {
        if (auto ancestor = surface_ancestor(*cls))
          if (surface_.find_method(*ancestor, attr)) {
            fact.kind = Fact::Kind::SurfaceMethod;
            fact.name = *ancestor;
            fact.member = attr;
            fact.bound = base.kind == Fact::Kind::UserInstance;
          }
      }
      break;
    }
    default:
      break;
    }
    break;
  }
  case ExprKind::Call: {
    Fact callee = type_of(*expr.kids[0], scope);
    if (callee.kind == Fact::Kind::SurfaceClass) {
      if (is_root(callee)) {
        fact.kind = Fact::Kind::SignalRoot;
      } else {
        fact.kind = Fact::Kind::SurfaceInstance;
        fact.name = callee.name;
      }
    } else if (callee.kind == Fact::Kind::UserClass) {
      fact.kind = Fact::Kind::UserInstance;
      fact.cls = callee.cls;
      fact.name = callee.name;
    }
    break;
  }
  default:
    break;
  }
  expr_active_.erase(&expr);
  if (cycle_cuts_ == cuts_before || outermost())
    expr_memo_[&expr] = fact;
  return fact;
}

} // namespace halbench::detail
