#include "halbench/surface.hpp"

#include "halbench/catalog.hpp"
#include "halbench/errors.hpp"

#include <fstream>
#include <sstream>

namespace halbench {

std::string_view to_string(ImportVerdict verdict) {
  switch (verdict) {
  case ImportVerdict::Known:
    return "known";
  case ImportVerdict::UnknownModule:
    return "unknown_module";
  case ImportVerdict::UnknownName:
    return "unknown_name";
  }
  return "known";
}

const SurfaceModule *SdkSurface::module(std::string_view path) const {
  auto it = modules_.find(std::string(path));
  return it == modules_.end() ? nullptr : &it->second;
}

const SurfaceClass *SdkSurface::find_class(std::string_view name) const {
  auto it = classes_.find(std::string(name));
  return it == classes_.end() ? nullptr : &it->second;
}

const Callable *SdkSurface::node_member(std::string_view name) const {
  auto it = node_members_.find(std::string(name));
  return it == node_members_.end() ? nullptr : &it->second;
}

bool SdkSurface::is_opaque(std::string_view path) const {
  std::string candidate(path);
  while (!candidate.empty()) {
    if (const auto *m = module(candidate); m && m->opaque)
      return true;
    candidate = parent_path(candidate);
  }
  return false;
}

bool SdkSurface::is_known_module(std::string_view path) const {
  if (module(path) || is_opaque(path))
    return true;
  std::string prefix = std::string(path) + ".";
  for (const auto &[name, m] : modules_)
    if (name.rfind(prefix, 0) == 0)
      return true;
  return false;
}

ImportVerdict SdkSurface::check_import(
    std::string_view module_path, std::optional<std::string_view> name) const {
  if (!is_known_module(module_path))
    return ImportVerdict::UnknownModule;
  if (!name || is_opaque(module_path))
    return ImportVerdict::Known;
  if (const auto *m = module(module_path); m && m->exports.count(std::string(*name)))
    return ImportVerdict::Known;
  // `from pkg import submodule`
  if (is_known_module(std::string(module_path) + "." + std::string(*name)))
    return ImportVerdict::Known;
  return ImportVerdict::UnknownName;
}

std::vector<const SurfaceClass *>
SdkSurface::lineage(std::string_view class_name) const {
  std::vector<const SurfaceClass *> chain;
  const SurfaceClass *current = find_class(class_name);
  while (current && chain.size() <= classes_.size()) {
    chain.push_back(current);
    current = current->base ? find_class(*current->base) : nullptr;
  }
  return chain;
}

const Callable *SdkSurface::find_method(std::string_view class_name,
                                        std::string_view method) const {
  for (const auto *cls : lineage(class_name))
    if (auto it = cls->methods.find(std::string(method)); it != cls->methods.end())
      return &it->second;
  return nullptr;
}

bool SdkSurface::has_attribute(std::string_view class_name,
                               std::string_view attribute) const {
  std::string name(attribute);
  for (const auto *cls : lineage(class_name))
    if (cls->attributes.count(name) || cls->methods.count(name) ||
        cls->async_entries.count(name) || (name == "__init__" && cls->init))
      return true;
  return false;
}

AttributeVerdict SdkSurface::check_attribute(std::string_view class_name,
                                             std::string_view attribute) const {
  if (!find_class(class_name))
    throw UsageError("unknown surface class '" + std::string(class_name) + "'");
  return has_attribute(class_name, attribute) ? AttributeVerdict::Known
                                              : AttributeVerdict::Unknown;
}

SdkSurface SdkSurface::with_signal_model(const Catalog &catalog) const {
  SdkSurface merged = *this;
  for (const auto *node : catalog.nodes()) {
    if (node->kind != SignalKind::Branch)
      continue;
    auto segments = split_path(node->path);
    const std::string &name = segments.back();
    auto [it, inserted] = merged.classes_.try_emplace(name);
    if (inserted) {
      it->second.name = name;
      it->second.module = "vehicle";
      merged.class_order_.push_back(name);
    }
    for (const auto *child : catalog.children(node->path))
      it->second.attributes.insert(split_path(child->path).back());
  }
  return merged;
}

namespace {

std::string arity_text(const Callable &c) {
  std::string text = std::to_string(c.min_args) + " " +
                     (c.max_args < 0 ? std::string("*") : std::to_string(c.max_args));
  if (c.accepts_keywords)
    text += " kw";
  if (c.is_async)
    text += " async";
  return text;
}

} // namespace

std::string SdkSurface::to_text() const {
  std::ostringstream out;
  for (const auto &comment : header_comments_)
    out << comment << "\n";
  out << "surface 1\n";
  for (const auto &[name, member] : node_members_)
    out << "node-member " << name << " " << arity_text(member) << "\n";
  for (const auto &path : module_order_) {
    const auto &m = modules_.at(path);
    out << "module " << path << (m.opaque ? " opaque" : "") << "\n";
    for (const auto &export_name : m.export_order) {
      const auto &e = m.exports.at(export_name);
      switch (e.kind) {
      case ExportKind::Class: {
        const auto &cls = classes_.at(export_name);
        out << "  class " << cls.name;
        if (cls.base)
          out << " extends " << *cls.base;
        if (cls.signal_root)
          out << " signal-root";
        out << "\n";
        if (cls.init)
          out << "    init " << arity_text(*cls.init) << "\n";
        for (const auto &[method_name, method] : cls.methods)
          out << "    method " << method_name << " " << arity_text(method) << "\n";
        for (const auto &attr : cls.attributes)
          out << "    attr " << attr << "\n";
        for (const auto &entry : cls.async_entries)
          out << "    entry " << entry << "\n";
        break;
      }
      case ExportKind::Function:
        out << "  function " << e.name << " " << arity_text(*e.function) << "\n";
        break;
      case ExportKind::Value:
        out << "  value " << e.name;
        if (e.value_type)
          out << " type=" << *e.value_type;
        if (e.signal_root)
          out << " signal-root";
        out << "\n";
        break;
      }
    }
  }
  return out.str();
}

namespace {

struct LineCursor {
  std::vector<std::string> tokens;
  std::size_t line = 0;
};

int parse_count(const std::string &token, std::size_t line, bool allow_star) {
  if (allow_star && token == "*")
    return -1;
  try {
    std::size_t used = 0;
    int value = std::stoi(token, &used);
    if (used != token.size() || value < 0)
      throw ParseError("bad arity '" + token + "'", line);
    return value;
  } catch (const std::logic_error &) {
    throw ParseError("bad arity '" + token + "'", line);
  }
}

Callable parse_callable(const std::string &name, const LineCursor &cursor,
                        std::size_t first) {
  const auto &t = cursor.tokens;
  if (t.size() < first + 2)
    throw ParseError("expected '<min> <max>' arity", cursor.line);
  Callable c;
  c.name = name;
  c.min_args = parse_count(t[first], cursor.line, false);
  c.max_args = parse_count(t[first + 1], cursor.line, true);
  if (c.max_args >= 0 && c.max_args < c.min_args)
    throw ParseError("max arity below min arity", cursor.line);
  for (std::size_t i = first + 2; i < t.size(); ++i) {
    if (t[i] == "kw")
      c.accepts_keywords = true;
    else if (t[i] == "async")
      c.is_async = true;
    else
      throw ParseError("unknown flag '" + t[i] + "'", cursor.line);
  }
  return c;
}

} // namespace

SdkSurface load_surface(std::istream &in, std::string source_id) {
  (void)source_id;
  SdkSurface surface;
  SurfaceModule *current_module = nullptr;
  SurfaceClass *current_class = nullptr;
  bool seen_content = false;
  std::string raw;
  LineCursor cursor;

  auto add_export = [&](SurfaceExport e) {
    if (!current_module)
      throw ParseError("'" + e.name + "' declared outside a module", cursor.line);
    if (current_module->exports.count(e.name))
      throw ValidationError("line " + std::to_string(cursor.line) +
                            ": duplicate export '" + e.name + "' in module '" +
                            current_module->path + "'");
    current_module->export_order.push_back(e.name);
    current_module->exports.emplace(e.name, std::move(e));
  };
  auto need_class = [&](const std::string &what) -> SurfaceClass & {
    if (!current_class)
      throw ParseError("'" + what + "' outside a class", cursor.line);
    return *current_class;
  };

  while (std::getline(in, raw)) {
    ++cursor.line;
    if (!seen_content && raw.rfind('#', 0) == 0) {
      surface.header_comments_.push_back(raw);
      continue;
    }
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream stream(line);
    cursor.tokens.clear();
    for (std::string token; stream >> token;)
      cursor.tokens.push_back(token);
    if (cursor.tokens.empty())
      continue;
    seen_content = true;
    const auto &t = cursor.tokens;
    const std::string &keyword = t[0];
    if (keyword == "surface") {
      if (t.size() != 2 || t[1] != "1")
        throw ParseError("unsupported surface version", cursor.line);
    } else if (keyword == "node-member") {
      if (t.size() < 2)
        throw ParseError("node-member needs a name", cursor.line);
      if (surface.node_members_.count(t[1]))
        throw ValidationError("line " + std::to_string(cursor.line) +
                              ": duplicate node-member '" + t[1] + "'");
      surface.node_members_.emplace(t[1], parse_callable(t[1], cursor, 2));
    } else if (keyword == "module") {
      if (t.size() < 2 || t.size() > 3 || (t.size() == 3 && t[2] != "opaque"))
        throw ParseError("expected 'module <path> [opaque]'", cursor.line);
      if (surface.modules_.count(t[1]))
        throw ValidationError("line " + std::to_string(cursor.line) +
                              ": duplicate module '" + t[1] + "'");
      SurfaceModule m;
      m.path = t[1];
      m.opaque = t.size() == 3;
      surface.module_order_.push_back(m.path);
      current_module = &surface.modules_.emplace(m.path, std::move(m)).first->second;
      current_class = nullptr;
    } else if (keyword == "class") {
      if (t.size() < 2)
        throw ParseError("class needs a name", cursor.line);
      SurfaceClass cls;
      cls.name = t[1];
      for (std::size_t i = 2; i < t.size(); ++i) {
        if (t[i] == "extends" && i + 1 < t.size())
          cls.base = t[++i];
        else if (t[i] == "signal-root")
          cls.signal_root = true;
        else
          throw ParseError("unexpected token '" + t[i] + "'", cursor.line);
      }
      SurfaceExport e;
      e.name = cls.name;
      e.kind = ExportKind::Class;
      add_export(e);
      if (surface.classes_.count(cls.name))
        throw ValidationError("line " + std::to_string(cursor.line) +
                              ": class '" + cls.name + "' declared twice");
      cls.module = current_module->path;
      surface.class_order_.push_back(cls.name);
      current_class = &surface.classes_.emplace(cls.name, std::move(cls)).first->second;
    } else if (keyword == "function") {
      if (t.size() < 2)
        throw ParseError("function needs a name", cursor.line);
      SurfaceExport e;
      e.name = t[1];
      e.kind = ExportKind::Function;
      e.function = parse_callable(t[1], cursor, 2);
      add_export(std::move(e));
      current_class = nullptr;
    } else if (keyword == "value") {
      if (t.size() < 2)
        throw ParseError("value needs a name", cursor.line);
      SurfaceExport e;
      e.name = t[1];
      e.kind = ExportKind::Value;
      for (std::size_t i = 2; i < t.size(); ++i) {
        if (t[i].rfind("type=", 0) == 0 && t[i].size() > 5)
          e.value_type = t[i].substr(5);
        else if (t[i] == "signal-root")
          e.signal_root = true;
        else
          throw ParseError("unexpected token '" + t[i] + "'", cursor.line);
      }
      add_export(std::move(e));
      current_class = nullptr;
    } else if (keyword == "init") {
      auto &cls = need_class(keyword);
      if (cls.init)
        throw ValidationError("line " + std::to_string(cursor.line) +
                              ": duplicate init on '" + cls.name + "'");
      cls.init = parse_callable("__init__", cursor, 1);
    } else if (keyword == "method") {
      auto &cls = need_class(keyword);
      if (t.size() < 2)
        throw ParseError("method needs a name", cursor.line);
      if (cls.methods.count(t[1]) || cls.attributes.count(t[1]))
        throw ValidationError("line " + std::to_string(cursor.line) +
                              ": duplicate member '" + t[1] + "' on '" +
                              cls.name + "'");
      cls.methods.emplace(t[1], parse_callable(t[1], cursor, 2));
    } else if (keyword == "attr") {
      auto &cls = need_class(keyword);
      if (t.size() != 2)
        throw ParseError("expected 'attr <name>'", cursor.line);
      if (cls.methods.count(t[1]) || !cls.attributes.insert(t[1]).second)
        throw ValidationError("line " + std::to_string(cursor.line) +
                              ": duplicate member '" + t[1] + "' on '" +
                              cls.name + "'");
    } else if (keyword == "entry") {
      auto &cls = need_class(keyword);
      if (t.size() != 2)
        throw ParseError("expected 'entry <name>'", cursor.line);
      cls.async_entries.insert(t[1]);
    } else {
      throw ParseError("unknown keyword '" + keyword + "'", cursor.line);
    }
  }

  for (const auto &[name, cls] : surface.classes_) {
    if (cls.base && !surface.classes_.count(*cls.base))
      throw ValidationError("class '" + name + "' extends unknown class '" +
                            *cls.base + "'");
    if (surface.lineage(name).size() > surface.classes_.size())
      throw ValidationError("inheritance cycle through '" + name + "'");
  }
  for (const auto &[path, m] : surface.modules_)
    for (const auto &[name, e] : m.exports)
      if (e.value_type && !surface.classes_.count(*e.value_type))
        throw ValidationError("value '" + name + "' has unknown type '" +
                              *e.value_type + "'");
  return surface;
}

SdkSurface load_surface_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open surface file '" + path + "'");
  return load_surface(in, path);
}

ImportVerdict check_import(const SdkSurface &surface, std::string_view module,
                           std::optional<std::string_view> name) {
  return surface.check_import(module, name);
}

AttributeVerdict check_attribute(const SdkSurface &surface,
                                 std::string_view class_name,
                                 std::string_view attribute) {
  return surface.check_attribute(class_name, attribute);
}

} // namespace halbench
