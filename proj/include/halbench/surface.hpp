#pragma once

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace halbench {

class Catalog;

/// Positional arity of a callable; `max_args < 0` means unbounded. Counts
/// exclude `self`.
struct Callable {
  std::string name;
  int min_args = 0;
  int max_args = 0;
  bool accepts_keywords = false;
  bool is_async = false;

  bool accepts(int supplied) const {
    return supplied >= min_args && (max_args < 0 || supplied <= max_args);
  }
  bool operator==(const Callable &) const = default;
};

struct SurfaceClass {
  std::string name;
  std::string module;
  std::optional<std::string> base;
  bool signal_root = false;
  std::optional<Callable> init;
  std::map<std::string, Callable> methods;
  std::set<std::string> attributes;
  /// Overridable hooks that must be declared as coroutines.
  std::set<std::string> async_entries;

  bool operator==(const SurfaceClass &) const = default;
};

enum class ExportKind { Class, Function, Value };

struct SurfaceExport {
  std::string name;
  ExportKind kind = ExportKind::Value;
  std::optional<Callable> function;
  std::optional<std::string> value_type;
  bool signal_root = false;

  bool operator==(const SurfaceExport &) const = default;
};

struct SurfaceModule {
  std::string path;
  /// Not modeled: every name is accepted.
  bool opaque = false;
  std::vector<std::string> export_order;
  std::map<std::string, SurfaceExport> exports;

  bool operator==(const SurfaceModule &) const = default;
};

enum class ImportVerdict { Known, UnknownModule, UnknownName };
enum class AttributeVerdict { Known, Unknown };

std::string_view to_string(ImportVerdict verdict);

class SdkSurface {
public:
  const std::map<std::string, SurfaceModule> &modules() const { return modules_; }
  const std::map<std::string, SurfaceClass> &classes() const { return classes_; }
  const std::map<std::string, Callable> &node_members() const {
    return node_members_;
  }

  const SurfaceModule *module(std::string_view path) const;
  const SurfaceClass *find_class(std::string_view name) const;
  const Callable *node_member(std::string_view name) const;

  /// Declared module, or a package prefix of one, or inside an opaque module.
  bool is_known_module(std::string_view path) const;
  bool is_opaque(std::string_view path) const;

  ImportVerdict check_import(std::string_view module,
                             std::optional<std::string_view> name) const;

  /// Throws UsageError when the class is unknown.
  AttributeVerdict check_attribute(std::string_view class_name,
                                   std::string_view attribute) const;

  /// Resolves a method through the base chain.
  const Callable *find_method(std::string_view class_name,
                              std::string_view method) const;
  bool has_attribute(std::string_view class_name,
                     std::string_view attribute) const;
  /// Base chain of a class, starting with the class itself.
  std::vector<const SurfaceClass *> lineage(std::string_view class_name) const;

  /// Adds one class per catalog branch, named by its last segment, with the
  /// child segments as attributes. Same-named branches are merged.
  SdkSurface with_signal_model(const Catalog &catalog) const;

  std::string to_text() const;

  bool operator==(const SdkSurface &) const = default;

private:
  friend SdkSurface load_surface(std::istream &, std::string);

  std::vector<std::string> module_order_;
  std::map<std::string, SurfaceModule> modules_;
  std::vector<std::string> class_order_;
  std::map<std::string, SurfaceClass> classes_;
  std::map<std::string, Callable> node_members_;
  std::vector<std::string> header_comments_;
};

SdkSurface load_surface(std::istream &in, std::string source_id = "<stream>");
SdkSurface load_surface_file(const std::string &path);

ImportVerdict check_import(const SdkSurface &surface, std::string_view module,
                           std::optional<std::string_view> name);
AttributeVerdict check_attribute(const SdkSurface &surface,
                                 std::string_view class_name,
                                 std::string_view attribute);

} // namespace halbench
