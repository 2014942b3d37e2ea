#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace halbench {

enum class SignalKind { Branch, Sensor, Actuator, Attribute };
enum class DataType { None, Boolean, String, Integer, Float };

std::string_view to_string(SignalKind kind);
std::string_view to_string(DataType type);
std::optional<SignalKind> parse_signal_kind(std::string_view text);
std::optional<DataType> parse_data_type(std::string_view text);

struct SignalNode {
  std::string path;
  SignalKind kind = SignalKind::Branch;
  DataType datatype = DataType::None;
  std::vector<std::string> allowed_values;

  bool operator==(const SignalNode &) const = default;
};

struct NearMatch {
  std::string path;
  double distance = 0.0;

  bool operator==(const NearMatch &) const = default;
};

/// Immutable set of VSS nodes, closed under path prefixes.
class Catalog {
public:
  Catalog() = default;

  /// Validates uniqueness, node invariants and prefix closure.
  Catalog(std::vector<SignalNode> nodes, std::string source_id);

  const std::string &source_id() const { return source_id_; }
  std::size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }

  /// Nodes in declaration order.
  std::vector<const SignalNode *> nodes() const;
  std::vector<std::string> paths() const { return order_; }

  const SignalNode *resolve(std::string_view path) const;

  /// Up to k paths ranked by segment-aware edit distance, ties broken
  /// lexicographically.
  std::vector<NearMatch> nearest(std::string_view query, std::size_t k) const;

  /// Direct children of a branch, in declaration order.
  std::vector<const SignalNode *> children(std::string_view path) const;

private:
  std::map<std::string, SignalNode, std::less<>> nodes_;
  std::vector<std::string> order_;
  std::string source_id_;
};

/// Reads the line-oriented catalog format:
///   <path> <kind> [<datatype>] [values=<v1,v2,...>]
/// with `#` comments and blank lines ignored.
Catalog load_catalog(std::istream &in, std::string source_id = "<stream>");
Catalog load_catalog_file(const std::string &path);

std::optional<SignalNode> resolve(const Catalog &catalog, std::string_view path);
std::vector<NearMatch> nearest(const Catalog &catalog, std::string_view query,
                               std::size_t k);

std::vector<std::string> split_path(std::string_view path);
std::string parent_path(std::string_view path);

/// Character edit distance between two segments divided by the longer length.
double segment_distance(std::string_view a, std::string_view b);

/// Edit distance over dot-separated segments (insert/delete cost 1,
/// substitution cost segment_distance), divided by the larger segment count.
double path_distance(std::string_view a, std::string_view b);

} // namespace halbench
