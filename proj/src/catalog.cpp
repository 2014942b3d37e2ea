#include "halbench/catalog.hpp"

#include "halbench/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace halbench {

std::string_view to_string(SignalKind kind) {
  switch (kind) {
  case SignalKind::Branch:
    return "branch";
  case SignalKind::Sensor:
    return "sensor";
  case SignalKind::Actuator:
    return "actuator";
  case SignalKind::Attribute:
    return "attribute";
  }
  return "branch";
}

std::string_view to_string(DataType type) {
  switch (type) {
  case DataType::None:
    return "none";
  case DataType::Boolean:
    return "boolean";
  case DataType::String:
    return "string";
  case DataType::Integer:
    return "integer";
  case DataType::Float:
    return "float";
  }
  return "none";
}

std::optional<SignalKind> parse_signal_kind(std::string_view text) {
  if (text == "branch")
    return SignalKind::Branch;
  if (text == "sensor")
    return SignalKind::Sensor;
  if (text == "actuator")
    return SignalKind::Actuator;
  if (text == "attribute")
    return SignalKind::Attribute;
  return std::nullopt;
}

std::optional<DataType> parse_data_type(std::string_view text) {
  if (text == "boolean")
    return DataType::Boolean;
  if (text == "string")
    return DataType::String;
  if (text == "integer")
    return DataType::Integer;
  if (text == "float")
    return DataType::Float;
  return std::nullopt;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> segments;
  std::size_t start = 0;
  while (true) {
    auto dot = path.find('.', start);
    segments.emplace_back(path.substr(start, dot - start));
    if (dot == std::string_view::npos)
      break;
    start = dot + 1;
  }
  return segments;
}

std::string parent_path(std::string_view path) {
  auto dot = path.rfind('.');
  if (dot == std::string_view::npos)
    return {};
  return std::string(path.substr(0, dot));
}

namespace {

void check_node(const SignalNode &node) {
  if (node.path.empty())
    throw ValidationError("empty signal path");
  for (const auto &segment : split_path(node.path)) {
    if (segment.empty())
      throw ValidationError("empty segment in path '" + node.path + "'");
    for (unsigned char c : segment)
      if (std::isspace(c))
        throw ValidationError("whitespace in path '" + node.path + "'");
  }
  if (split_path(node.path).front() != "Vehicle")
    throw ValidationError("path '" + node.path + "' is not rooted at Vehicle");
  bool is_branch = node.kind == SignalKind::Branch;
  if (is_branch != (node.datatype == DataType::None))
    throw ValidationError(is_branch
                              ? "branch '" + node.path + "' carries a datatype"
                              : "signal '" + node.path + "' lacks a datatype");
  if (!node.allowed_values.empty() && node.datatype != DataType::String)
    throw ValidationError("allowed values on non-string signal '" + node.path +
                          "'");
  if (node.path.find('.') == std::string::npos && !is_branch)
    throw ValidationError("root '" + node.path + "' must be a branch");
}

} // namespace

Catalog::Catalog(std::vector<SignalNode> nodes, std::string source_id)
    : source_id_(std::move(source_id)) {
  for (auto &node : nodes) {
    check_node(node);
    if (nodes_.count(node.path))
      throw ValidationError("duplicate path '" + node.path + "'");
    order_.push_back(node.path);
    nodes_.emplace(node.path, std::move(node));
  }
  for (const auto &path : order_) {
    auto parent = parent_path(path);
    if (parent.empty())
      continue;
    auto it = nodes_.find(parent);
    if (it == nodes_.end())
      throw ValidationError("'" + path + "' has no parent branch '" + parent +
                            "'");
    if (it->second.kind != SignalKind::Branch)
      throw ValidationError("parent '" + parent + "' of '" + path +
                            "' is not a branch");
  }
}

std::vector<const SignalNode *> Catalog::nodes() const {
  std::vector<const SignalNode *> out;
  out.reserve(order_.size());
  for (const auto &path : order_)
    out.push_back(&nodes_.find(path)->second);
  return out;
}

const SignalNode *Catalog::resolve(std::string_view path) const {
  auto it = nodes_.find(path);
  return it == nodes_.end() ? nullptr : &it->second;
}

std::vector<const SignalNode *> Catalog::children(std::string_view path) const {
  std::vector<const SignalNode *> out;
  for (const auto &candidate : order_)
    if (parent_path(candidate) == path)
      out.push_back(&nodes_.find(candidate)->second);
  return out;
}

std::vector<NearMatch> Catalog::nearest(std::string_view query,
                                        std::size_t k) const {
  if (k == 0)
    throw UsageError("nearest: k must be at least 1");
  std::vector<NearMatch> ranked;
  ranked.reserve(nodes_.size());
  for (const auto &[path, node] : nodes_)
    ranked.push_back({path, path_distance(query, path)});
  std::sort(ranked.begin(), ranked.end(),
            [](const NearMatch &a, const NearMatch &b) {
              if (a.distance != b.distance)
                return a.distance < b.distance;
              return a.path < b.path;
            });
  if (ranked.size() > k)
    ranked.resize(k);
  return ranked;
}

double segment_distance(std::string_view a, std::string_view b) {
  if (a == b)
    return 0.0;
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j)
    row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t above = row[j];
      std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diagonal + cost});
      diagonal = above;
    }
  }
  return static_cast<double>(row[b.size()]) /
         static_cast<double>(std::max(a.size(), b.size()));
}

double path_distance(std::string_view a, std::string_view b) {
  auto left = split_path(a);
  auto right = split_path(b);
  std::vector<double> row(right.size() + 1);
  for (std::size_t j = 0; j <= right.size(); ++j)
    row[j] = static_cast<double>(j);
  for (std::size_t i = 1; i <= left.size(); ++i) {
    double diagonal = row[0];
    row[0] = static_cast<double>(i);
    for (std::size_t j = 1; j <= right.size(); ++j) {
      double above = row[j];
      row[j] = std::min({row[j] + 1.0, row[j - 1] + 1.0,
                         diagonal + segment_distance(left[i - 1], right[j - 1])});
      diagonal = above;
    }
  }
  return row[right.size()] /
         static_cast<double>(std::max(left.size(), right.size()));
}

namespace {

std::vector<std::string> split_ws(const std::string &line) {
  std::istringstream stream(line);
  std::vector<std::string> tokens;
  std::string token;
  while (stream >> token)
    tokens.push_back(token);
  return tokens;
}

} // namespace

Catalog load_catalog(std::istream &in, std::string source_id) {
  std::vector<SignalNode> nodes;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    auto tokens = split_ws(line);
    if (tokens.empty())
      continue;
    if (tokens.size() < 2)
      throw ParseError("expected '<path> <kind>'", line_no);

    SignalNode node;
    node.path = tokens[0];
    auto kind = parse_signal_kind(tokens[1]);
    if (!kind)
      throw ParseError("unknown kind '" + tokens[1] + "'", line_no);
    node.kind = *kind;

    std::size_t next = 2;
    if (next < tokens.size() && tokens[next].rfind("values=", 0) != 0) {
      auto type = parse_data_type(tokens[next]);
      if (!type)
        throw ParseError("unknown datatype '" + tokens[next] + "'", line_no);
      node.datatype = *type;
      ++next;
    }
    if (next < tokens.size()) {
      const auto &values = tokens[next];
      if (values.rfind("values=", 0) != 0)
        throw ParseError("unexpected token '" + values + "'", line_no);
      std::string list = values.substr(7);
      if (list.empty())
        throw ParseError("empty values list", line_no);
      std::size_t start = 0;
      while (true) {
        auto comma = list.find(',', start);
        auto value = list.substr(start, comma - start);
        if (value.empty())
          throw ParseError("empty entry in values list", line_no);
        node.allowed_values.push_back(value);
        if (comma == std::string::npos)
          break;
        start = comma + 1;
      }
      ++next;
    }
    if (next != tokens.size())
      throw ParseError("trailing token '" + tokens[next] + "'", line_no);

    if (!seen.insert(node.path).second)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate path '" + node.path + "'");
    try {
      check_node(node);
    } catch (const ValidationError &e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " +
                            e.what());
    }
    nodes.push_back(std::move(node));
  }
  return Catalog(std::move(nodes), std::move(source_id));
}

Catalog load_catalog_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open catalog file '" + path + "'");
  return load_catalog(in, path);
}

std::optional<SignalNode> resolve(const Catalog &catalog,
                                  std::string_view path) {
  if (const auto *node = catalog.resolve(path))
    return *node;
  return std::nullopt;
}

std::vector<NearMatch> nearest(const Catalog &catalog, std::string_view query,
                               std::size_t k) {
  return catalog.nearest(query, k);
}

} // namespace halbench
