#pragma once

#include "halbench/analyzer.hpp"
#include "halbench/catalog.hpp"
#include "halbench/surface.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace testing {

inline std::string fixture_path(const std::string &relative) {
  return std::string(HALBENCH_FIXTURES) + "/" + relative;
}

inline std::string read_fixture(const std::string &relative) {
  std::ifstream in(fixture_path(relative), std::ios::binary);
  if (!in)
    throw std::runtime_error("missing fixture " + relative);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline const halbench::Catalog &appendix_catalog() {
  static const halbench::Catalog catalog =
      halbench::load_catalog_file(fixture_path("appendix.vss"));
  return catalog;
}

inline const halbench::SdkSurface &reference_surface() {
  static const halbench::SdkSurface surface =
      halbench::load_surface_file(fixture_path("reference.surface"))
          .with_signal_model(appendix_catalog());
  return surface;
}

inline halbench::TaskSignalSpec wiper_task() {
  return {{{"trigger", "Vehicle.Body.Hood.IsOpen"},
           {"target", "Vehicle.Body.Windshield.Front.Wiping.Mode"}}};
}

inline std::string replace_once(std::string text, const std::string &from,
                                const std::string &to) {
  auto at = text.find(from);
  if (at == std::string::npos)
    throw std::runtime_error("replace_once: pattern not found: " + from);
  return text.replace(at, from.size(), to);
}

} // namespace testing
