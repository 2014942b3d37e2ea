#include "halbench/analyzer.hpp"
#include "halbench/catalog.hpp"
#include "halbench/errors.hpp"
#include "halbench/orchestrator.hpp"
#include "halbench/surface.hpp"
#include "halbench/taxonomy.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace halbench;
using nlohmann::json;

namespace {

py::object to_python(const json &value) {
  return py::module_::import("json").attr("loads")(value.dump());
}

json from_python(const py::handle &value) {
  auto text = py::module_::import("json").attr("dumps")(value).cast<std::string>();
  return json::parse(text);
}

TaskSignalSpec expected_from(const std::map<std::string, std::string> &roles) {
  TaskSignalSpec spec;
  for (const auto &[role, path] : roles)
    spec.signals.push_back({role, path});
  return spec;
}

ReportFormat format_from(const std::string &name) {
  auto format = parse_report_format(name);
  if (!format)
    throw UsageError("unknown report format: " + name);
  return *format;
}

py::list diagnostics_to_python(const std::vector<Diagnostic> &diagnostics) {
  py::list out;
  for (const auto &d : diagnostics)
    out.append(to_python(diagnostic_to_json(d)));
  return out;
}

} // namespace

PYBIND11_MODULE(_halbench, m) {
  m.doc() = "Hallucination evaluation harness for automotive guest code";

  auto base = py::register_exception<Error>(m, "HalbenchError");
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<UsageError>(m, "UsageError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<ReplayMissError>(m, "ReplayMissError", base);
  py::register_exception<InfrastructureError>(m, "InfrastructureError", base);

  py::class_<Catalog>(m, "Catalog")
      .def_static("load", &load_catalog_file, py::arg("path"))
      .def("__len__", &Catalog::size)
      .def("__contains__",
           [](const Catalog &c, const std::string &path) { return c.resolve(path) != nullptr; })
      .def("paths", &Catalog::paths)
      .def(
          "kind",
          [](const Catalog &c, const std::string &path) {
            const auto *node = c.resolve(path);
            if (!node)
              throw py::key_error(path);
            return std::string(to_string(node->kind));
          },
          py::arg("path"))
      .def(
          "nearest",
          [](const Catalog &c, const std::string &query, std::size_t k) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto &match : c.nearest(query, k))
              out.emplace_back(match.path, match.distance);
            return out;
          },
          py::arg("query"), py::arg("k") = 3);

  py::class_<SdkSurface>(m, "Surface")
      .def_static("load", &load_surface_file, py::arg("path"))
      .def("is_known_module", &SdkSurface::is_known_module, py::arg("path"))
      .def("with_signal_model", &SdkSurface::with_signal_model, py::arg("catalog"));

  m.def("path_distance", &path_distance, py::arg("a"), py::arg("b"));

  m.def(
      "analyze",
      [](const std::string &source, const SdkSurface &surface, const Catalog &catalog,
         const std::map<std::string, std::string> &expected) {
        auto merged = surface.with_signal_model(catalog);
        return diagnostics_to_python(
            analyze_source(source, merged, catalog, expected_from(expected)));
      },
      py::arg("source"), py::arg("surface"), py::arg("catalog"),
      py::arg("expected") = std::map<std::string, std::string>{});

  m.def(
      "score",
      [](const py::list &diagnostics) {
        std::vector<Diagnostic> parsed;
        for (const auto &d : diagnostics)
          parsed.push_back(diagnostic_from_json(from_python(d)));
        return score_iteration(parsed).score;
      },
      py::arg("diagnostics"));

  m.def(
      "run_experiments",
      [](const std::string &config_path, std::size_t jobs) {
        auto configs = load_run_configs(config_path);
        std::vector<ExperimentReport> reports;
        {
          py::gil_scoped_release release;
          reports = run_grid(configs, jobs);
        }
        py::list out;
        for (const auto &r : reports)
          out.append(to_python(report_to_json(r)));
        return out;
      },
      py::arg("config"), py::arg("jobs") = 1);

  m.def(
      "render_report",
      [](const py::dict &report, const std::string &format) {
        return render_report(report_from_json(from_python(report)), format_from(format));
      },
      py::arg("report"), py::arg("format") = "markdown");
}
