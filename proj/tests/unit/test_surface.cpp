#include "doctest.h"
#include "support.hpp"

#include "halbench/errors.hpp"

#include <sstream>

using namespace halbench;

namespace {

SdkSurface parse(const std::string &text) {
  std::istringstream in(text);
  return load_surface(in, "inline");
}

const SdkSurface &plain() {
  static const SdkSurface surface =
      load_surface_file(testing::fixture_path("reference.surface"));
  return surface;
}

} // namespace

TEST_CASE("reference surface covers the template imports") {
  const auto &s = plain();
  const auto *app = s.module("sdv.vehicle_app");
  REQUIRE(app);
  CHECK(app->exports.count("VehicleApp") == 1);
  CHECK(check_import(s, "sdv.vehicle_app", "VehicleApp") == ImportVerdict::Known);
  CHECK(check_import(s, "sdv.vdb.reply", "DataPointReply") == ImportVerdict::Known);
  CHECK(check_import(s, "vehicle", "Vehicle") == ImportVerdict::Known);
  CHECK(check_import(s, "vehicle", "vehicle") == ImportVerdict::Known);
  CHECK(check_import(s, "asyncio", std::nullopt) == ImportVerdict::Known);
  CHECK(check_import(s, "signal", std::nullopt) == ImportVerdict::Known);
  CHECK(check_import(s, "time", std::nullopt) == ImportVerdict::Known);
}

TEST_CASE("check_import verdicts") {
  const auto &s = plain();
  CHECK(check_import(s, "sdv.vehicle_app", "subscribe_signal") == ImportVerdict::UnknownName);
  CHECK(check_import(s, "sdv.databroker", std::nullopt) == ImportVerdict::UnknownModule);
  CHECK(check_import(s, "sdv.model", "Vehicle") == ImportVerdict::UnknownModule);
  CHECK(check_import(s, "sdv", "vehicle_app") == ImportVerdict::Known);
  CHECK(check_import(s, "sdv", "SDVClient") == ImportVerdict::UnknownName);
  CHECK(check_import(s, "asyncio.subprocess", "anything") == ImportVerdict::Known);
  CHECK(to_string(ImportVerdict::UnknownModule) == "unknown_module");
}

TEST_CASE("name knowledge implies module knowledge") {
  const auto &s = plain();
  for (const auto &[path, module] : s.modules())
    for (const auto &name : module.export_order) {
      REQUIRE(check_import(s, path, name) == ImportVerdict::Known);
      CHECK(check_import(s, path, std::nullopt) == ImportVerdict::Known);
    }
  for (const std::string m : {"sdv.x", "nope", "vehicle.sub", "sdv.vdb"})
    for (const std::string n : {"a", "VehicleApp"})
      if (check_import(s, m, n) == ImportVerdict::Known)
        CHECK(check_import(s, m, std::nullopt) == ImportVerdict::Known);
}

TEST_CASE("check_attribute") {
  const auto &s = testing::reference_surface();
  CHECK(check_attribute(s, "Wiping", "SystemState") == AttributeVerdict::Unknown);
  CHECK(check_attribute(s, "Wiping", "Mode") == AttributeVerdict::Known);
  CHECK(check_attribute(s, "VehicleApp", "run") == AttributeVerdict::Known);
  CHECK(check_attribute(s, "Vehicle", "Body") == AttributeVerdict::Known);
  CHECK(check_attribute(s, "VehicleApp", "vehicle") == AttributeVerdict::Unknown);
  CHECK_THROWS_AS(check_attribute(s, "NoSuchClass", "x"), UsageError);
}

TEST_CASE("inherited attributes resolve through the base chain") {
  auto s = parse("surface 1\nmodule m\n  class A\n    method f 0 0\n    attr x\n"
                 "  class B extends A\n    method g 1 *\n");
  CHECK(check_attribute(s, "B", "f") == AttributeVerdict::Known);
  CHECK(check_attribute(s, "B", "x") == AttributeVerdict::Known);
  CHECK(check_attribute(s, "A", "g") == AttributeVerdict::Unknown);
  const auto *g = s.find_method("B", "g");
  REQUIRE(g);
  CHECK(g->max_args < 0);
  CHECK(g->accepts(7));
  CHECK_FALSE(g->accepts(0));
}

TEST_CASE("load_surface errors") {
  CHECK(parse("").modules().empty());
  CHECK_THROWS_AS(parse("surface 1\nmodule m\n  class VehicleApp\n  class VehicleApp\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse("surface 1\nmodule m\n  function f 0 0\n  value f\n"), ValidationError);
  CHECK_THROWS_AS(parse("surface 1\nmodule m\nmodule m\n"), ValidationError);
  CHECK_THROWS_AS(parse("surface 1\nmodule m\n  class A extends Missing\n"), ValidationError);
  CHECK_THROWS_AS(parse("surface 1\nmodule m\n  value v type=Missing\n"), ValidationError);
  CHECK_THROWS_AS(parse("surface 2\n"), ParseError);
  CHECK_THROWS_AS(parse("surface 1\nfrobnicate\n"), ParseError);
  CHECK_THROWS_AS(parse("surface 1\nmodule m\n  method f 0 0\n"), ParseError);
  CHECK_THROWS_AS(parse("surface 1\nmodule m\n  class A\n    method f 2 1\n"), ParseError);
  CHECK_THROWS_AS(parse("surface 1\nclass A\n"), ParseError);
  CHECK_THROWS_AS(load_surface_file("/nonexistent.surface"), ConfigError);
  try {
    parse("surface 1\nmodule m\n  class A\n    method f x 1\n");
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("surface text round-trip") {
  const auto &s = plain();
  auto again = parse(s.to_text());
  CHECK(again == s);
  CHECK(again.to_text() == s.to_text());
}

TEST_CASE("signal model classes merge same-named branches") {
  const auto &s = testing::reference_surface();
  const auto *front = s.find_class("Front");
  REQUIRE(front);
  CHECK(front->attributes.count("Wiping") == 1);
  const auto *system = s.find_class("System");
  REQUIRE(system);
  CHECK(system->attributes.count("Mode") == 1);
  CHECK(system->attributes.size() == 11);
}
