import os
import pathlib

import pytest

import halbench

FIXTURES = pathlib.Path(
    os.environ.get("HALBENCH_FIXTURES", pathlib.Path(__file__).parents[2] / "fixtures")
)
EXPECTED = {
    "trigger": "Vehicle.Body.Hood.IsOpen",
    "target": "Vehicle.Body.Windshield.Front.Wiping.Mode",
}


@pytest.fixture(scope="module")
def catalog():
    return halbench.Catalog.load(str(FIXTURES / "appendix.vss"))


@pytest.fixture(scope="module")
def surface():
    return halbench.Surface.load(str(FIXTURES / "reference.surface"))


def test_catalog(catalog):
    assert len(catalog) == 25
    assert "Vehicle.Body.Hood.IsOpen" in catalog
    assert catalog.kind("Vehicle.Body.Windshield.Front.Wiping.Mode") == "actuator"
    path, distance = catalog.nearest("Vehicle.Body.Hood.IsOpenn", 1)[0]
    assert path == "Vehicle.Body.Hood.IsOpen"
    assert distance == pytest.approx(halbench.path_distance("Vehicle.Body.Hood.IsOpenn", path))
    with pytest.raises(KeyError):
        catalog.kind("Vehicle.Nope")


def test_golden_source_is_clean(catalog, surface):
    source = (FIXTURES / "guest" / "golden.py").read_text()
    assert halbench.analyze(source, surface, catalog, EXPECTED) == []
    assert halbench.score([]) == 1.0


def test_unknown_import(catalog, surface):
    source = "from sdv.databroker import Client\n" + (FIXTURES / "guest" / "golden.py").read_text()
    diagnostics = halbench.analyze(source, surface, catalog, EXPECTED)
    assert [d["taxonomy_leaf"] for d in diagnostics] == ["APIKnowledgeConflict"]
    assert diagnostics[0]["description"] == "No module named 'sdv.databroker'"
    assert halbench.score(diagnostics) == pytest.approx(0.8)


def test_replay_and_render():
    (report,) = halbench.run_experiments(str(FIXTURES / "replay" / "actuator_repair" / "config.json"))
    assert [it["score"]["score"] for it in report["iterations"]] == [0.8, 0.9, 1.0]
    assert report["outcome"] == "solved"
    table = halbench.render_report(report, "markdown")
    assert table.startswith("| It | Suc. | Taxonomy | Description | Score |")
    assert halbench.render_report(report, "json").endswith("\n")


def test_errors():
    with pytest.raises(halbench.ConfigError):
        halbench.run_experiments("/nonexistent/config.json")
    with pytest.raises(halbench.HalbenchError):
        halbench.Catalog.load("/nonexistent/catalog.vss")
    with pytest.raises(halbench.UsageError):
        halbench.render_report({"iterations": []}, "yaml")
