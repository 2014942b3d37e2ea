"""Hallucination evaluation harness for automotive guest code."""

from ._halbench import (
    Catalog,
    ConfigError,
    HalbenchError,
    InfrastructureError,
    ParseError,
    ReplayMissError,
    Surface,
    UsageError,
    ValidationError,
    analyze,
    path_distance,
    render_report,
    run_experiments,
    score,
)

__all__ = [
    "Catalog",
    "ConfigError",
    "HalbenchError",
    "InfrastructureError",
    "ParseError",
    "ReplayMissError",
    "Surface",
    "UsageError",
    "ValidationError",
    "analyze",
    "path_distance",
    "render_report",
    "run_experiments",
    "score",
]
