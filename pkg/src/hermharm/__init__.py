"""Numerical laboratory for harmonic maps from Hermitian tori into Riemannian and Kahler charts."""

from .flow import FlowConfig, FlowTrace, run, step, subelliptic_monitor
from .geometry import GridSpec, HermitianDomain, MetricError, build_domain, classify_metric, torsion_trace
from .harness import CheckReport, run_scenario
from .maps import MapField, energies, make_map, residuals, second_fundamental
from .targets import ChartError, KahlerTarget, RiemannianTarget, make_target

__all__ = [
    "ChartError",
    "CheckReport",
    "FlowConfig",
    "FlowTrace",
    "GridSpec",
    "HermitianDomain",
    "KahlerTarget",
    "MapField",
    "MetricError",
    "RiemannianTarget",
    "build_domain",
    "classify_metric",
    "energies",
    "make_map",
    "make_target",
    "residuals",
    "run",
    "run_scenario",
    "second_fundamental",
    "step",
    "subelliptic_monitor",
    "torsion_trace",
]
