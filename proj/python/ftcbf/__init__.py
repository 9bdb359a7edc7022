"""Fault-tolerant stochastic control barrier functions."""

import json

from ._ftcbf import (
    ContractViolation,
    Error,
    Scenario,
    ScenarioValidationError,
    SolverError,
    farkas_certificate,
    run,
    solve_qp,
)
from . import _ftcbf

__all__ = [
    "ContractViolation",
    "Error",
    "Scenario",
    "ScenarioValidationError",
    "SolverError",
    "calibrate",
    "farkas_certificate",
    "metrics",
    "run",
    "solve_qp",
    "verify",
]


def metrics(scenario, seeds=None, threads=0):
    """Closed-loop sweep; returns the metrics document as a dict."""
    if seeds is None:
        seeds = scenario.seeds
    return json.loads(_ftcbf.metrics(scenario, list(seeds), threads))


def calibrate(scenario, runs, epsilon=0.05):
    """Monte-Carlo calibration of gamma and theta; returns {"gammas", "thetas", ...}."""
    return json.loads(_ftcbf.calibrate(scenario, runs, epsilon))["calibration"]


def verify(scenario, budget=10000, seed=None, threads=0):
    """Sampling falsification over the scenario's verification box."""
    return json.loads(_ftcbf.verify(scenario, budget, seed, threads))
