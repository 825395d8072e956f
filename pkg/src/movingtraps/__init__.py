"""Brownian particle among moving Poissonian traps in one dimension.

Survival probabilities by direct simulation and by the annealed sausage
weight, closed-form oracles, and statistics of the particle conditioned
on survival.
"""

from .analytics import confinement_prob, expected_range
from .conditional import (
    EventParamsA,
    EventParamsB,
    conditional_statistics,
    event_A_indicator,
    event_B_indicator,
    exponent_fit,
    theorem_trend_report,
)
from .config import VERSION, ExperimentConfig
from .params import Estimate, SimParams
from .paths import InvalidParameter, PathGrid, sample_brownian_path
from .rng import StreamKey
from .sausage import annealed_survival_estimate, delta_functional
from .survival import confinement_lower_bound, optimize_confinement_radius, survival_report
from .trapfield import direct_survival_estimate, sample_initial_points, simulate_kill_time

__version__ = VERSION.lstrip("v")

__all__ = [
    "Estimate",
    "EventParamsA",
    "EventParamsB",
    "ExperimentConfig",
    "InvalidParameter",
    "PathGrid",
    "SimParams",
    "StreamKey",
    "annealed_survival_estimate",
    "conditional_statistics",
    "confinement_lower_bound",
    "confinement_prob",
    "delta_functional",
    "direct_survival_estimate",
    "event_A_indicator",
    "event_B_indicator",
    "expected_range",
    "exponent_fit",
    "optimize_confinement_radius",
    "sample_brownian_path",
    "sample_initial_points",
    "simulate_kill_time",
    "survival_report",
    "theorem_trend_report",
]
