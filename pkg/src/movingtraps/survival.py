"""Survival probability by direct simulation, by the annealed weight, and a
confinement lower bound.

The lower bound follows the strategy where the particle stays inside
B(0, r) while no trap enters B(0, r + a). In one dimension the swept set
of a trap relative to B(0, r) has exact length |R_t(Y)| + 2(r + a), so

    P(T > t) >= P(sup |X| < r) * exp(-lam (E|R_t| + 2(r + a))).
"""

from __future__ import annotations

import math
import time
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .analytics import confinement_prob, expected_range
from .params import Estimate, SimParams, combined_se
from .paths import InvalidParameter
from .rng import StreamKey
from .sausage import annealed_survival_estimate
from .trapfield import direct_survival_estimate


def confinement_lower_bound(params: SimParams, r: float) -> Estimate:
    if not r > 0:
        raise InvalidParameter(f"r must be positive, got {r}")
    t, lam = params.t_end, params.lam
    confine = confinement_prob(r, t)
    avoid = math.exp(-lam * (expected_range(t) + 2.0 * (r + params.a)))
    return Estimate(
        confine * avoid, 0.0, 0, "lower_bound", {"r": r, "confinement": confine, "avoidance": avoid}
    )


def default_r_grid(params: SimParams, n: int = 24) -> np.ndarray:
    return np.geomspace(params.a, 4.0 * math.sqrt(params.t_end), n)


def optimize_confinement_radius(
    params: SimParams, r_grid: Sequence[float] | None = None
) -> tuple[float, Estimate]:
    """Grid argmax of the lower bound; ties go to the smaller radius."""
    grid = default_r_grid(params) if r_grid is None else np.sort(np.asarray(r_grid, dtype=float))
    if grid.size == 0:
        raise InvalidParameter("r_grid is empty")
    # compare on the log scale, the bound underflows for large t
    logs = [_log_bound(params, float(r)) for r in grid]
    k = int(np.argmax(logs))
    r_star = float(grid[k])
    return r_star, confinement_lower_bound(params, r_star)


def _log_bound(params: SimParams, r: float) -> float:
    c = confinement_prob(r, params.t_end)
    if c <= 0.0:
        # eigen-series leading term, exact to double precision once c underflows
        log_c = math.log(4.0 / math.pi) - math.pi**2 * params.t_end / (8.0 * r * r)
    else:
        log_c = math.log(c)
    return log_c - params.lam * (expected_range(params.t_end) + 2.0 * (r + params.a))


def log_lower_bound(params: SimParams, r: float) -> float:
    """Natural log of :func:`confinement_lower_bound`, safe against underflow."""
    return _log_bound(params, r)


def bound_rate(params: SimParams, r: float) -> float:
    """(-log bound - lam E|R_t|) / t^(1/3): the empirical cube-root decay rate of the strategy's cost."""
    t = params.t_end
    return (-_log_bound(params, r) - params.lam * expected_range(t)) / t ** (1.0 / 3.0)


@dataclass
class SurvivalReport:
    params: SimParams
    direct: Estimate
    annealed: Estimate
    lower_bound: Estimate
    r_star: float
    timings: dict[str, float]

    @property
    def direct_annealed_agree(self) -> bool:
        return abs(self.direct.value - self.annealed.value) <= 3.0 * combined_se(
            self.direct, self.annealed
        )

    @property
    def bound_below_direct(self) -> bool:
        return self.lower_bound.value <= self.direct.value + 3.0 * self.direct.std_err

    @property
    def bound_below_annealed(self) -> bool:
        return self.lower_bound.value <= self.annealed.value + 3.0 * self.annealed.std_err

    def flags(self) -> dict[str, bool]:
        return {
            "direct_annealed_agree": self.direct_annealed_agree,
            "bound_below_direct": self.bound_below_direct,
            "bound_below_annealed": self.bound_below_annealed,
        }

    def as_dict(self) -> dict[str, Any]:
        return {
            "lam": self.params.lam,
            "a": self.params.a,
            "t_end": self.params.t_end,
            "n_steps": self.params.n_steps,
            "direct": self.direct.as_dict(),
            "annealed": self.annealed.as_dict(),
            "lower_bound": self.lower_bound.as_dict(),
            "r_star": self.r_star,
            "flags": self.flags(),
            "timings": self.timings,
        }


def survival_report(
    params: SimParams,
    n_paths: int,
    n_outer: int,
    m_inner: int,
    key: StreamKey,
    mode: str = "bridge",
    debias: bool = False,
    continuity_correction: bool = False,
    r_grid: Sequence[float] | None = None,
    threads: int | None = None,
    batch_size: int = 256,
) -> SurvivalReport:
    """Run all three routes on one parameter set.

    The direct route uses ``key.child(0)`` and the annealed route
    ``key.child(1)``, so the two estimates are independent.
    """
    timings = {}
    t0 = time.perf_counter()
    direct = direct_survival_estimate(
        params, n_paths, key.child(0), mode=mode, batch_size=batch_size, threads=threads
    )
    timings["direct"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    annealed = annealed_survival_estimate(
        params,
        n_outer,
        m_inner,
        key.child(1),
        debias=debias,
        continuity_correction=continuity_correction,
        threads=threads,
    )
    timings["annealed"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    r_star, bound = optimize_confinement_radius(params, r_grid)
    timings["lower_bound"] = time.perf_counter() - t0
    return SurvivalReport(params, direct, annealed, bound, r_star, timings)
