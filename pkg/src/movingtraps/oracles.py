"""Independent Monte Carlo and quadrature checks of the closed forms.

Each function returns a plain record so that the validation suite and the
tests can compare against :mod:`movingtraps.analytics` at their own
tolerances.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from . import _kernels
from ._parallel import pmap
from .analytics import (
    argmax_density,
    confinement_prob,
    conditioned_positive_transition,
    first_passage_density,
    max_argmax_density,
)
from .params import Estimate
from .paths import BRIDGE_EXCESS, InvalidParameter, brownian_increments, cumulate
from .rng import StreamKey


def _chunks(n: int, size: int) -> list[int]:
    return [min(size, n - s) for s in range(0, n, size)]


def mc_expected_range(
    t: float,
    n_paths: int,
    n_steps: int,
    key: StreamKey,
    continuity_correction: bool = True,
    chunk: int = 2048,
    threads: int | None = None,
) -> Estimate:
    """Mean of max - min over Brownian paths on [0, t].

    Chunk ``c`` draws from ``key.child(c)``. With ``continuity_correction``
    each grid range is widened by 2 * BRIDGE_EXCESS * sqrt(dt), the expected
    undershoot of both grid extrema.
    """
    if n_paths < 2 or n_steps < 1 or not t > 0:
        raise InvalidParameter("need t > 0, n_paths >= 2, n_steps >= 1")
    dt = t / n_steps
    sizes = _chunks(n_paths, chunk)

    def run(c: int) -> tuple[float, float]:
        v = cumulate(brownian_increments(key.child(c).generator(), sizes[c], n_steps, dt))
        r = v.max(axis=1) - v.min(axis=1)
        return float(r.sum()), float((r * r).sum())

    parts = pmap(run, range(len(sizes)), threads)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n_paths
    var = max(s2 / n_paths - mean * mean, 0.0) * n_paths / (n_paths - 1)
    shift = 2.0 * BRIDGE_EXCESS * math.sqrt(dt) if continuity_correction else 0.0
    return Estimate(
        mean + shift,
        math.sqrt(var / n_paths),
        n_paths,
        "mc_range",
        {"grid_mean": mean, "shift": shift, "n_steps": n_steps},
    )


def mc_confinement(
    r: float,
    t: float,
    n_paths: int,
    n_steps: int,
    key: StreamKey,
    bridge: bool = True,
    chunk: int = 4096,
    threads: int | None = None,
) -> Estimate:
    """Fraction of Brownian paths that stay inside (-r, r) up to t.

    In bridge mode an exit between grid points is detected with the bridge
    crossing probability of each barrier.
    """
    if not (r > 0 and t > 0) or n_paths < 1 or n_steps < 1:
        raise InvalidParameter("need r, t > 0, n_paths >= 1, n_steps >= 1")
    dt = t / n_steps
    sizes = _chunks(n_paths, chunk)

    def run(c: int) -> int:
        gen = key.child(c).generator()
        v = cumulate(brownian_increments(gen, sizes[c], n_steps, dt))
        u = gen.random(sizes[c])
        return int(np.count_nonzero(~_kernels.absorbed_batch(v, r, dt, 1.0, bridge, u)))

    kept = sum(pmap(run, range(len(sizes)), threads))
    p = kept / n_paths
    return Estimate(p, math.sqrt(p * (1 - p) / n_paths), n_paths, "mc_confinement", {"bridge": bridge})


def density_masses(t: float = 1.0, x: float = 1.0, s: float = 0.5) -> dict[str, float]:
    """Total mass of each density by adaptive quadrature; every value should be 1."""
    argmax_mass = integrate.quad(lambda u: argmax_density(u, t), 0.0, t, limit=200, epsabs=1e-12)[0]
    fp_mass = integrate.quad(lambda u: first_passage_density(x, u), 0.0, np.inf, limit=400, epsabs=1e-12)[0]
    # u = t sin^2(th) removes the arcsine endpoint singularities
    joint_mass = integrate.dblquad(
        lambda m, th: max_argmax_density(m, t * math.sin(th) ** 2, t) * 2 * t * math.sin(th) * math.cos(th),
        0.0,
        math.pi / 2,
        0.0,
        np.inf,
        epsabs=1e-12,
        epsrel=1e-10,
    )[0]
    cond_mass = integrate.quad(
        lambda y: conditioned_positive_transition(x, y, s, t), 0.0, np.inf, limit=400, epsabs=1e-12
    )[0]
    return {
        "argmax": float(argmax_mass),
        "first_passage": float(fp_mass),
        "max_argmax": float(joint_mass),
        "conditioned_positive": float(cond_mass),
    }


def joint_marginal_error(t: float = 1.0, n_points: int = 20) -> float:
    """Largest gap between the m-integral of the joint density and the arcsine density."""
    us = np.linspace(0.025, 0.975, n_points) * t
    gaps = []
    for u in us:
        marg = integrate.quad(lambda m: max_argmax_density(m, u, t), 0.0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
        gaps.append(abs(marg - argmax_density(u, t)))
    return float(max(gaps))


def confinement_log_slope(t1: float = 20.0, t2: float = 40.0, r: float = 1.0) -> float:
    """d log P(sup|B| < r) / d(t / r^2) from two large horizons."""
    c1, c2 = confinement_prob(r, t1), confinement_prob(r, t2)
    return (math.log(c2) - math.log(c1)) / ((t2 - t1) / (r * r))
