"""Wiener sausage length and the annealed survival weight.

Integrating out the Poisson field gives

    P(T > t | X) = exp(-lam * E_Y |W_X(t)|),   |W_X(t)| = |R_t(Y + X)| + 2a,

and E_Y|R_t(Y + X)| = E|R_t| + Delta(X) with

    Delta(X) = E_Y[sup(Y + X) + sup(Y - X) - 2 sup Y].

Only Delta(X) needs Monte Carlo; everything else is closed form.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass
from typing import TypeVar

import numpy as np

from . import _kernels
from ._parallel import pmap
from .analytics import expected_range
from .params import Estimate, SimParams
from .paths import (
    BRIDGE_EXCESS,
    InvalidParameter,
    PathGrid,
    brownian_increments,
    sample_brownian_path,
)
from .rng import StreamKey

T = TypeVar("T")


class BiasWarning(UserWarning):
    """The convexity bias of the annealed estimator is not small against its SE."""


@dataclass(frozen=True)
class DeltaEstimate:
    value: float
    std_err: float
    inner_count: int

    def __post_init__(self) -> None:
        if self.inner_count < 1 or self.std_err < 0:
            raise ValueError("need inner_count >= 1 and std_err >= 0")


def _require_same_grid(x: PathGrid, y: PathGrid) -> None:
    if not x.same_grid(y):
        raise InvalidParameter("paths live on different grids")


def sausage_volume_given_paths(x_path: PathGrid, y_path: PathGrid, a: float) -> float:
    _require_same_grid(x_path, y_path)
    s = y_path.values + x_path.values
    return float(s.max() - s.min()) + 2.0 * a


def delta_sample(x_path: PathGrid, y_path: PathGrid) -> float:
    """sup(Y+X) + sup(Y-X) - 2 sup Y for one Y; negative values are possible."""
    _require_same_grid(x_path, y_path)
    x, y = x_path.values, y_path.values
    return float((y + x).max() + (y - x).max() - 2.0 * y.max())


def delta_samples(x_path: PathGrid, m_inner: int, key: StreamKey) -> np.ndarray:
    gen = key.generator()
    y_inc = brownian_increments(gen, m_inner, x_path.n_steps, x_path.dt)
    return _kernels.delta_samples(x_path.values, y_inc)


def delta_functional(x_path: PathGrid, m_inner: int, key: StreamKey) -> DeltaEstimate:
    """Mean and standard error of :func:`delta_sample` over ``m_inner`` fresh Y paths.

    The three suprema of each sample share one Y path.
    """
    if m_inner < 2:
        raise InvalidParameter("m_inner must be >= 2")
    s = delta_samples(x_path, m_inner, key)
    return DeltaEstimate(float(s.mean()), float(s.std(ddof=1) / math.sqrt(m_inner)), m_inner)


def grid_delta_shift(dt: float) -> float:
    """Leading-order amount by which grid suprema underestimate Delta on average.

    Y + X and Y - X have variance rate 2, Y has rate 1, so the expected
    grid undershoot of the combination is 2 * BRIDGE_EXCESS * (sqrt 2 - 1) * sqrt(dt).
    """
    return 2.0 * BRIDGE_EXCESS * (math.sqrt(2.0) - 1.0) * math.sqrt(dt)


def conditional_weight(delta: DeltaEstimate, lam: float, debias: bool = False) -> float:
    """exp(-lam * Delta), the X-dependent part of the survival weight.

    ``debias`` multiplies by (1 - lam^2 se^2 / 2), the first-order correction
    for plugging a noisy mean into a convex function.
    """
    w = math.exp(-lam * delta.value)
    if debias:
        w *= 1.0 - 0.5 * (lam * delta.std_err) ** 2
    return w


def survival_weight(delta: DeltaEstimate, params: SimParams, debias: bool = False) -> float:
    """P(T > t | X) = exp(-lam (E|R_t| + Delta + 2a))."""
    base = math.exp(-params.lam * (expected_range(params.t_end) + 2.0 * params.a))
    return base * conditional_weight(delta, params.lam, debias)


@dataclass(frozen=True)
class OuterSample:
    """One outer path together with its inner Delta estimate."""

    x: PathGrid
    delta: DeltaEstimate


def simulate_outer(params: SimParams, index: int, m_inner: int, key: StreamKey) -> OuterSample:
    """Outer path ``index``: X from ``key.child(index, 0)``, its Y batch from ``key.child(index, 1)``."""
    k = key.child(index)
    x = sample_brownian_path(params.t_end, params.n_steps, k.child(0))
    return OuterSample(x, delta_functional(x, m_inner, k.child(1)))


def map_outer(
    params: SimParams,
    n_outer: int,
    m_inner: int,
    key: StreamKey,
    fn: Callable[[OuterSample], T],
    threads: int | None = None,
    chunk: int = 64,
) -> list[T]:
    """Apply ``fn`` to outer samples ``0 .. n_outer-1`` in index order.

    Only ``fn``'s results are kept, so summaries of long runs do not hold
    every path in memory.
    """
    starts = range(0, n_outer, chunk)
    parts = pmap(
        lambda s: [fn(simulate_outer(params, i, m_inner, key)) for i in range(s, min(s + chunk, n_outer))],
        starts,
        threads,
    )
    return [r for part in parts for r in part]


def _delta_pair(o: OuterSample) -> tuple[float, float]:
    return o.delta.value, o.delta.std_err


def annealed_from_deltas(
    params: SimParams,
    deltas: np.ndarray,
    delta_ses: np.ndarray,
    debias: bool = False,
    continuity_correction: bool = False,
) -> Estimate:
    lam = params.lam
    n = len(deltas)
    shift = grid_delta_shift(params.dt) if continuity_correction else 0.0
    base = math.exp(-lam * (expected_range(params.t_end) + 2.0 * params.a))
    w = base * np.exp(-lam * (deltas + shift))
    if debias:
        w = w * (1.0 - 0.5 * (lam * delta_ses) ** 2)
    value = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(n))
    # relative size of the upward convexity bias, and the same in absolute units
    bias = float(lam**2 * np.mean(delta_ses**2) / 2.0)
    bias_abs = float(np.mean(w * 0.5 * (lam * delta_ses) ** 2))
    extras = {
        "bias_diagnostic": bias,
        "bias_abs": bias_abs,
        "bias_warning": bool(bias_abs > se / 3.0),
        "delta_mean": float(deltas.mean()),
        "delta_mean_se": float(deltas.std(ddof=1) / math.sqrt(n)),
        "grid_shift": shift,
        "debias": debias,
    }
    return Estimate(value, se, n, "annealed", extras)


def annealed_survival_estimate(
    params: SimParams,
    n_outer: int,
    m_inner: int,
    key: StreamKey,
    debias: bool = False,
    continuity_correction: bool = False,
    threads: int | None = None,
) -> Estimate:
    """Mean over outer paths of the survival weight with Monte Carlo Delta.

    ``extras['bias_diagnostic']`` is the plug-in relative size
    lam^2 mean(se^2)/2 of the upward convexity bias and ``extras['bias_abs']``
    the same bias in probability units; a :class:`BiasWarning` is issued
    when the latter exceeds a third of the standard error. ``continuity_correction`` adds
    :func:`grid_delta_shift` to each Delta, matching the continuous-time
    model to leading order in sqrt(dt).
    """
    if n_outer < 2 or m_inner < 2:
        raise InvalidParameter("n_outer and m_inner must be >= 2")
    if params.lam == 0:
        return Estimate(1.0, 0.0, n_outer, "annealed", {"bias_diagnostic": 0.0, "bias_abs": 0.0, "bias_warning": False})
    pairs = np.array(map_outer(params, n_outer, m_inner, key, _delta_pair, threads))
    deltas, ses = pairs[:, 0], pairs[:, 1]
    est = annealed_from_deltas(params, deltas, ses, debias, continuity_correction)
    if est.extras["bias_warning"]:
        warnings.warn(
            f"convexity bias {est.extras['bias_abs']:.3g} exceeds SE/3 "
            f"({est.std_err / 3:.3g}); raise m_inner",
            BiasWarning,
            stacklevel=2,
        )
    return est
