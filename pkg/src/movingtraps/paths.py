"""Brownian paths on a uniform time grid and elementary path functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .rng import StreamKey

# -zeta(1/2) / sqrt(2 pi): limiting expected gap between the continuous
# maximum of Brownian motion and its maximum over a grid, in units of sqrt(dt).
BRIDGE_EXCESS = 0.5825971579390107


class InvalidParameter(ValueError):
    """A parameter violates an operation's precondition."""


@dataclass
class PathGrid:
    """A path sampled at ``n_steps + 1`` equally spaced times on ``[0, t_end]``."""

    t_end: float
    n_steps: int
    values: np.ndarray

    def __post_init__(self) -> None:
        self.t_end = float(self.t_end)
        self.n_steps = int(self.n_steps)
        self.values = np.asarray(self.values, dtype=float)
        if not self.t_end > 0:
            raise InvalidParameter(f"t_end must be positive, got {self.t_end}")
        if self.n_steps < 1:
            raise InvalidParameter(f"n_steps must be >= 1, got {self.n_steps}")
        if self.values.shape != (self.n_steps + 1,):
            raise InvalidParameter(
                f"expected {self.n_steps + 1} values, got shape {self.values.shape}"
            )
        if self.values[0] != 0.0:
            raise InvalidParameter("paths start at the origin")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def same_grid(self, other: PathGrid) -> bool:
        return self.n_steps == other.n_steps and math.isclose(self.t_end, other.t_end)

    def scaled(self, c: float) -> PathGrid:
        """Brownian rescaling: time by ``c**2``, space by ``c``."""
        return PathGrid(self.t_end * c * c, self.n_steps, self.values * c)

    def mirrored(self) -> PathGrid:
        return PathGrid(self.t_end, self.n_steps, -self.values)


def _check_grid(t_end: float, n_steps: int) -> None:
    if not t_end > 0:
        raise InvalidParameter(f"t_end must be positive, got {t_end}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise InvalidParameter(f"n_steps must be a positive integer, got {n_steps}")


def brownian_increments(
    gen: np.random.Generator, n_paths: int, n_steps: int, dt: float
) -> np.ndarray:
    inc = gen.standard_normal((n_paths, n_steps))
    inc *= math.sqrt(dt)
    return inc


def cumulate(increments: np.ndarray) -> np.ndarray:
    """Prepend the origin and integrate increments along the last axis."""
    shape = increments.shape[:-1] + (increments.shape[-1] + 1,)
    values = np.empty(shape)
    values[..., 0] = 0.0
    np.cumsum(increments, axis=-1, out=values[..., 1:])
    return values


def sample_brownian_paths(
    t_end: float, n_steps: int, n_paths: int, key: StreamKey
) -> np.ndarray:
    """Array of shape ``(n_paths, n_steps + 1)`` of independent standard paths.

    Row 0 coincides with ``sample_brownian_path(t_end, n_steps, key)``.
    """
    _check_grid(t_end, n_steps)
    gen = key.generator()
    return cumulate(brownian_increments(gen, n_paths, n_steps, t_end / n_steps))


def sample_brownian_path(t_end: float, n_steps: int, key: StreamKey) -> PathGrid:
    values = sample_brownian_paths(t_end, n_steps, 1, key)[0]
    return PathGrid(t_end, n_steps, values)


def bridge_hit_prob(x0, x1, dt, level, var_rate=1.0):
    """Probability that a Brownian bridge from ``x0`` to ``x1`` over ``dt`` touches ``level``.

    The bridge has variance ``var_rate`` per unit time. Endpoints on opposite
    sides of (or on) the level give probability one.
    """
    if np.any(np.asarray(dt) <= 0) or np.any(np.asarray(var_rate) <= 0):
        raise InvalidParameter("dt and var_rate must be positive")
    prod = (np.asarray(x0, dtype=float) - level) * (np.asarray(x1, dtype=float) - level)
    with np.errstate(over="ignore"):
        p = np.where(prod <= 0.0, 1.0, np.exp(-2.0 * np.maximum(prod, 0.0) / (var_rate * dt)))
    return p if p.ndim else float(p)


class Extrema(NamedTuple):
    max: float
    min: float
    argmax_time: float

    @property
    def displacement(self) -> float:
        """Maximal displacement from the origin."""
        return max(self.max, -self.min)

    @property
    def range(self) -> float:
        return self.max - self.min


def continuity_shift(dt: float, var_rate: float = 1.0) -> float:
    """Expected amount by which a grid maximum undershoots the continuous one."""
    return BRIDGE_EXCESS * math.sqrt(var_rate * dt)


def path_extrema(p: PathGrid, continuity_correction: bool = False) -> Extrema:
    """Grid maximum, minimum and first time the maximum is attained.

    With ``continuity_correction`` the extrema are pushed outward by the
    expected bridge excess, which removes the leading ``sqrt(dt)`` bias of
    averages of grid extrema.
    """
    v = p.values
    k = int(np.argmax(v))
    hi, lo = float(v[k]), float(v.min())
    if continuity_correction:
        shift = continuity_shift(p.dt)
        hi, lo = hi + shift, lo - shift
    return Extrema(hi, lo, k * p.dt)


def batch_extrema(values: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise (max, min, argmax_time) for a 2-D array of paths."""
    k = np.argmax(values, axis=1)
    return values.max(axis=1), values.min(axis=1), k * dt


def _snap(p: PathGrid, s: float) -> int:
    return int(np.clip(round(s / p.dt), 0, p.n_steps))


def interval_range(p: PathGrid, s0: float, s1: float) -> float:
    """``max - min`` of the path over ``[s0, s1]``, endpoints snapped to the grid."""
    if not 0 <= s0 < s1 <= p.t_end * (1 + 1e-12):
        raise InvalidParameter(f"need 0 <= s0 < s1 <= t_end, got ({s0}, {s1})")
    i0, i1 = _snap(p, s0), _snap(p, s1)
    if i1 <= i0:
        raise InvalidParameter(f"window ({s0}, {s1}) is empty on a grid with dt={p.dt}")
    w = p.values[i0 : i1 + 1]
    return float(w.max() - w.min())


def occupation_time(p: PathGrid, lo: float, hi: float) -> float:
    """Time spent strictly inside ``(lo, hi)``, left-endpoint rule."""
    if not lo < hi:
        raise InvalidParameter(f"need lo < hi, got ({lo}, {hi})")
    v = p.values[:-1]
    return float(np.count_nonzero((v > lo) & (v < hi)) * p.dt)
