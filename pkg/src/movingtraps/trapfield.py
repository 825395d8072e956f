"""Moving Poissonian trap field and direct simulation of hard killing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._parallel import pmap
from .params import Estimate, SimParams
from .paths import InvalidParameter, PathGrid, brownian_increments, cumulate
from .rng import StreamKey

MODES = ("naive", "bridge")
# the difference of two independent unit-rate motions
DIFF_VAR_RATE = 2.0


@dataclass(frozen=True)
class TrapRealization:
    """Initial trap points in ``[-L, L]`` and one motion stream per point.

    Trap paths are generated on demand from ``motion_keys``. Each stream
    yields an exponential clock first, then the path increments.
    """

    initial_points: np.ndarray
    motion_keys: tuple[StreamKey, ...]
    halfwidth: float

    def __len__(self) -> int:
        return len(self.initial_points)

    def motion(self, i: int, t_end: float, n_steps: int) -> tuple[float, np.ndarray]:
        """(exponential clock, scaled increments) for trap ``i``."""
        gen = self.motion_keys[i].generator()
        clock = float(gen.standard_exponential())
        inc = brownian_increments(gen, 1, n_steps, t_end / n_steps)[0]
        return clock, inc

    def trap_path(self, i: int, t_end: float, n_steps: int) -> np.ndarray:
        """Absolute trap centre positions x_i + Y^i on the grid."""
        _, inc = self.motion(i, t_end, n_steps)
        return self.initial_points[i] + cumulate(inc)


def sample_initial_points(params: SimParams, key: StreamKey) -> TrapRealization:
    gen = key.generator()
    L = params.halfwidth
    count = int(gen.poisson(2.0 * params.lam * L))
    points = gen.uniform(-L, L, size=count)
    keys = tuple(key.child(i) for i in range(count))
    return TrapRealization(points, keys, L)


def simulate_kill_time(
    x_path: PathGrid, field: TrapRealization, params: SimParams, mode: str = "bridge"
) -> float:
    """First time the particle meets a trap, or ``inf`` if it survives to ``t_end``.

    In bridge mode, between grid points the difference process of each trap
    is treated as a Brownian bridge of variance rate 2 and can cross into
    the trap with the bridge crossing probability; the per-step Bernoulli
    kills are realized through one exponential clock per trap, which has
    the same law.
    """
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    if x_path.n_steps != params.n_steps or not math.isclose(x_path.t_end, params.t_end):
        raise InvalidParameter("x_path grid does not match params")
    best = -1
    stop = params.n_steps
    for i in range(len(field)):
        clock, inc = field.motion(i, params.t_end, params.n_steps)
        k = _kernels.kill_step(
            x_path.values,
            field.initial_points[i],
            inc,
            params.a,
            params.dt,
            DIFF_VAR_RATE,
            mode == "bridge",
            clock,
            stop,
        )
        if k >= 0:
            best, stop = k, k - 1
            if k == 0:
                break
    return math.inf if best < 0 else best * params.dt


def _direct_batch(
    params: SimParams, n: int, key: StreamKey, bridge: bool
) -> np.ndarray:
    gen = key.generator()
    xs = cumulate(brownian_increments(gen, n, params.n_steps, params.dt))
    L = params.halfwidth
    counts = gen.poisson(2.0 * params.lam * L, size=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    x0s = gen.uniform(-L, L, size=total)
    clocks = gen.standard_exponential(size=total)
    y_inc = brownian_increments(gen, total, params.n_steps, params.dt)
    return _kernels.survive_batch(
        xs, offsets, x0s, clocks, y_inc, params.a, params.dt, DIFF_VAR_RATE, bridge
    )


def direct_survival_estimate(
    params: SimParams,
    n_paths: int,
    key: StreamKey,
    mode: str = "bridge",
    batch_size: int = 256,
    threads: int | None = None,
) -> Estimate:
    """Fraction of independent (particle, field) pairs with no kill by ``t_end``.

    Paths are simulated in fixed-size batches, batch ``b`` drawing all of
    its randomness from ``key.child(b)``; the result depends on
    ``batch_size`` but not on ``threads``.
    """
    if n_paths < 1:
        raise InvalidParameter("n_paths must be >= 1")
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    sizes = [min(batch_size, n_paths - s) for s in range(0, n_paths, batch_size)]
    alive = pmap(
        lambda b: _direct_batch(params, sizes[b], key.child(b), mode == "bridge"),
        range(len(sizes)),
        threads,
    )
    survived = int(sum(int(a.sum()) for a in alive))
    p = survived / n_paths
    se = math.sqrt(p * (1.0 - p) / n_paths)
    return Estimate(p, se, n_paths, "direct", {"mode": mode, "survived": survived})
