"""Statistics of the particle conditioned on survival.

Conditioning uses self-normalized importance sampling: free Brownian paths
X are weighted by exp(-lam * Delta(X)), the only X-dependent factor of the
survival probability given X. Alongside weighted quantiles of the maximal
displacement the module detects two path events:

* A: the path crosses (kappa*|X|_t, |X|_t) at least diffusively fast, or
  spends at least epsilon*t inside that band;
* B: at least ceil(epsilon t^(1/3) / f(t)) blocks of length t^(2/3) f(t)
  carry a range of at least k t^(1/3) sqrt(f(t)).
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .params import SimParams
from .paths import InvalidParameter, PathGrid, interval_range, occupation_time
from .rng import StreamKey
from .sausage import OuterSample, map_outer

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
DEFAULT_C3 = (0.5, 1.0, 2.0)
MIN_NEFF = 50


class DegenerateWeights(UserWarning):
    pass


@dataclass(frozen=True)
class EventParamsA:
    kappa: float = 0.5
    epsilon: float = 0.5
    k_diff: float = 1.0

    def __post_init__(self) -> None:
        if not (0 < self.kappa < 1 and 0 < self.epsilon <= 1 and self.k_diff > 0):
            raise InvalidParameter(f"invalid event A parameters {self}")


@dataclass(frozen=True)
class EventParamsB:
    epsilon: float = 0.5
    k_diff: float = 0.5
    f_exponent: float = 0.1

    def __post_init__(self) -> None:
        if not (self.epsilon > 0 and self.k_diff > 0 and 0 < self.f_exponent < 1 / 3):
            raise InvalidParameter(f"invalid event B parameters {self}")

    def block_length(self, t: float) -> float:
        return t ** (2 / 3) * t**self.f_exponent

    def threshold(self, t: float) -> float:
        return self.k_diff * t ** (1 / 3) * math.sqrt(t**self.f_exponent)

    def required(self, t: float) -> int:
        return math.ceil(self.epsilon * t ** (1 / 3) / t**self.f_exponent - 1e-12)


# -- event detectors ---------------------------------------------------------


def _level_hits(v: np.ndarray, level: float) -> np.ndarray:
    """Grid indices where the path sits on ``level`` or is the nearer end of a crossing step."""
    d = v - level
    exact = np.flatnonzero(d == 0.0)
    cross = np.flatnonzero(d[:-1] * d[1:] < 0.0)
    nearer = np.where(np.abs(d[cross]) <= np.abs(d[cross + 1]), cross, cross + 1)
    return np.union1d(exact, nearer)


def _min_gap(a: np.ndarray, b: np.ndarray) -> int:
    """Smallest |i - j| over i in a, j in b (both sorted, non-empty)."""
    pos = np.searchsorted(b, a)
    right = b[np.minimum(pos, len(b) - 1)]
    left = b[np.maximum(pos - 1, 0)]
    return int(np.minimum(np.abs(right - a), np.abs(a - left)).min())


def _traversal(v: np.ndarray, disp: float, p: EventParamsA, dt: float) -> bool:
    lower = _level_hits(v, p.kappa * disp)
    upper = np.flatnonzero(v == disp)
    if lower.size == 0 or upper.size == 0:
        return False
    return _min_gap(lower, upper) * dt <= p.k_diff * ((1.0 - p.kappa) * disp) ** 2


def _max_sides(x_path: PathGrid) -> tuple[float, list[PathGrid]]:
    v = x_path.values
    hi, lo = float(v.max()), float(v.min())
    disp = max(hi, -lo)
    sides = []
    if hi >= -lo:
        sides.append(x_path)
    if -lo >= hi:
        sides.append(x_path.mirrored())
    return disp, sides


def event_A_indicator(x_path: PathGrid, p: EventParamsA) -> tuple[bool, str]:
    """(flag, via) where via is 'traversal', 'occupation' or 'none'.

    The path is mirrored when its maximal displacement is on the negative
    side; on an exact tie both orientations are tried.
    """
    disp, sides = _max_sides(x_path)
    if disp <= 0:
        return False, "none"
    if any(_traversal(s.values, disp, p, x_path.dt) for s in sides):
        return True, "traversal"
    need = p.epsilon * x_path.t_end
    if any(occupation_time(s, p.kappa * disp, disp) >= need for s in sides):
        return True, "occupation"
    return False, "none"


def event_B_indicator(
    x_path: PathGrid, p: EventParamsB, greedy: bool = False
) -> tuple[bool, int]:
    """(flag, number of qualifying blocks).

    Blocks tile [0, t] from the origin and a trailing partial block is
    dropped. With ``greedy`` the tiling is also tried at offsets of a
    quarter, half and three quarters of a block and the best count is kept.
    """
    t = x_path.t_end
    block = p.block_length(t)
    if block > t:
        return False, 0
    thr = p.threshold(t)
    offsets = (0.0, 0.25 * block, 0.5 * block, 0.75 * block) if greedy else (0.0,)
    best = 0
    for off in offsets:
        n_blocks = int(math.floor((t - off) / block + 1e-9))
        count = 0
        for j in range(n_blocks):
            s0 = off + j * block
            s1 = min(s0 + block, t)
            if interval_range(x_path, s0, s1) >= thr:
                count += 1
        best = max(best, count)
    return best >= p.required(t), best


# -- weighted estimators -----------------------------------------------------


def weighted_quantile(values, weights, q):
    """Smallest value v with weighted CDF(v) >= q (inverted-CDF rule).

    With equal weights this equals ``np.quantile(values, q, method='inverted_cdf')``.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    return _sorted_weighted_quantile(values[order], weights[order], q)


def _sorted_weighted_quantile(sorted_values, sorted_weights, q):
    cw = np.cumsum(sorted_weights)
    total = cw[-1]
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    # relative slack absorbs rounding in the cumulative sum
    idx = np.searchsorted(cw, qs * total * (1 - 1e-12), side="left")
    out = sorted_values[np.minimum(idx, len(sorted_values) - 1)]
    return out if np.ndim(q) else float(out[0])


def weighted_proportion(indicator, weights) -> tuple[float, float]:
    """Self-normalized mean of an indicator and its delta-method standard error."""
    ind = np.asarray(indicator, dtype=float)
    w = np.asarray(weights, dtype=float)
    sw = w.sum()
    p = float((w * ind).sum() / sw)
    se = float(math.sqrt((w**2 * (ind - p) ** 2).sum()) / sw)
    return p, se


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / (w**2).sum())


# -- samples -----------------------------------------------------------------


@dataclass(frozen=True)
class WeightedSample:
    max_disp: float
    running_max: float
    argmax_time: float
    weight: float
    delta: float
    delta_se: float
    event_flags: dict[str, bool]


def _summarize(
    o: OuterSample,
    lam: float,
    event_a: EventParamsA,
    event_b: EventParamsB,
    c3_values: Sequence[float],
    greedy: bool,
    b_k_sweep: Sequence[float] = (),
) -> WeightedSample:
    x = o.x
    v = x.values
    k = int(np.argmax(v))
    hi, lo = float(v[k]), float(v.min())
    disp = max(hi, -lo)
    a_flag, via = event_A_indicator(x, event_a)
    b_flag, b_count = event_B_indicator(x, event_b, greedy)
    t = x.t_end
    flags = {
        "A": a_flag,
        "A_traversal": via == "traversal",
        "A_occupation": via == "occupation",
        "B": b_flag,
    }
    for c3 in c3_values:
        flags[f"A_c3={c3:g}"] = a_flag and disp >= c3 * t ** (4 / 9)
    for k_b in b_k_sweep:
        flags[f"B_k={k_b:g}"] = event_B_indicator(x, replace(event_b, k_diff=k_b), greedy)[0]
    return WeightedSample(
        max_disp=disp,
        running_max=hi,
        argmax_time=k * x.dt,
        weight=math.exp(-lam * o.delta.value),
        delta=o.delta.value,
        delta_se=o.delta.std_err,
        event_flags=flags,
    )


@dataclass
class SampleSet:
    """Column view of many :class:`WeightedSample` records at one t."""

    t: float
    lam: float
    max_disp: np.ndarray
    running_max: np.ndarray
    argmax_time: np.ndarray
    delta: np.ndarray
    delta_se: np.ndarray
    flags: dict[str, np.ndarray]

    @classmethod
    def from_samples(cls, t: float, lam: float, samples: Sequence[WeightedSample]) -> SampleSet:
        names = list(samples[0].event_flags)
        return cls(
            t=t,
            lam=lam,
            max_disp=np.array([s.max_disp for s in samples]),
            running_max=np.array([s.running_max for s in samples]),
            argmax_time=np.array([s.argmax_time for s in samples]),
            delta=np.array([s.delta for s in samples]),
            delta_se=np.array([s.delta_se for s in samples]),
            flags={n: np.array([s.event_flags[n] for s in samples]) for n in names},
        )

    def __len__(self) -> int:
        return len(self.max_disp)

    def weights(self, debias: bool = False) -> np.ndarray:
        """exp(-lam Delta), rescaled so the largest weight is one."""
        logw = -self.lam * self.delta
        w = np.exp(logw - logw.max())
        if debias:
            w = w * (1.0 - 0.5 * (self.lam * self.delta_se) ** 2)
        return w


def sample_conditional(
    params: SimParams,
    n_outer: int,
    m_inner: int,
    key: StreamKey,
    event_a: EventParamsA = EventParamsA(),
    event_b: EventParamsB = EventParamsB(),
    c3_values: Sequence[float] = DEFAULT_C3,
    greedy: bool = False,
    threads: int | None = None,
    b_k_sweep: Sequence[float] = (),
) -> SampleSet:
    """Outer paths with their weights and event flags.

    Flags: ``A``, ``A_traversal``, ``A_occupation``, ``B``, one
    ``A_c3=<c>`` per threshold constant and one ``B_k=<k>`` per extra
    block-range constant in ``b_k_sweep``.
    """
    samples = map_outer(
        params,
        n_outer,
        m_inner,
        key,
        lambda o: _summarize(o, params.lam, event_a, event_b, c3_values, greedy, b_k_sweep),
        threads,
    )
    return SampleSet.from_samples(params.t_end, params.lam, samples)


# -- summaries ---------------------------------------------------------------


def _bootstrap_medians(
    values: np.ndarray, weights: np.ndarray, n_boot: int, key: StreamKey
) -> tuple[np.ndarray, np.ndarray]:
    """Paired bootstrap replicates of (weighted median, unweighted median)."""
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    gen = key.generator()
    n = len(v)
    wm = np.empty(n_boot)
    um = np.empty(n_boot)
    for b in range(n_boot):
        mult = np.bincount(gen.integers(0, n, n), minlength=n).astype(float)
        wm[b] = _sorted_weighted_quantile(v, w * mult, 0.5)
        um[b] = _sorted_weighted_quantile(v, mult, 0.5)
    return wm, um


@dataclass
class ConditionalSummary:
    t: float
    lam: float
    n: int
    n_eff: float
    quantiles: dict[float, float]
    free_quantiles: dict[float, float]
    median_se: float
    free_median_se: float
    median_gap_se: float
    events: dict[str, tuple[float, float]]
    free_events: dict[str, tuple[float, float]]
    warnings: list[str] = field(default_factory=list)

    @property
    def median(self) -> float:
        return self.quantiles[0.5]

    @property
    def free_median(self) -> float:
        return self.free_quantiles[0.5]

    def as_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "lam": self.lam,
            "n": self.n,
            "n_eff": self.n_eff,
            "quantiles": {str(q): v for q, v in self.quantiles.items()},
            "free_quantiles": {str(q): v for q, v in self.free_quantiles.items()},
            "median_se": self.median_se,
            "free_median_se": self.free_median_se,
            "median_gap_se": self.median_gap_se,
            "events": {k: {"p": p, "se": se} for k, (p, se) in self.events.items()},
            "free_events": {k: {"p": p, "se": se} for k, (p, se) in self.free_events.items()},
            "warnings": self.warnings,
        }


def summarize(
    samples: SampleSet, key: StreamKey, n_boot: int = 200, debias: bool = False
) -> ConditionalSummary:
    """Weighted and unweighted summaries of one sample set.

    Median standard errors come from a paired bootstrap over outer paths,
    so ``median_gap_se`` accounts for the two medians sharing one sample.
    """
    w = samples.weights(debias)
    ones = np.ones(len(samples))
    n_eff = effective_sample_size(w)
    notes = []
    if n_eff < MIN_NEFF:
        msg = f"effective sample size {n_eff:.1f} < {MIN_NEFF} at t={samples.t:g}"
        notes.append(msg)
        warnings.warn(msg, DegenerateWeights, stacklevel=2)
    qs = weighted_quantile(samples.max_disp, w, QUANTILES)
    fqs = weighted_quantile(samples.max_disp, ones, QUANTILES)
    wm, um = _bootstrap_medians(samples.max_disp, w, n_boot, key)
    return ConditionalSummary(
        t=samples.t,
        lam=samples.lam,
        n=len(samples),
        n_eff=n_eff,
        quantiles=dict(zip(QUANTILES, map(float, qs))),
        free_quantiles=dict(zip(QUANTILES, map(float, fqs))),
        median_se=float(wm.std(ddof=1)),
        free_median_se=float(um.std(ddof=1)),
        median_gap_se=float((um - wm).std(ddof=1)),
        events={k: weighted_proportion(f, w) for k, f in samples.flags.items()},
        free_events={k: weighted_proportion(f, ones) for k, f in samples.flags.items()},
        warnings=notes,
    )


def conditional_statistics(
    params: SimParams,
    n_outer: int,
    m_inner: int,
    event_a: EventParamsA,
    event_b: EventParamsB,
    key: StreamKey,
    c3_values: Sequence[float] = DEFAULT_C3,
    greedy: bool = False,
    debias: bool = False,
    n_boot: int = 200,
    threads: int | None = None,
    b_k_sweep: Sequence[float] = (),
) -> tuple[ConditionalSummary, SampleSet]:
    """Weighted quantiles of |X|_t and event probabilities given survival.

    Samples come from ``key.child(0)``, bootstrap draws from ``key.child(1)``.
    """
    if n_outer < 100:
        raise InvalidParameter("n_outer must be >= 100")
    samples = sample_conditional(
        params, n_outer, m_inner, key.child(0), event_a, event_b, c3_values, greedy, threads, b_k_sweep
    )
    return summarize(samples, key.child(1), n_boot, debias), samples


# -- scaling exponent --------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    ci_halfwidth: float
    t_grid: tuple[float, ...]
    ci_low: float
    ci_high: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci_halfwidth": self.ci_halfwidth,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "t_grid": list(self.t_grid),
        }


def _loglog_fit(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(np.log(t), np.log(y), 1)
    return float(slope), float(intercept)


def exponent_fit(
    points: Sequence[tuple[float, float]],
    replicates: np.ndarray | None = None,
    level: float = 0.95,
) -> ExponentFit:
    """Least-squares slope of log(median) against log(t).

    ``replicates`` has shape (n_boot, len(points)); each row is one bootstrap
    replicate of the medians and the percentile interval of the refitted
    slopes gives the confidence interval. Without replicates the interval
    has zero width.
    """
    pts = sorted(points)
    t = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if len(t) < 3:
        raise InvalidParameter("need at least three points")
    if np.any(np.diff(t) <= 0):
        raise InvalidParameter("t values must be distinct")
    if np.any(y <= 0):
        raise InvalidParameter("medians must be positive")
    slope, intercept = _loglog_fit(t, y)
    lo = hi = slope
    if replicates is not None:
        reps = np.asarray(replicates, dtype=float)
        order = np.argsort([p[0] for p in points])
        reps = reps[:, order]
        slopes = np.polyfit(np.log(t), np.log(reps.T), 1)[0]
        alpha = 1.0 - level
        lo, hi = (float(v) for v in np.quantile(slopes, [alpha / 2, 1 - alpha / 2]))
    return ExponentFit(slope, intercept, (hi - lo) / 2.0, tuple(t), lo, hi)


def bootstrap_median_replicates(
    sample_sets: Sequence[SampleSet],
    key: StreamKey,
    n_boot: int = 1000,
    n_batches: int = 20,
    debias: bool = False,
) -> np.ndarray:
    """(n_boot, n_t) weighted medians, resampling contiguous batches of outer paths within each t."""
    out = np.empty((n_boot, len(sample_sets)))
    for j, s in enumerate(sample_sets):
        gen = key.child(j).generator()
        w = s.weights(debias)
        order = np.argsort(s.max_disp, kind="stable")
        v, ws = s.max_disp[order], w[order]
        batch_of = (np.arange(len(s)) * n_batches // len(s))[order]
        for b in range(n_boot):
            counts = np.bincount(gen.integers(0, n_batches, n_batches), minlength=n_batches)
            out[b, j] = _sorted_weighted_quantile(v, ws * counts[batch_of], 0.5)
    return out


# -- trends ------------------------------------------------------------------


def weighted_kendall_tau(t, p, se) -> tuple[float, float]:
    """Precision-weighted Kendall tau of p against t, and the largest upward z-score.

    Pair (i, j) gets weight 1 / (se_i^2 + se_j^2).
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    se = np.asarray(se, dtype=float)
    num = den = 0.0
    max_z = -math.inf
    for i in range(len(t)):
        for j in range(i + 1, len(t)):
            var = se[i] ** 2 + se[j] ** 2
            wij = 1.0 / var if var > 0 else 1.0
            direction = np.sign(t[j] - t[i]) * np.sign(p[j] - p[i])
            num += wij * direction
            den += wij
            diff = (p[j] - p[i]) * np.sign(t[j] - t[i])
            z = diff / math.sqrt(var) if var > 0 else (math.inf if diff > 0 else -math.inf if diff < 0 else 0.0)
            max_z = max(max_z, z)
    return (num / den if den else 0.0), max_z


@dataclass
class TrendReport:
    t_grid: tuple[float, ...]
    summaries: list[ConditionalSummary]
    trends: dict[str, dict[str, Any]]
    fit: ExponentFit

    def as_dict(self) -> dict[str, Any]:
        return {
            "t_grid": list(self.t_grid),
            "summaries": [s.as_dict() for s in self.summaries],
            "trends": self.trends,
            "fit": self.fit.as_dict(),
        }


def trend_statistics(
    summaries: Sequence[ConditionalSummary], z_noise: float = 3.0
) -> dict[str, dict[str, Any]]:
    """Per event: conditional and free probabilities across t with trend statistics.

    An event counts as non-increasing when no later horizon exceeds an
    earlier one by more than ``z_noise`` combined standard errors; the
    weighted Kendall tau is reported alongside.
    """
    ts = [s.t for s in summaries]
    out = {}
    for name in summaries[0].events:
        p = [s.events[name][0] for s in summaries]
        se = [s.events[name][1] for s in summaries]
        fp = [s.free_events[name][0] for s in summaries]
        fse = [s.free_events[name][1] for s in summaries]
        tau, max_z = weighted_kendall_tau(ts, p, se)
        last_gap = p[-1] - fp[-1]
        last_se = math.sqrt(se[-1] ** 2 + fse[-1] ** 2)
        out[name] = {
            "p": p,
            "se": se,
            "free_p": fp,
            "free_se": fse,
            "kendall_tau": tau,
            "max_increase_z": max_z,
            "non_increasing": bool(max_z <= z_noise),
            "below_free_at_max_t": bool(last_gap <= z_noise * last_se),
        }
    return out


def theorem_trend_report(
    params: SimParams,
    t_grid: Sequence[float],
    n_outer: int,
    m_inner: int,
    key: StreamKey,
    event_a: EventParamsA = EventParamsA(),
    event_b: EventParamsB = EventParamsB(),
    c3_values: Sequence[float] = DEFAULT_C3,
    n_steps: int | None = None,
    greedy: bool = False,
    debias: bool = False,
    n_boot: int = 1000,
    threads: int | None = None,
    b_k_sweep: Sequence[float] = (),
) -> TrendReport:
    """Conditional event probabilities and medians over a grid of horizons.

    Horizon ``t_grid[j]`` uses ``key.child(j)``; ``n_steps`` (default: that
    of ``params``) is held fixed across horizons.
    """
    if len(t_grid) < 3:
        raise InvalidParameter("t_grid needs at least three horizons")
    steps = params.n_steps if n_steps is None else n_steps
    summaries, sets = [], []
    for j, t in enumerate(t_grid):
        p = params.with_(t_end=t, n_steps=steps)
        summ, samples = conditional_statistics(
            p,
            n_outer,
            m_inner,
            event_a,
            event_b,
            key.child(j),
            c3_values,
            greedy,
            debias,
            threads=threads,
            b_k_sweep=b_k_sweep,
        )
        summaries.append(summ)
        sets.append(samples)
    reps = bootstrap_median_replicates(sets, key.child(len(t_grid)), n_boot, debias=debias)
    fit = exponent_fit([(s.t, s.median) for s in summaries], reps)
    return TrendReport(tuple(float(t) for t in t_grid), summaries, trend_statistics(summaries), fit)
