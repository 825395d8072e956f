import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from movingtraps.analytics import displacement_median
from movingtraps.conditional import (
    ConditionalSummary,
    DegenerateWeights,
    EventParamsA,
    EventParamsB,
    conditional_statistics,
    effective_sample_size,
    event_A_indicator,
    event_B_indicator,
    exponent_fit,
    theorem_trend_report,
    trend_statistics,
    weighted_kendall_tau,
    weighted_proportion,
    weighted_quantile,
)
from movingtraps.params import SimParams
from movingtraps.paths import InvalidParameter, PathGrid
from movingtraps.rng import StreamKey

walks = st.lists(st.floats(-3, 3, allow_subnormal=False), min_size=8, max_size=80)


def walk_path(steps, t=1.0):
    return PathGrid(t, len(steps), np.concatenate([[0.0], np.cumsum(steps)]))


def climb(h, n=1000, t=1.0):
    return PathGrid(t, n, np.linspace(0.0, h, n + 1))


def test_event_params_validation():
    with pytest.raises(InvalidParameter):
        EventParamsA(kappa=1.0)
    with pytest.raises(InvalidParameter):
        EventParamsB(f_exponent=0.5)
    b = EventParamsB()
    assert b.block_length(64.0) == pytest.approx(16 * 64**0.1)
    assert b.required(64.0) == math.ceil(0.5 * 4 / 64**0.1)


def test_fast_climb_is_a_traversal():
    # from h/2 to h takes 0.5, allowed k ((1-kappa) h)^2 = 1
    assert event_A_indicator(climb(2.0), EventParamsA()) == (True, "traversal")


def test_slow_climb_uses_occupation():
    p = EventParamsA(kappa=0.5, epsilon=0.4, k_diff=1.0)
    assert event_A_indicator(climb(0.5), p) == (True, "occupation")
    assert event_A_indicator(climb(0.5), EventParamsA(epsilon=0.9)) == (False, "none")


def test_negative_side_is_mirrored():
    assert event_A_indicator(climb(-2.0), EventParamsA()) == (True, "traversal")


def test_zero_path():
    assert event_A_indicator(PathGrid(1.0, 4, np.zeros(5)), EventParamsA()) == (False, "none")


@given(walks)
def test_event_a_reflection_invariant(steps):
    x = walk_path(steps)
    assert event_A_indicator(x, EventParamsA()) == event_A_indicator(x.mirrored(), EventParamsA())


@given(walks, st.floats(0.1, 2.0), st.floats(1.0, 3.0))
def test_event_b_monotone_in_k(steps, k, c):
    x = walk_path(steps, t=64.0)
    lo = event_B_indicator(x, EventParamsB(k_diff=k))[1]
    hi = event_B_indicator(x, EventParamsB(k_diff=k * c))[1]
    assert hi <= lo


@given(walks)
def test_greedy_never_counts_fewer(steps):
    x = walk_path(steps, t=64.0)
    p = EventParamsB(k_diff=0.3)
    assert event_B_indicator(x, p, greedy=True)[1] >= event_B_indicator(x, p)[1]


def test_event_b_on_a_line():
    # slope s: every block has range s * block
    t = 64.0
    p = EventParamsB(epsilon=0.5, k_diff=1.0, f_exponent=0.1)
    block, thr = p.block_length(t), p.threshold(t)
    n_blocks = int(t // block)
    fast = climb(2 * thr / block * t, n=4096, t=t)
    slow = climb(0.5 * thr / block * t, n=4096, t=t)
    assert event_B_indicator(fast, p) == (n_blocks >= p.required(t), n_blocks)
    assert event_B_indicator(slow, p) == (False, 0)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50), st.floats(0.0, 1.0))
def test_weighted_quantile_equal_weights(vals, q):
    v = np.array(vals)
    assert weighted_quantile(v, np.ones(len(v)), q) == np.quantile(v, q, method="inverted_cdf")


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=50), st.integers(1, 5))
def test_weighted_quantile_integer_weights_replicate(vals, rep):
    v = np.array(vals)
    w = np.arange(1, len(v) + 1) % rep + 1
    expanded = np.repeat(v, w)
    for q in (0.1, 0.5, 0.9):
        assert weighted_quantile(v, w, q) == np.quantile(expanded, q, method="inverted_cdf")


def test_weighted_proportion_and_ess():
    ind = np.array([1, 0, 1, 1, 0, 0, 0, 1.0])
    p, se = weighted_proportion(ind, np.ones(8))
    assert p == 0.5 and se == pytest.approx(math.sqrt(0.25 / 8))
    assert effective_sample_size(np.ones(10)) == pytest.approx(10)
    assert effective_sample_size(np.r_[1.0, np.zeros(9)]) == 1.0


def test_kendall_tau():
    t = [1, 2, 3, 4]
    assert weighted_kendall_tau(t, [4, 3, 2, 1], [0.1] * 4)[0] == pytest.approx(-1.0)
    tau, z = weighted_kendall_tau(t, [1, 2, 3, 4], [0.1] * 4)
    assert tau == pytest.approx(1.0) and z == pytest.approx(3 / math.sqrt(0.02))


def test_exponent_fit_noiseless():
    ts = [4.0, 16.0, 64.0, 256.0]
    fit = exponent_fit([(t, 2.0 * t ** (1 / 3)) for t in ts])
    assert fit.slope == pytest.approx(1 / 3, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(2.0), abs=1e-12)
    assert fit.ci_halfwidth == 0.0


def test_exponent_fit_with_replicates():
    rng = np.random.default_rng(0)
    ts = np.array([4.0, 16.0, 64.0, 256.0])
    reps = ts**0.4 * np.exp(rng.normal(0, 0.01, (500, 4)))
    fit = exponent_fit([(t, t**0.4) for t in ts], reps)
    assert fit.ci_low <= 0.4 <= fit.ci_high and fit.ci_halfwidth < 0.02
    with pytest.raises(InvalidParameter):
        exponent_fit([(1.0, 1.0), (2.0, 2.0)])
    with pytest.raises(InvalidParameter):
        exponent_fit([(1.0, 1.0), (2.0, -2.0), (3.0, 1.0)])


def _summary(t, p, se, fp):
    return ConditionalSummary(t, 1.0, 100, 50.0, {}, {}, 0, 0, 0, {"E": (p, se)}, {"E": (fp, se)})


def test_trend_statistics():
    tr = trend_statistics([_summary(16, 0.5, 0.01, 0.6), _summary(64, 0.4, 0.01, 0.6), _summary(256, 0.3, 0.01, 0.6)])
    assert tr["E"]["non_increasing"] and tr["E"]["below_free_at_max_t"]
    tr = trend_statistics([_summary(16, 0.3, 0.01, 0.2), _summary(64, 0.4, 0.01, 0.2), _summary(256, 0.5, 0.01, 0.2)])
    assert not tr["E"]["non_increasing"] and not tr["E"]["below_free_at_max_t"]


def test_lambda_zero_matches_free():
    p = SimParams(0.0, 0.1, 4.0, n_steps=256)
    summ, samples = conditional_statistics(p, 400, 8, EventParamsA(), EventParamsB(), StreamKey(3))
    assert np.all(samples.weights() == 1.0)
    assert summ.quantiles == summ.free_quantiles
    assert summ.events == summ.free_events
    assert summ.n_eff == pytest.approx(400)
    # median of sup|B| on [0, t] scales as sqrt(t); grid maxima run low by O(sqrt(dt))
    assert abs(summ.median - displacement_median(4.0)) <= 3 * summ.median_se + 0.6 * math.sqrt(4.0 / 256)


def test_conditioning_shrinks_displacement():
    p = SimParams(1.0, 0.1, 4.0, n_steps=512)
    summ, _ = conditional_statistics(p, 1000, 64, EventParamsA(), EventParamsB(), StreamKey(4))
    assert summ.free_median - summ.median > 3 * summ.median_gap_se
    assert summ.median >= summ.free_quantiles[0.1]
    for pv, se in summ.events.values():
        assert 0.0 <= pv <= 1.0 and se >= 0.0


def test_degenerate_weights_warn():
    p = SimParams(40.0, 0.1, 4.0, n_steps=128)
    with pytest.warns(DegenerateWeights):
        summ, _ = conditional_statistics(p, 100, 8, EventParamsA(), EventParamsB(), StreamKey(5))
    assert summ.warnings
    with pytest.raises(InvalidParameter):
        conditional_statistics(p, 99, 8, EventParamsA(), EventParamsB(), StreamKey(5))


def test_trend_report_structure():
    p = SimParams(1.0, 0.1, 4.0, n_steps=256)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWeights)
        rep = theorem_trend_report(p, [4.0, 8.0, 16.0], 200, 16, StreamKey(6), n_boot=50, b_k_sweep=(1.0,))
    assert rep.t_grid == (4.0, 8.0, 16.0)
    assert {"A", "B", "A_c3=1", "B_k=1"} <= set(rep.trends)
    for tr in rep.trends.values():
        assert all(0.0 <= v <= 1.0 for v in tr["p"] + tr["free_p"])
    assert rep.fit.ci_low <= rep.fit.slope <= rep.fit.ci_high
    with pytest.raises(InvalidParameter):
        theorem_trend_report(p, [4.0, 8.0], 200, 16, StreamKey(6))
