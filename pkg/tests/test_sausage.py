import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from movingtraps.analytics import expected_range
from movingtraps.params import SimParams, combined_se
from movingtraps.paths import BRIDGE_EXCESS, InvalidParameter, PathGrid, sample_brownian_path
from movingtraps.rng import StreamKey
from movingtraps.sausage import (
    BiasWarning,
    DeltaEstimate,
    annealed_from_deltas,
    annealed_survival_estimate,
    conditional_weight,
    delta_functional,
    delta_sample,
    delta_samples,
    grid_delta_shift,
    sausage_volume_given_paths,
    survival_weight,
)
from movingtraps.trapfield import direct_survival_estimate

paths3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3)


def grid(vals, t=1.0):
    return PathGrid(t, len(vals), np.array([0.0] + list(vals)))


def test_single_ball():
    z = grid([0.0, 0.0])
    assert sausage_volume_given_paths(z, z, 0.5) == 1.0


def test_zero_drift_is_plain_sausage(key):
    y = sample_brownian_path(1.0, 64, key)
    z = PathGrid(1.0, 64, np.zeros(65))
    assert sausage_volume_given_paths(z, y, 0.1) == pytest.approx(np.ptp(y.values) + 0.2)


@given(paths3, paths3, st.floats(0, 2))
def test_volume_at_least_two_a(x, y, a):
    assert sausage_volume_given_paths(grid(x), grid(y), a) >= 2 * a


@given(paths3, paths3)
def test_delta_sample_nonnegative_on_a_grid(x, y):
    # at the argmax k of Y, sup(Y+X) + sup(Y-X) >= 2 Y_k
    assert delta_sample(grid(x), grid(y)) >= -1e-12


def test_mismatched_grids():
    with pytest.raises(InvalidParameter):
        delta_sample(grid([1.0, 2.0]), grid([1.0, 2.0, 3.0]))
    with pytest.raises(InvalidParameter):
        sausage_volume_given_paths(grid([1.0]), grid([1.0], t=2.0), 0.1)


def test_delta_of_zero_path_is_zero(key):
    z = PathGrid(1.0, 128, np.zeros(129))
    assert np.all(delta_samples(z, 50, key) == 0.0)
    d = delta_functional(z, 50, key)
    assert d.value == 0.0 and d.std_err == 0.0


def test_kernel_matches_python(key):
    x = sample_brownian_path(1.0, 64, key.child(0))
    s = delta_samples(x, 20, key.child(1))
    from movingtraps.paths import brownian_increments, cumulate

    ys = cumulate(brownian_increments(key.child(1).generator(), 20, 64, 1 / 64))
    ref = [delta_sample(x, PathGrid(1.0, 64, y)) for y in ys]
    assert np.allclose(s, ref, atol=1e-12)


def test_straight_climb_is_positive(key):
    x = PathGrid(1.0, 256, np.linspace(0.0, 5.0, 257))
    d = delta_functional(x, 10_000, key)
    assert d.value > 3 * d.std_err


def test_delta_estimate_validation():
    with pytest.raises(ValueError):
        DeltaEstimate(0.0, -1.0, 3)
    with pytest.raises(ValueError):
        DeltaEstimate(0.0, 0.0, 0)
    with pytest.raises(InvalidParameter):
        delta_functional(grid([1.0]), 1, StreamKey(1))


def test_grid_shift_value():
    assert grid_delta_shift(0.01) == pytest.approx(2 * BRIDGE_EXCESS * (math.sqrt(2) - 1) * 0.1)


def test_weights():
    d = DeltaEstimate(0.3, 0.2, 10)
    assert conditional_weight(d, 2.0) == pytest.approx(math.exp(-0.6))
    assert conditional_weight(d, 2.0, debias=True) == pytest.approx(math.exp(-0.6) * (1 - 0.08))
    zero = DeltaEstimate(0.0, 0.0, 10)
    w = survival_weight(zero, SimParams(1.0, 0.1, 1.0))
    assert w == pytest.approx(math.exp(-(math.sqrt(8 / math.pi) + 0.2)), rel=1e-14)
    assert w == pytest.approx(0.1660, abs=5e-5)


def test_lambda_zero_is_one(key):
    est = annealed_survival_estimate(SimParams(0.0, 0.1, 1.0, n_steps=64), 10, 4, key)
    assert est.value == 1.0 and est.std_err == 0.0


def test_annealed_thread_invariance(key):
    p = SimParams(0.5, 0.1, 1.0, n_steps=128)
    a = annealed_survival_estimate(p, 200, 32, key, threads=1)
    b = annealed_survival_estimate(p, 200, 32, key, threads=4)
    assert a.value == b.value and a.std_err == b.std_err


def test_annealed_value_bounds(key):
    p = SimParams(0.5, 0.1, 1.0, n_steps=128)
    est = annealed_survival_estimate(p, 200, 32, key)
    # Delta >= 0 caps the weight at the zero-drift value
    assert 0 < est.value <= math.exp(-0.5 * (expected_range(1.0) + 0.2))


def test_bias_warning_from_synthetic_deltas():
    p = SimParams(3.0, 0.1, 1.0, n_steps=64)
    deltas = np.full(10_000, 0.5)
    ses = np.full(10_000, 0.5)
    est = annealed_from_deltas(p, deltas, ses)
    assert est.extras["bias_warning"]
    assert est.extras["bias_diagnostic"] == pytest.approx(9 * 0.25 / 2)
    deb = annealed_from_deltas(p, deltas, ses, debias=True)
    assert deb.value < est.value


def test_bias_diagnostic_halves(key):
    p = SimParams(1.0, 0.1, 1.0, n_steps=128)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BiasWarning)
        a = annealed_survival_estimate(p, 400, 32, key)
        b = annealed_survival_estimate(p, 400, 64, key)
    ratio = b.extras["bias_diagnostic"] / a.extras["bias_diagnostic"]
    assert 0.375 <= ratio <= 0.625


def test_annealed_matches_direct_small():
    p = SimParams(0.5, 0.1, 1.0)
    ann = annealed_survival_estimate(p, 1500, 128, StreamKey(11), continuity_correction=True)
    direct = direct_survival_estimate(p, 40_000, StreamKey(12))
    assert abs(ann.value - direct.value) <= 3 * combined_se(ann, direct)
