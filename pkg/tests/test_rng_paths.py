import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from movingtraps.paths import (
    BRIDGE_EXCESS,
    InvalidParameter,
    PathGrid,
    bridge_hit_prob,
    continuity_shift,
    interval_range,
    occupation_time,
    path_extrema,
    sample_brownian_path,
    sample_brownian_paths,
)
from movingtraps.rng import StreamKey, as_key


def test_stream_key_is_reproducible():
    a = StreamKey(5, (1, 2)).generator().standard_normal(4)
    b = StreamKey(5).child(1, 2).generator().standard_normal(4)
    assert np.array_equal(a, b)


def test_children_differ():
    k = StreamKey(5)
    assert not np.array_equal(k.child(0).generator().random(8), k.child(1).generator().random(8))
    assert not np.array_equal(k.generator().random(8), k.child(0).generator().random(8))


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seed_range(seed):
    with pytest.raises(ValueError):
        StreamKey(seed)


def test_lineage_range():
    with pytest.raises(ValueError):
        StreamKey(1, (2**32,))
    assert StreamKey(1, (2**32 - 1,)).lineage == (2**32 - 1,)


def test_as_key_and_str():
    assert as_key(3) == StreamKey(3)
    assert str(StreamKey(3, (1, 4))) == "3:1/4"


def test_pathgrid_validation():
    with pytest.raises(InvalidParameter):
        PathGrid(1.0, 4, np.zeros(4))
    with pytest.raises(InvalidParameter):
        PathGrid(1.0, 2, np.array([1.0, 0.0, 0.0]))
    with pytest.raises(InvalidParameter):
        PathGrid(0.0, 2, np.zeros(3))
    with pytest.raises(InvalidParameter):
        sample_brownian_path(1.0, 0, StreamKey(1))


def test_first_row_matches_single_path(key):
    many = sample_brownian_paths(2.0, 64, 5, key)
    one = sample_brownian_path(2.0, 64, key)
    assert np.array_equal(many[0], one.values)
    assert one.values[0] == 0.0


def test_terminal_variance(key):
    v = np.concatenate([sample_brownian_paths(4.0, 4096, 10_000, key.child(c))[:, -1] for c in range(10)])
    # Var of the sample variance of a normal is 2 sigma^4 / (n - 1)
    se = math.sqrt(2 * 16 / (len(v) - 1))
    assert abs(v.var(ddof=1) - 4.0) <= 3 * se


def test_scaled_and_mirrored():
    p = PathGrid(1.0, 2, np.array([0.0, 1.0, -2.0]))
    s = p.scaled(2.0)
    assert s.t_end == 4.0 and np.array_equal(s.values, [0.0, 2.0, -4.0])
    assert np.array_equal(p.mirrored().values, [0.0, -1.0, 2.0])


def test_bridge_hit_prob_value():
    assert bridge_hit_prob(1.0, 1.0, 1.0, 0.0) == pytest.approx(math.exp(-2.0))
    assert bridge_hit_prob(1.0, -1.0, 1.0, 0.0) == 1.0
    with pytest.raises(InvalidParameter):
        bridge_hit_prob(1.0, 1.0, 0.0, 0.0)


def test_bridge_hit_prob_against_fine_bridges(key):
    # fine-grid bridges from 1 to 1 over unit time
    n, m = 100_000, 2000
    gen = key.generator()
    hits = 0
    s = np.linspace(0, 1, m + 1)
    for chunk in range(10):
        w = np.cumsum(gen.standard_normal((n // 10, m)) * math.sqrt(1 / m), axis=1)
        w = np.concatenate([np.zeros((n // 10, 1)), w], axis=1)
        bridge = 1.0 + w - s * w[:, -1:]
        hits += int(np.count_nonzero(bridge.min(axis=1) <= 0.0))
    p = hits / n
    exact = math.exp(-2.0)
    # the discrete monitor misses crossings by about BRIDGE_EXCESS * sqrt(dt)
    shifted = math.exp(-2.0 * (1 + BRIDGE_EXCESS / math.sqrt(m)) ** 2)
    assert abs(p - shifted) <= 3 * math.sqrt(p * (1 - p) / n)
    assert p < exact


@given(
    st.floats(-5, 5),
    st.floats(-5, 5),
    st.floats(1e-3, 10),
    st.floats(-5, 5),
    st.floats(0.1, 4),
)
def test_bridge_hit_prob_properties(x0, x1, dt, level, v):
    p = bridge_hit_prob(x0, x1, dt, level, v)
    assert 0.0 <= p <= 1.0
    assert p == pytest.approx(bridge_hit_prob(x1, x0, dt, level, v))
    if (x0 - level) * (x1 - level) <= 0:
        assert p == 1.0


def test_extrema_and_correction():
    p = PathGrid(1.0, 4, np.array([0.0, 1.0, 3.0, 3.0, -1.0]))
    e = path_extrema(p)
    assert (e.max, e.min, e.argmax_time) == (3.0, -1.0, 0.5)
    assert e.displacement == 3.0 and e.range == 4.0
    c = path_extrema(p, continuity_correction=True)
    assert c.max - e.max == pytest.approx(continuity_shift(0.25))


def test_corrected_mean_max_is_unbiased(key):
    n = 40_000
    v = sample_brownian_paths(1.0, 256, n, key)
    raw = v.max(axis=1)
    corrected = raw + continuity_shift(1 / 256)
    target = math.sqrt(2 / math.pi)
    se = raw.std() / math.sqrt(n)
    assert abs(corrected.mean() - target) <= 3 * se
    assert target - raw.mean() > 3 * se


def test_interval_range_and_occupation():
    p = PathGrid(1.0, 4, np.array([0.0, 1.0, 3.0, 2.0, -1.0]))
    assert interval_range(p, 0.25, 0.75) == 2.0
    assert interval_range(p, 0.0, 1.0) == 4.0
    with pytest.raises(InvalidParameter):
        interval_range(p, 0.5, 0.5)
    with pytest.raises(InvalidParameter):
        interval_range(p, 0.5, 0.51)
    # left endpoints 0, 1, 3, 2: strictly inside (0.5, 2.5) are 1 and 2
    assert occupation_time(p, 0.5, 2.5) == 0.5
    with pytest.raises(InvalidParameter):
        occupation_time(p, 1.0, 1.0)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=40), st.floats(-5, 5), st.floats(0.01, 5))
def test_occupation_bounded(vals, lo, width):
    p = PathGrid(1.0, len(vals), np.array([0.0] + vals))
    occ = occupation_time(p, lo, lo + width)
    assert 0.0 <= occ <= 1.0 + 1e-12
