"""Compiled inner loops. Random numbers are always drawn by the callers."""

from __future__ import annotations

import math

import numba
import numpy as np

# hazard contributions below exp(-EXP_CUTOFF) are dropped
EXP_CUTOFF = 40.0


@numba.njit(cache=True, nogil=True)
def delta_samples(x, y_inc):
    """sup(Y+X) + sup(Y-X) - 2 sup(Y) for each row of Y increments."""
    m, n = y_inc.shape
    out = np.empty(m)
    for i in range(m):
        y = 0.0
        sy = 0.0
        sp = 0.0
        sm = 0.0
        for k in range(n):
            y += y_inc[i, k]
            xv = x[k + 1]
            if y > sy:
                sy = y
            if y + xv > sp:
                sp = y + xv
            if y - xv > sm:
                sm = y - xv
        out[i] = sp + sm - 2.0 * sy
    return out


@numba.njit(cache=True, nogil=True)
def _step_hazard(d0, d1, a, dt, var_rate):
    # both endpoints already known to lie outside [-a, a]
    if d0 > a and d1 > a:
        e = 2.0 * (d0 - a) * (d1 - a) / (var_rate * dt)
    elif d0 < -a and d1 < -a:
        e = 2.0 * (d0 + a) * (d1 + a) / (var_rate * dt)
    else:
        return np.inf
    if e > EXP_CUTOFF:
        return 0.0
    return -math.log1p(-math.exp(-e))


@numba.njit(cache=True, nogil=True)
def kill_step(x, x0, y_inc, a, dt, var_rate, bridge, clock, stop):
    """First grid index at which the trap started at ``x0`` kills the particle.

    Returns -1 if there is no kill at an index <= ``stop``. In bridge mode a
    kill inside step (k, k+1) is reported at index k+1; the trap's
    exponential ``clock`` is compared with the accumulated crossing hazard.
    """
    d0 = x[0] - x0
    if abs(d0) <= a:
        return 0
    y = 0.0
    h = 0.0
    for k in range(min(stop, y_inc.shape[0])):
        y += y_inc[k]
        d1 = x[k + 1] - x0 - y
        if abs(d1) <= a:
            return k + 1
        if bridge:
            h += _step_hazard(d0, d1, a, dt, var_rate)
            if h > clock:
                return k + 1
        d0 = d1
    return -1


@numba.njit(cache=True, nogil=True)
def survive_batch(xs, offsets, x0s, clocks, y_inc, a, dt, var_rate, bridge):
    """Survival indicator per path; traps of path b are rows offsets[b]:offsets[b+1]."""
    n_paths = xs.shape[0]
    n = y_inc.shape[1]
    alive = np.ones(n_paths, dtype=np.bool_)
    for b in range(n_paths):
        for j in range(offsets[b], offsets[b + 1]):
            if kill_step(xs[b], x0s[j], y_inc[j], a, dt, var_rate, bridge, clocks[j], n) >= 0:
                alive[b] = False
                break
    return alive


@numba.njit(cache=True, nogil=True)
def absorbed_batch(values, level, dt, var_rate, bridge, uniforms):
    """Whether each path leaves (-level, level), with optional bridge detection."""
    n_paths, n1 = values.shape
    out = np.zeros(n_paths, dtype=np.bool_)
    for b in range(n_paths):
        h = 0.0
        clock = -math.log(uniforms[b])
        for k in range(n1 - 1):
            v0 = values[b, k]
            v1 = values[b, k + 1]
            if abs(v1) >= level:
                out[b] = True
                break
            if bridge:
                # two-sided: hazards of the two barriers add to first order
                e_hi = 2.0 * (level - v0) * (level - v1) / (var_rate * dt)
                e_lo = 2.0 * (v0 + level) * (v1 + level) / (var_rate * dt)
                p = 0.0
                if e_hi < EXP_CUTOFF:
                    p += math.exp(-e_hi)
                if e_lo < EXP_CUTOFF:
                    p += math.exp(-e_lo)
                if p >= 1.0:
                    out[b] = True
                    break
                h += -math.log1p(-p)
                if h > clock:
                    out[b] = True
                    break
    return out
