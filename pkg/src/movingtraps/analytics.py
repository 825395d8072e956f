"""Closed-form Brownian densities, probabilities and expectations.

These serve as oracles for the Monte Carlo parts of the package. All
functions refer to standard one-dimensional Brownian motion started at the
origin unless a starting point is given.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.special import erf, ndtr

from .paths import InvalidParameter

SERIES_TOL = 1e-14
QUAD_EPSABS = 1e-10


def expected_range(t: float) -> float:
    """E|R_t| = sqrt(8t/pi)."""
    if t < 0:
        raise InvalidParameter(f"t must be non-negative, got {t}")
    return math.sqrt(8.0 * t / math.pi)


def range_tail_asymptotic(t: float, a_len: float) -> float:
    """Leading-order small-range tail, P(|R_t| < a) ~ 8 pi^2 (t/a^2) exp(-pi^2 t / (2 a^2)).

    Only meaningful as t/a^2 grows; it is not a probability for small t/a^2.
    """
    if not (t > 0 and a_len > 0):
        raise InvalidParameter("t and a_len must be positive")
    u = t / (a_len * a_len)
    return 8.0 * math.pi**2 * u * math.exp(-0.5 * math.pi**2 * u)


def max_argmax_density(m, u, t):
    """Joint density of (running maximum, time of the maximum) on [0, t]."""
    m = np.asarray(m, dtype=float)
    u = np.asarray(u, dtype=float)
    inside = (m >= 0) & (u > 0) & (u < t)
    us = np.where(inside, u, 0.5 * t)
    val = m / math.pi * us**-1.5 * (t - us) ** -0.5 * np.exp(-(m * m) / (2.0 * us))
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def argmax_density(u, t):
    """Arcsine density of the time at which the maximum on [0, t] is attained."""
    u = np.asarray(u, dtype=float)
    inside = (u > 0) & (u < t)
    us = np.where(inside, u, 0.5 * t)
    out = np.where(inside, 1.0 / (math.pi * np.sqrt(us * (t - us))), 0.0)
    return out if out.ndim else float(out)


def argmax_cdf(u, t):
    u = np.clip(np.asarray(u, dtype=float), 0.0, t)
    out = 2.0 / math.pi * np.arcsin(np.sqrt(u / t))
    return out if out.ndim else float(out)


def first_passage_density(x, u):
    """Density of the hitting time of zero for Brownian motion started at ``x > 0``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    inside = (x > 0) & (u > 0)
    us = np.where(inside, u, 1.0)
    val = x * np.exp(-(x * x) / (2.0 * us)) / np.sqrt(2.0 * math.pi * us**3)
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def stay_positive_prob(x, t):
    """P_x(tau_0 > t) = erf(x / sqrt(2t))."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(t > 0, erf(x / np.sqrt(2.0 * np.where(t > 0, t, 1.0))), 1.0)
    out = np.where(x > 0, out, 0.0)
    return out if out.ndim else float(out)


def conditioned_positive_transition(x, y, s, t):
    """Transition density at time ``s`` of Brownian motion from ``x`` conditioned to stay positive up to ``t``."""
    y = np.asarray(y, dtype=float)
    heat = (np.exp(-((x - y) ** 2) / (2 * s)) - np.exp(-((x + y) ** 2) / (2 * s))) / math.sqrt(
        2 * math.pi * s
    )
    out = np.where(y > 0, heat * stay_positive_prob(y, t - s) / stay_positive_prob(x, t), 0.0)
    return out if out.ndim else float(out)


def confinement_prob(r: float, t: float) -> float:
    """P(sup_{s<=t} |B_s| < r).

    Uses the eigenfunction series for t/r^2 >= 1 and the method-of-images
    series otherwise; both are truncated once terms drop below 1e-14.
    """
    if not r > 0:
        raise InvalidParameter(f"r must be positive, got {r}")
    if t < 0:
        raise InvalidParameter(f"t must be non-negative, got {t}")
    if t == 0:
        return 1.0
    u = t / (r * r)
    if u >= 1.0:
        total, k = 0.0, 0
        while True:
            term = math.exp(-((2 * k + 1) ** 2) * math.pi**2 * u / 8.0) / (2 * k + 1)
            total += term if k % 2 == 0 else -term
            if term < SERIES_TOL:
                break
            k += 1
        return 4.0 / math.pi * total
    z = 1.0 / math.sqrt(u)
    # sum_k (-1)^k [Phi((2k+1)z) - Phi((2k-1)z)] over all integers k
    total, k = float(ndtr(z) - ndtr(-z)), 1
    while True:
        term = (ndtr((2 * k + 1) * z) - ndtr((2 * k - 1) * z)) * 2.0
        total += term if k % 2 == 0 else -term
        if abs(term) < SERIES_TOL:
            break
        k += 1
    return float(min(max(total, 0.0), 1.0))


def displacement_median(t: float) -> float:
    """Median of the maximal displacement sup_{s<=t}|B_s|."""
    return brentq(lambda r: confinement_prob(r, 1.0) - 0.5, 0.1, 10.0, xtol=1e-13) * math.sqrt(t)


def displacement_quantile(q: float, t: float) -> float:
    return brentq(lambda r: confinement_prob(r, 1.0) - q, 1e-3, 20.0, xtol=1e-13) * math.sqrt(t)


def box_mass_max_argmax(t: float, m_hi: float, u_lo: float, u_hi: float) -> float:
    """P(M_t <= m_hi, argmax in [u_lo, u_hi]).

    The maximum is integrated in closed form; the remaining time integral is
    taken in the angle u = t sin^2(theta), which removes the endpoint
    singularities of the arcsine weight.
    """
    if not 0 <= u_lo < u_hi <= t:
        raise InvalidParameter(f"need 0 <= u_lo < u_hi <= t, got ({u_lo}, {u_hi})")
    if m_hi < 0:
        raise InvalidParameter("m_hi must be non-negative")
    if m_hi == 0:
        return 0.0
    th_lo = math.asin(math.sqrt(u_lo / t))
    th_hi = math.asin(math.sqrt(u_hi / t))
    if math.isinf(m_hi):
        return 2.0 / math.pi * (th_hi - th_lo)

    def integrand(th: float) -> float:
        s2 = math.sin(th) ** 2
        if s2 == 0.0:
            return 2.0 / math.pi
        return 2.0 / math.pi * -math.expm1(-(m_hi * m_hi) / (2.0 * t * s2))

    val, _ = integrate.quad(integrand, th_lo, th_hi, epsabs=QUAD_EPSABS, limit=200)
    return float(val)
