"""Truncated normal distribution functions that stay accurate in the tails.

All ratios of normal tail masses are formed through ``erfcx`` so that
``S(t) / S(a)`` with ``S = 1 - Phi`` never underflows, whatever the size of
``a``. Differences of nearby tail masses go through ``expm1``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, erfc, erfcx

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)


def log_sf_ratio(t0: float, d: float) -> float:
    """``log(S(t0 + d) / S(t0))`` for ``t0 >= 0`` and ``d >= 0``."""
    if d == 0:
        return 0.0
    if math.isinf(d):
        return -math.inf
    t1 = t0 + d
    return -d * (t0 + 0.5 * d) + math.log(erfcx(t1 / _SQRT2) / erfcx(t0 / _SQRT2))


def _upper_tail(a: float, dx: float, db: float) -> float:
    """P(Z >= a + dx | a <= Z <= a + db) for standard normal Z and a >= 0."""
    lr_x = log_sf_ratio(a, dx)
    den = -math.expm1(log_sf_ratio(a, db))
    num = math.exp(lr_x) * -math.expm1(log_sf_ratio(a + dx, db - dx))
    return num / den


def _lower_cdf(a: float, dx: float, db: float) -> float:
    """P(Z <= a + dx | a <= Z <= a + db) for standard normal Z and a >= 0."""
    return math.expm1(log_sf_ratio(a, dx)) / math.expm1(log_sf_ratio(a, db))


def _straddle_tail(a: float, x: float, b: float) -> float:
    """P(Z >= x | a <= Z <= b) when a < 0 < b."""
    eb = 1.0 if math.isinf(b) else erf(b / _SQRT2)
    ea = -1.0 if math.isinf(a) else erf(a / _SQRT2)
    den = eb - ea
    if x >= 0:
        num = erfc(x / _SQRT2) - (0.0 if math.isinf(b) else erfc(b / _SQRT2))
    else:
        num = eb - erf(x / _SQRT2)
    return num / den


def tail_probability(x: float, mu: float, sd: float, a: float, b: float) -> float:
    """``P(X >= x)`` for ``X ~ TN(mu, sd^2, a, b)``; ``x`` is clamped to ``[a, b]``."""
    a, b, x = float(a), float(b), float(x)
    if not sd > 0:
        raise DomainError(f"sd must be positive, got {sd!r}")
    if not a < b:
        raise DomainError(f"truncation requires a < b, got a={a!r}, b={b!r}")
    x = min(max(x, a), b)
    if x == a:
        return 1.0
    if x == b:
        return 0.0
    za = (a - mu) / sd
    zb = (b - mu) / sd
    if za >= 0:
        return _clip(_upper_tail(za, (x - a) / sd, (b - a) / sd))
    if zb <= 0:
        # mirror: Z' = -Z lives on [-zb, -za] with -zb >= 0
        return _clip(_lower_cdf(-zb, (b - x) / sd, (b - a) / sd))
    return _clip(_straddle_tail(za, (x - mu) / sd, zb))


def truncated_normal_cdf(x: float, mu: float, sd: float, a: float, b: float) -> float:
    """CDF of ``N(mu, sd^2)`` truncated to ``[a, b]``.

    Either endpoint may be infinite. ``x`` outside ``[a, b]`` is clamped, so
    the result is 0 at or below ``a`` and 1 at or above ``b``.
    """
    a, b, x = float(a), float(b), float(x)
    if not a < b:
        raise DomainError(f"truncation requires a < b, got a={a!r}, b={b!r}")
    # P(X <= x) = P(-X >= -x) with -X ~ TN(-mu, sd^2, -b, -a)
    return tail_probability(-x, -mu, sd, -b, -a)


def _clip(p: float) -> float:
    if p != p:
        raise DomainError("truncated normal probability evaluated to NaN")
    return min(1.0, max(0.0, p))


def spacing_tail(lam_prev: float, lam: float, lam_next: float, omega: float, sigma: float) -> float:
    """Upper-tail probability of ``lam`` under ``TN(0, (sigma/omega)^2, lam_next, lam_prev)``.

    ``lam_prev`` may be ``inf``.
    """
    return tail_probability(lam, 0.0, sigma / omega, lam_next, lam_prev)


def vectorized_cdf(x, mu, sd, a, b) -> np.ndarray:
    """Elementwise :func:`truncated_normal_cdf` over broadcast arrays."""
    bx = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, mu, sd, a, b)))
    out = np.empty(bx[0].shape)
    for idx in np.ndindex(out.shape):
        out[idx] = truncated_normal_cdf(*(v[idx] for v in bx))
    return out
