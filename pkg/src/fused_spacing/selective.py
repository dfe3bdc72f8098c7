"""Exact selective inference for each changepoint on the path.

Conditionally on the first ``k`` entries of the path, the entry statistic
``eta^T y`` (``eta`` the step-``k`` direction vector, observed value
``lambda_k``) is a normal variable truncated to ``[lambda_{k+1},
lambda_{k-1}]``. The spacing pivot is its upper-tail probability at
``lambda_k``; selective intervals invert the same law in the mean.

``direction`` and ``omega`` work on the explicit centred design and are used
to verify the segment-local formulas carried by each :class:`PathStep`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, TieError, ValidationError
from .path import FusedPath, ReparamSystem
from .truncnorm import tail_probability

DEGENERATE_DENOM = 1e-10


@dataclass(frozen=True)
class DirectionVector:
    eta: np.ndarray
    k: int
    j: int
    s: int
    denominator: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.eta))


@dataclass(frozen=True)
class TruncationInterval:
    lower: float
    upper: float
    nu_zero_ok: bool = True

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class SpacingResult:
    k: int
    T: float
    omega: float
    interval: TruncationInterval
    statistic: float
    ci: tuple[float, float] | None = None
    jump_ci: tuple[float, float] | None = None
    alpha: float | None = None

    @property
    def two_sided(self) -> float:
        return min(1.0, 2.0 * min(self.T, 1.0 - self.T))


def _active_basis(system: ReparamSystem, cols: Sequence[int]):
    X = system.design
    if not cols:
        return np.zeros((system.n, 0)), np.zeros((0, 0))
    Q, R = np.linalg.qr(X[:, [c - 1 for c in cols]])
    if np.min(np.abs(np.diag(R))) <= 1e-12 * np.max(np.abs(np.diag(R))):
        raise NumericalError("active columns are numerically dependent")
    return Q, R


def equiangular(system: ReparamSystem, active: Sequence[tuple[int, int]]) -> np.ndarray:
    """``X_A (X_A^T X_A)^{-1} s_A``; the zero vector for an empty active set."""
    if not active:
        return np.zeros(system.n)
    cols = [j for j, _ in active]
    signs = np.array([s for _, s in active], dtype=float)
    Q, R = _active_basis(system, cols)
    return Q @ solve_triangular(R, signs, trans="T")


def direction(
    system: ReparamSystem,
    active: Sequence[tuple[int, int]],
    j: int,
    s: int,
) -> DirectionVector:
    """Direction ``c_k(j, s)`` whose inner product with ``y_tilde`` is the
    penalty at which candidate ``(j, s)`` would enter after ``active``.

    ``c = (I - P_A) X_j / (s - X_j^T X_A (X_A^T X_A)^{-1} s_A)``.
    """
    cols = [a for a, _ in active]
    if j in cols:
        raise ValidationError(f"column {j} is already active")
    if s not in (-1, 1):
        raise ValidationError(f"sign must be +1 or -1, got {s!r}")
    X = system.design
    xj = X[:, j - 1]
    Q, _ = _active_basis(system, cols)
    resid = xj - Q @ (Q.T @ xj)
    denom = s - float(xj @ equiangular(system, active))
    if abs(denom) < DEGENERATE_DENOM:
        raise NumericalError(f"degenerate direction for candidate ({j}, {s})")
    return DirectionVector(resid / denom, len(active) + 1, j, s, denom)


def omega(
    system: ReparamSystem,
    active_k: Sequence[tuple[int, int]],
    active_km1: Sequence[tuple[int, int]] | None = None,
) -> float:
    """Norm of the change in equiangular vectors between steps ``k-1`` and ``k``."""
    active_k = list(active_k)
    if active_km1 is None:
        active_km1 = active_k[:-1]
    active_km1 = list(active_km1)
    if len(active_k) != len(active_km1) + 1 or active_k[: len(active_km1)] != active_km1:
        raise ValidationError("active_km1 must be active_k without its last entry")
    diff = equiangular(system, active_k) - equiangular(system, active_km1)
    return float(np.linalg.norm(diff))


def omega_tau_form(system: ReparamSystem, active_k: Sequence[tuple[int, int]]) -> float:
    """``omega_k`` via ``(s_k - u^T G^{-1} s_A)^2 / (x^T (I - P_A) x)`` (block-inverse route)."""
    *prev, (j, s) = list(active_k)
    X = system.design
    x = X[:, j - 1]
    if prev:
        XA = X[:, [a - 1 for a, _ in prev]]
        sA = np.array([b for _, b in prev], dtype=float)
        G = XA.T @ XA
        u = XA.T @ x
        Ginv_u = np.linalg.solve(G, u)
        tau = float(x @ x - u @ Ginv_u)
        num = s - float(Ginv_u @ sA)
    else:
        tau = float(x @ x)
        num = float(s)
    return math.sqrt(num * num / tau)


def segment_eta(path: FusedPath, k: int) -> np.ndarray:
    """Direction vector of step ``k`` built from its segment (no dense algebra)."""
    st = path.step(k)
    lo, hi = st.segment
    L, m = hi - lo, st.j - lo
    eta = np.zeros(path.n)
    eta[lo:st.j] = -(L - m) / L
    eta[st.j:hi] = m / L
    return eta / st.denominator


def contrast(path: FusedPath, k: int, mu) -> float:
    """``eta_k^T mu`` for a mean vector ``mu``."""
    mu = np.asarray(mu, dtype=float)
    st = path.step(k)
    lo, hi = st.segment
    L, m = hi - lo, st.j - lo
    gap = mu[st.j:hi].mean() - mu[lo:st.j].mean()
    return gap * (m * (L - m) / L) / st.denominator


def jump_factor(path: FusedPath, k: int) -> float:
    """Multiplier turning ``eta_k^T mu`` into the difference of segment means."""
    st = path.step(k)
    return st.omega ** 2 / st.denominator


def truncation(path: FusedPath, k: int) -> TruncationInterval:
    """``[lambda_{k+1}, lambda_{k-1}]``; ``lambda_0 = inf``."""
    path.step(k)
    return TruncationInterval(lower=path.knot(k + 1), upper=path.knot(k - 1))


def pivot(lam_prev: float, lam: float, lam_next: float, omega_k: float, sigma: float) -> float:
    """Closed-form spacing pivot.

    ``[Phi(lam_prev w/s) - Phi(lam w/s)] / [Phi(lam_prev w/s) - Phi(lam_next w/s)]``
    evaluated through normal tail ratios.
    """
    if not lam_prev > lam_next:
        raise TieError(
            f"degenerate truncation interval [{lam_next!r}, {lam_prev!r}]"
        )
    if not (omega_k > 0 and sigma > 0):
        raise DomainError("omega and sigma must be positive")
    return tail_probability(lam, 0.0, sigma / omega_k, lam_next, lam_prev)


def spacing_pivot(
    path: FusedPath,
    k: int,
    sigma: float,
    alpha: float | None = None,
) -> SpacingResult:
    """Spacing pivot ``T_k``; with ``alpha`` also the selective interval."""
    st = path.step(k)
    interval = truncation(path, k)
    T = pivot(interval.upper, st.lam, interval.lower, st.omega, sigma)
    ci = jump_ci = None
    if alpha is not None:
        ci = selective_ci(path, k, sigma, alpha)
        f = jump_factor(path, k)
        jump_ci = tuple(sorted((ci[0] * f, ci[1] * f)))
    return SpacingResult(
        k=k,
        T=T,
        omega=st.omega,
        interval=interval,
        statistic=st.lam,
        ci=ci,
        jump_ci=jump_ci,
        alpha=alpha,
    )


def invert_pivot(
    statistic: float,
    sd: float,
    lower: float,
    upper: float,
    alpha: float,
    *,
    max_expand: int = 200,
) -> tuple[float, float]:
    """Equal-tailed interval for the mean of a truncated normal observation.

    Returns the ``theta`` values where the upper-tail probability of
    ``statistic`` equals ``alpha/2`` and ``1 - alpha/2``; the tail
    probability increases monotonically in ``theta``.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")

    def g(theta, target):
        return tail_probability(statistic, theta, sd, lower, upper) - target

    def solve(target):
        lo, hi = statistic - 10 * sd, statistic + 10 * sd
        width = 10 * sd
        for _ in range(max_expand):
            glo, ghi = g(lo, target), g(hi, target)
            if glo <= 0 <= ghi:
                if glo == 0:
                    return lo
                if ghi == 0:
                    return hi
                return brentq(g, lo, hi, args=(target,), xtol=1e-8 * sd, maxiter=500)
            width *= 2
            if glo > 0:
                lo -= width
            if ghi < 0:
                hi += width
        raise NumericalError(
            f"could not bracket the interval endpoint for target {target}"
        )

    return solve(alpha / 2), solve(1 - alpha / 2)


def selective_ci(path: FusedPath, k: int, sigma: float, alpha: float) -> tuple[float, float]:
    """``(1 - alpha)`` selective interval for ``eta_k^T mu``."""
    st = path.step(k)
    interval = truncation(path, k)
    return invert_pivot(st.lam, sigma / st.omega, interval.lower, interval.upper, alpha)


def all_pivots(path: FusedPath, sigma: float, alpha: float | None = None) -> list[SpacingResult]:
    return [spacing_pivot(path, k, sigma, alpha) for k in range(1, len(path) + 1)]
