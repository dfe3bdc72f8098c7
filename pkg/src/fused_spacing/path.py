"""Solution path of the one-dimensional fused lasso.

The fused lasso

.. math::

    \\hat\\mu(\\lambda) = \\mathrm{argmin}_\\mu \\tfrac12 \\|y - \\mu\\|_2^2
        + \\lambda \\|D\\mu\\|_1

is an ordinary lasso in the coordinates ``phi = D mu`` once the mean is
projected out. Changepoints enter one at a time as ``lambda`` decreases and
never leave, so the LARS recursion on the centred design is the whole path.

Because the design is a chain, every quantity LARS needs is local to the
segment being split:

* the residual correlation of a candidate boundary ``j`` is minus the
  prefix sum ``C_j`` of the segment-demeaned data;
* the correlation of ``j`` with the current equiangular direction, ``w_j``,
  is the linear interpolation between the signs of the two active
  boundaries enclosing ``j`` (zero at the ends of the series).

A candidate ``(j, s)`` therefore hits at ``-C_j / (s - w_j)``. Only the
segment that was split needs refreshing after each step.

Indexing: a changepoint ``j`` (1-based, ``1 <= j <= n-1``) separates
positions ``j`` and ``j+1`` (1-based), i.e. a level change between
``values[j-1]`` and ``values[j]``. Its sign ``s`` is the sign of
``mu[j] - mu[j-1]`` on the path: +1 for an upward jump.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import PathConsistencyError, ValidationError

TIE_RTOL = 1e-9
ZERO_RTOL = 1e-12
DENSE_MAX_N = 512


@dataclass(frozen=True)
class Signal:
    """Observed series with its noise standard deviation."""

    values: np.ndarray
    sigma: float = 1.0
    sigma_source: Literal["known", "estimated"] = "known"

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size < 2:
            raise ValidationError(f"need at least 2 observations, got {values.size}")
        if not np.all(np.isfinite(values)):
            bad = np.flatnonzero(~np.isfinite(values))[:10]
            raise ValidationError(f"non-finite values at positions {(bad + 1).tolist()}")
        sigma = float(self.sigma)
        if not (np.isfinite(sigma) and sigma > 0):
            raise ValidationError(f"sigma must be positive and finite, got {self.sigma!r}")
        if self.sigma_source not in ("known", "estimated"):
            raise ValidationError(f"unknown sigma_source {self.sigma_source!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.values.size


def as_signal(data, sigma: float = 1.0) -> Signal:
    if isinstance(data, Signal):
        return data
    return Signal(np.asarray(data, dtype=float), sigma=sigma)


@dataclass(frozen=True)
class DifferenceOperator:
    """First-difference operator ``D`` of shape ``(n-1, n)``."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("difference operator needs n >= 2")

    def apply(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        if mu.shape[0] != self.n:
            raise ValidationError(f"expected length {self.n}, got {mu.shape[0]}")
        return np.diff(mu, axis=0)

    def adjoint(self, u) -> np.ndarray:
        """``D^T u``; ``(D^T u)_i = u_{i-1} - u_i`` with ``u_0 = u_n = 0``."""
        u = np.asarray(u, dtype=float)
        padded = np.concatenate([[0.0], u, [0.0]])
        return padded[:-1] - padded[1:]

    def matrix(self) -> np.ndarray:
        D = np.zeros((self.n - 1, self.n))
        idx = np.arange(self.n - 1)
        D[idx, idx] = -1.0
        D[idx, idx + 1] = 1.0
        return D

    def augmented(self) -> np.ndarray:
        """``D`` stacked on a row of ones; invertible."""
        return np.vstack([self.matrix(), np.ones((1, self.n))])


@dataclass(frozen=True)
class ReparamSystem:
    """Centred response and (lazily built) design of the equivalent lasso.

    ``design`` is ``(I - P_2) X_1`` where ``[X_1, X_2]`` is the inverse of the
    augmented difference matrix. It is only materialized on request and only
    for ``n <= DENSE_MAX_N``; the path recursion never touches it.
    """

    n: int
    y_centered: np.ndarray
    mean: float = 0.0

    @cached_property
    def basis(self) -> np.ndarray:
        """Inverse of the augmented difference matrix, ``[X_1, X_2]``.

        Built entrywise from its closed form, ``X_1[i, j] = 1{i >= j} - (n - j)/n``
        (0-based ``i``, 1-based ``j``) and ``X_2 = 1/n``, so every entry is
        rounded once; a dense solve would leave ``O(n eps)`` errors that
        resurface in inner products with ``y``.
        """
        n = self.n
        if n > DENSE_MAX_N:
            raise ValidationError(
                f"dense design limited to n <= {DENSE_MAX_N} (got n={n})"
            )
        i = np.arange(n)[:, None]
        j = np.arange(1, n)[None, :]
        X1 = (n * (i >= j) - (n - j)) / n
        return np.hstack([X1, np.full((n, 1), 1.0 / n)])

    @cached_property
    def design(self) -> np.ndarray:
        # columns of X_1 already sum to zero, so (I - P_2) X_1 = X_1
        return self.X1

    @property
    def X1(self) -> np.ndarray:
        return self.basis[:, :-1]

    @property
    def X2(self) -> np.ndarray:
        return self.basis[:, -1:]


def center(signal) -> ReparamSystem:
    """Project out the mean: ``y_tilde = y - mean(y)``."""
    signal = as_signal(signal)
    y = signal.values
    mean = float(y.mean())
    yc = y - mean
    yc.setflags(write=False)
    return ReparamSystem(n=signal.n, y_centered=yc, mean=mean)


def design_column(system: ReparamSystem, j: int) -> np.ndarray:
    """Column ``j`` (1-based) of the centred design."""
    if not 1 <= j <= system.n - 1:
        raise ValidationError(f"column index {j} outside 1..{system.n - 1}")
    return system.design[:, j - 1].copy()


def cusum(residual, convention: Literal["C", "S"] = "C") -> np.ndarray:
    """Prefix sums ``C_j = sum_{i<=j} r_i`` for ``j = 1..n-1``.

    ``convention="S"`` returns ``S_j = -C_j``, which equals the correlation
    of design column ``j`` with a zero-sum residual.
    """
    r = np.asarray(residual, dtype=float).ravel()
    if r.size < 2:
        raise ValidationError("residual must have length >= 2")
    C = np.cumsum(r)[:-1]
    if convention == "C":
        return C
    if convention == "S":
        return -C
    raise ValidationError(f"unknown convention {convention!r}")


def segment_bounds(n: int, active) -> list[tuple[int, int]]:
    """Half-open 0-based position ranges cut at the active changepoints."""
    cuts = sorted(set(int(j) for j in active))
    for j in cuts:
        if not 1 <= j <= n - 1:
            raise ValidationError(f"changepoint {j} outside 1..{n - 1}")
    edges = [0, *cuts, n]
    return list(zip(edges[:-1], edges[1:]))


def segment_residual(signal, active) -> np.ndarray:
    """Subtract each segment's mean; segments are cut at ``active``."""
    y = as_signal(signal).values
    r = np.empty_like(y)
    for lo, hi in segment_bounds(y.size, active):
        r[lo:hi] = y[lo:hi] - y[lo:hi].mean()
    return r


def piecewise_means(values, active) -> np.ndarray:
    y = np.asarray(values, dtype=float)
    out = np.empty_like(y)
    for lo, hi in segment_bounds(y.size, active):
        out[lo:hi] = y[lo:hi].mean()
    return out


@dataclass(frozen=True)
class PathStep:
    """One knot of the path.

    ``segment`` is the 0-based half-open range that ``j`` split, and
    ``denominator`` is ``s - w_j`` at entry. ``omega`` is the reciprocal norm
    of the step's direction vector.
    """

    k: int
    lam: float
    j: int
    s: int
    omega: float
    denominator: float
    segment: tuple[int, int]
    cusum: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def positions(self) -> tuple[int, int]:
        return (self.j, self.j + 1)


@dataclass(frozen=True)
class FusedPath:
    steps: tuple[PathStep, ...]
    n: int
    lambda_next: float
    terminated_early: bool = False
    reason: str = "complete"
    scale: float = 1.0

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def knots(self) -> np.ndarray:
        return np.array([st.lam for st in self.steps])

    @property
    def changepoints(self) -> list[int]:
        return [st.j for st in self.steps]

    @property
    def signs(self) -> list[int]:
        return [st.s for st in self.steps]

    def knot(self, k: int) -> float:
        """``lambda_k`` with ``lambda_0 = inf`` and ``lambda_{M+1} = lambda_next``."""
        M = len(self.steps)
        if k == 0:
            return math.inf
        if 1 <= k <= M:
            return self.steps[k - 1].lam
        if k == M + 1:
            return self.lambda_next
        raise ValidationError(f"knot index {k} outside 0..{M + 1}")

    def active(self, k: int) -> list[tuple[int, int]]:
        """Ordered ``(j, s)`` pairs entered through step ``k``."""
        return [(st.j, st.s) for st in self.steps[:k]]

    def step(self, k: int) -> PathStep:
        if not 1 <= k <= len(self.steps):
            raise ValidationError(f"step {k} outside 1..{len(self.steps)}")
        return self.steps[k - 1]


class _ChainLars:
    """Incremental state of the recursion: per-boundary C_j, w_j and hit times."""

    def __init__(self, y: np.ndarray):
        self.y = y
        self.n = n = y.size
        self.C = np.zeros(n - 1)
        self.w = np.zeros(n - 1)
        self.hit = np.full(n - 1, -np.inf)
        self.hit_sign = np.ones(n - 1, dtype=int)
        self.sign = np.zeros(n + 1, dtype=int)  # sign[j] of active boundary j; 0 at ends
        self.cuts = [0, n]
        self._refresh(0, n)

    def _refresh(self, lo: int, hi: int) -> None:
        L = hi - lo
        if L < 2:
            return
        seg = self.y[lo:hi]
        C = np.cumsum(seg - seg.mean())[:-1]
        m = np.arange(1, L)
        wl, wr = self.sign[lo], self.sign[hi]
        w = wl + (wr - wl) * m / L
        corr = -C
        s = np.where(corr >= 0, 1, -1)
        denom = s - w
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(denom != 0, corr / denom, -np.inf)
        h = np.where(corr == 0, 0.0, h)
        sl = slice(lo, hi - 1)
        self.C[sl] = C
        self.w[sl] = w
        self.hit[sl] = h
        self.hit_sign[sl] = s

    def enclosing(self, j: int) -> tuple[int, int]:
        i = bisect.bisect_left(self.cuts, j)
        return self.cuts[i - 1], self.cuts[i]

    def candidates(self) -> tuple[int, float, float]:
        """Best boundary (0-based), its hit time and the runner-up hit time."""
        h = self.hit
        if h.size == 1:
            return 0, float(h[0]), -math.inf
        top2 = np.argpartition(h, h.size - 2)[-2:]
        a, b = top2
        if h[a] < h[b] or (h[a] == h[b] and b < a):
            a, b = b, a
        return int(a), float(h[a]), float(h[b])

    def activate(self, b: int) -> tuple[int, int]:
        j = b + 1
        lo, hi = self.enclosing(j)
        bisect.insort(self.cuts, j)
        self.sign[j] = self.hit_sign[b]
        self.hit[b] = -np.inf
        self.C[b] = 0.0
        self._refresh(lo, j)
        self._refresh(j, hi)
        return lo, hi


def lars_path(
    signal,
    max_steps: int | None = None,
    *,
    keep_cusum: bool = False,
    tie_rtol: float = TIE_RTOL,
) -> FusedPath:
    """Knots, changepoints and signs of the fused-lasso path.

    Parameters
    ----------
    signal : Signal or array_like
        Observed series.
    max_steps : int, optional
        Number of knots to record (default: all ``n - 1``). The knot
        following the last recorded one is still computed and stored as
        ``lambda_next`` because it is the lower truncation point of the last
        step's pivot.
    keep_cusum : bool
        Store the full prefix-sum vector used at every step.
    tie_rtol : float
        Competitors whose hit times differ by at most
        ``tie_rtol * max(1, lambda)`` are a tie; the path stops there.

    Returns
    -------
    FusedPath
    """
    signal = as_signal(signal)
    y = signal.values
    n = y.size
    if max_steps is None:
        max_steps = n - 1
    if not 0 <= max_steps <= n - 1:
        raise ValidationError(f"max_steps must lie in 0..{n - 1}, got {max_steps}")

    scale = float(np.max(np.abs(y - y.mean())))
    # centring leaves O(eps |y|) residue even when y is constant
    zero_tol = ZERO_RTOL * n * max(scale, float(np.max(np.abs(y))), np.finfo(float).tiny)
    state = _ChainLars(y)
    steps: list[PathStep] = []
    prev = math.inf
    reason = "complete"
    early = False
    lambda_next = 0.0

    for k in range(1, n):
        b, lam, runner_up = state.candidates()
        if lam <= zero_tol:
            lambda_next = 0.0
            if k <= max_steps:
                reason, early = "residual_exhausted", True
            break
        if lam > prev + tie_rtol * max(1.0, prev):
            raise PathConsistencyError(
                f"knot {k} ({lam!r}) exceeds previous knot ({prev!r})"
            )
        tied = runner_up >= lam - tie_rtol * max(1.0, lam) or lam >= prev - tie_rtol * max(1.0, prev)
        if k > max_steps:
            lambda_next = lam
            reason = "max_steps"
            break
        if tied:
            lambda_next = lam
            reason, early = "tie", True
            break

        j = b + 1
        s = int(state.hit_sign[b])
        d = float(s - state.w[b])
        snapshot = state.C.copy() if keep_cusum else None
        lo, hi = state.activate(b)
        L, m = hi - lo, j - lo
        omega = abs(d) / math.sqrt(m * (L - m) / L)
        steps.append(PathStep(k, lam, j, s, omega, d, (lo, hi), snapshot))
        prev = lam
    else:
        lambda_next = 0.0

    return FusedPath(
        steps=tuple(steps),
        n=n,
        lambda_next=float(lambda_next),
        terminated_early=early,
        reason=reason,
        scale=scale,
    )


def lambda_for_m_changepoints(path: FusedPath, m: int) -> tuple[float, float]:
    """Penalty range ``(lambda_{m+1}, lambda_m]`` giving exactly ``m`` changepoints."""
    if not 0 <= m <= len(path.steps):
        raise ValidationError(f"m must lie in 0..{len(path.steps)}, got {m}")
    return path.knot(m + 1), path.knot(m)


def fitted_means(signal, path: FusedPath, lam: float) -> np.ndarray:
    """Fused-lasso estimate at penalty ``lam`` reconstructed from the path.

    Inside each segment the level is the segment mean shifted by the dual
    values at its two ends: ``mean + lam * (s_right - s_left) / L`` with
    the sign convention of the path (upward jump = +1).
    """
    y = as_signal(signal).values
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    m = sum(1 for st in path.steps if st.lam > lam)
    signs = {st.j: st.s for st in path.steps[:m]}
    out = np.empty_like(y)
    for lo, hi in segment_bounds(y.size, signs):
        sl, sr = signs.get(lo, 0), signs.get(hi, 0)
        out[lo:hi] = y[lo:hi].mean() + lam * (sr - sl) / (hi - lo)
    return out
