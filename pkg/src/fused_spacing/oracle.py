"""Brute-force verifiers that share no code path with the recursion.

* :func:`flsa_solve` solves the fused lasso at a fixed penalty with Condat's
  direct total-variation algorithm and certifies the answer through its dual.
* :func:`knot_scan` locates knots by bisection on the number of changepoints.
* :func:`explicit_lars` runs textbook LARS (with drops) on the dense design.
* :func:`tn_sampler` draws truncated normal samples for Monte-Carlo checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm, truncnorm

from .errors import DomainError, OracleFailure, ValidationError
from .path import ReparamSystem, as_signal

KKT_RTOL = 1e-7
CHANGE_RTOL = 1e-8


def _scale(y: np.ndarray) -> float:
    return max(float(np.max(np.abs(y - y.mean()))), 1e-300)


def tv_denoise(y, lam: float) -> np.ndarray:
    """Exact minimizer of ``0.5 ||y - x||^2 + lam * sum |x[i+1] - x[i]|``.

    Condat's taut-string style direct algorithm; linear time in practice.
    """
    y = np.asarray(y, dtype=float)
    N = y.size
    x = np.empty(N)
    if N == 0:
        return x
    if lam <= 0:
        return y.copy()
    k = k0 = kminus = kplus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    twolam = 2.0 * lam
    while True:
        while k == N - 1:
            if umin < 0.0:
                x[k0:kminus + 1] = vmin
                k0 = kminus + 1
                k = kminus = k0
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                x[k0:kplus + 1] = vmax
                k0 = kplus + 1
                k = kplus = k0
                vmax = y[k]
                umax = -lam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                x[k0:k + 1] = vmin
                return x
        umin += y[k + 1] - vmin
        if umin < -lam:
            x[k0:kminus + 1] = vmin
            k0 = kminus + 1
            k = kminus = kplus = k0
            vmin = y[k]
            vmax = vmin + twolam
            umin, umax = lam, -lam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            x[k0:kplus + 1] = vmax
            k0 = kplus + 1
            k = kminus = kplus = k0
            vmax = y[k]
            vmin = vmax - twolam
            umin, umax = lam, -lam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= -lam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = -lam


@dataclass(frozen=True)
class FlsaSolution:
    lam: float
    mu_hat: np.ndarray
    changepoints: frozenset[int]
    dual: np.ndarray = field(repr=False)
    kkt_violation: float = 0.0

    @property
    def signs(self) -> dict[int, int]:
        d = np.diff(self.mu_hat)
        return {j: int(np.sign(d[j - 1])) for j in sorted(self.changepoints)}

    def objective(self, y, mu=None) -> float:
        y = np.asarray(y, dtype=float)
        mu = self.mu_hat if mu is None else np.asarray(mu, dtype=float)
        return 0.5 * float(np.sum((y - mu) ** 2)) + self.lam * float(np.sum(np.abs(np.diff(mu))))

    def perturbation_gap(self, y, rng, trials: int = 20, eps: float = 1e-6) -> float:
        """Smallest objective increase over random ``+-eps`` perturbations
        (negative means a perturbation improved the objective)."""
        base = self.objective(y)
        worst = math.inf
        for _ in range(trials):
            d = eps * rng.choice((-1.0, 1.0), size=self.mu_hat.size)
            worst = min(worst, self.objective(y, self.mu_hat + d) - base)
        return worst


def kkt_violation(y, mu, lam: float, changepoints) -> float:
    """Largest violation of the fused-lasso optimality conditions.

    The dual ``u`` solving ``D^T u = y - mu`` is ``-cumsum(y - mu)``; it must
    vanish at the end, stay inside ``[-lam, lam]`` and equal
    ``lam * sign(mu[j] - mu[j-1])`` at every changepoint ``j``.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    u_full = -np.cumsum(y - mu)
    u = u_full[:-1]
    viol = abs(u_full[-1])
    if u.size:
        viol = max(viol, float(np.max(np.abs(u) - lam)))
    d = np.diff(mu)
    for j in changepoints:
        viol = max(viol, abs(u[j - 1] - lam * np.sign(d[j - 1])))
    return max(viol, 0.0)


def flsa_solve(signal, lam: float, *, check: bool = True) -> FlsaSolution:
    """Fused-lasso fit at a single penalty, certified by its KKT conditions.

    Raises
    ------
    OracleFailure
        If the dual certificate is violated by more than ``1e-7 (1 + lam)``
        times the data scale.
    """
    y = as_signal(signal).values
    lam = float(lam)
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValidationError(f"lambda must be finite and nonnegative, got {lam!r}")
    mu = tv_denoise(y, lam)
    scale = _scale(y)
    d = np.diff(mu)
    cps = frozenset(int(j) + 1 for j in np.flatnonzero(np.abs(d) > CHANGE_RTOL * scale))
    viol = kkt_violation(y, mu, lam, cps)
    if check and viol > KKT_RTOL * (1.0 + lam) * max(1.0, scale):
        raise OracleFailure(f"KKT violation {viol:.3e} at lambda={lam!r}")
    return FlsaSolution(lam, mu, cps, -np.cumsum(y - mu)[:-1], viol)


@dataclass(frozen=True)
class ScannedKnot:
    lam: float
    j: int
    s: int
    count: int  # changepoints just below the knot


@dataclass
class KnotScan:
    """Grid evaluations and refined knots, ordered by decreasing penalty."""

    grid: list[tuple[tuple[float, float], int, frozenset[int]]]
    knots: list[ScannedKnot]
    leave_events: int = 0
    ties: list[float] = field(default_factory=list)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([kn.lam for kn in self.knots])

    @property
    def entering(self) -> list[int]:
        return [kn.j for kn in self.knots]

    @property
    def signs(self) -> list[int]:
        return [kn.s for kn in self.knots]


def knot_scan(signal, lambda_grid=None, *, xtol: float = 1e-11, grid_size: int = 40) -> KnotScan:
    """Locate the knots of the path from fixed-penalty solves alone.

    Parameters
    ----------
    signal : Signal or array_like
    lambda_grid : array_like, optional
        Strictly descending penalties. The default spans
        ``[0, 1.1 * sum|y - mean|]``, which brackets every knot.
    xtol : float
        Bisection stops once a bracket is narrower than
        ``xtol * (1 + lambda_max)``.

    Returns
    -------
    KnotScan
        A knot is recorded whenever the changepoint count increases by one.
        A bracket whose count jumps by more than one after full refinement
        is reported as a tie. Any changepoint disappearing as the penalty
        decreases counts as a leave event.
    """
    y = as_signal(signal).values
    if lambda_grid is None:
        top = 1.1 * float(np.sum(np.abs(y - y.mean()))) + 1e-12
        lambda_grid = np.linspace(top, 0.0, grid_size)
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) >= 0):
        raise ValidationError("lambda_grid must be strictly descending with >= 2 points")
    if grid[-1] < 0:
        raise ValidationError("lambda_grid must be nonnegative")
    tol = xtol * (1.0 + grid[0])
    cache: dict[float, FlsaSolution] = {}

    def solve(lam: float) -> FlsaSolution:
        if lam not in cache:
            sol = flsa_solve(y, lam)
            # the solver returns fused blocks with bit-identical values, so any
            # nonzero difference is a changepoint; a relative threshold would
            # delay each detected knot by threshold / (rate of jump growth)
            cps = frozenset(int(j) + 1 for j in np.flatnonzero(np.diff(sol.mu_hat)))
            cache[lam] = replace(sol, changepoints=cps)
        return cache[lam]

    scan = KnotScan(grid=[], knots=[])
    top_sol = solve(float(grid[0]))
    if top_sol.changepoints:
        raise ValidationError("lambda_grid does not start above the first knot")

    def refine(hi: float, lo: float, s_hi: FlsaSolution, s_lo: FlsaSolution) -> None:
        # hi > lo; s_lo has more changepoints than s_hi
        if not s_hi.changepoints <= s_lo.changepoints:
            scan.leave_events += 1
        gained = s_lo.changepoints - s_hi.changepoints
        if not gained:
            return
        if hi - lo <= tol:
            if len(gained) == 1:
                (j,) = gained
                scan.knots.append(ScannedKnot(0.5 * (hi + lo), j, s_lo.signs[j], len(s_lo.changepoints)))
            else:
                scan.ties.append(0.5 * (hi + lo))
            return
        mid = 0.5 * (hi + lo)
        s_mid = solve(mid)
        refine(hi, mid, s_hi, s_mid)
        refine(mid, lo, s_mid, s_lo)

    for hi, lo in zip(grid[:-1], grid[1:]):
        s_hi, s_lo = solve(float(hi)), solve(float(lo))
        scan.grid.append(((float(lo), float(hi)), len(s_lo.changepoints), s_lo.changepoints))
        if len(s_lo.changepoints) < len(s_hi.changepoints):
            scan.leave_events += 1
        refine(float(hi), float(lo), s_hi, s_lo)
    return scan


@dataclass(frozen=True)
class LarsEvent:
    lam: float
    kind: str  # "enter" or "drop"
    j: int
    s: int


def explicit_lars(system: ReparamSystem, max_events: int | None = None) -> list[LarsEvent]:
    """Lasso-modified LARS on ``(y_tilde, X_tilde)`` using the dense design.

    Along a segment with active set ``A`` and signs ``s_A`` the coefficients
    are ``G^{-1}(X_A^T y - lam s_A)`` and an inactive column's correlation is
    ``a_j + lam b_j``. The next event is the largest penalty below the
    current one at which a correlation reaches ``+-lam`` (entry) or an
    active coefficient reaches zero (drop).
    """
    X = system.design
    y = np.asarray(system.y_centered, dtype=float)
    p = X.shape[1]
    if max_events is None:
        max_events = 4 * p
    corr = X.T @ y
    events: list[LarsEvent] = []
    active: list[int] = []
    signs: list[int] = []
    lam = math.inf
    eps = 1e-12 * max(1.0, float(np.max(np.abs(corr))))
    while len(events) < max_events:
        best = (0.0, None, 0, 0)
        if active:
            XA = X[:, active]
            G = XA.T @ XA
            sA = np.array(signs, dtype=float)
            g_y = np.linalg.solve(G, XA.T @ y)
            g_s = np.linalg.solve(G, sA)
            resid = y - XA @ g_y
            a = X.T @ resid
            b = X.T @ (XA @ g_s)
            for i, jj in enumerate(active):
                if g_s[i] != 0:
                    t = g_y[i] / g_s[i]
                    if eps < t < lam - eps and t > best[0]:
                        best = (t, "drop", jj, signs[i])
        else:
            a = corr
            b = np.zeros(p)
        taken = set(active)
        for jj in range(p):
            if jj in taken:
                continue
            for s in (1, -1):
                den = s - b[jj]
                if abs(den) < 1e-12:
                    continue
                t = a[jj] / den
                if eps < t < lam - eps and t > best[0]:
                    best = (t, "enter", jj, s)
        t, kind, jj, s = best
        if kind is None:
            break
        events.append(LarsEvent(float(t), kind, jj + 1, s))
        if kind == "enter":
            active.append(jj)
            signs.append(s)
        else:
            i = active.index(jj)
            del active[i]
            del signs[i]
        lam = t
    return events


def tn_sampler(
    mu: float,
    sd: float,
    a: float,
    b: float,
    n_samples: int,
    seed=None,
    *,
    min_acceptance: float = 1e-3,
) -> np.ndarray:
    """Draws from ``N(mu, sd^2)`` truncated to ``[a, b]``.

    Plain rejection is used while the acceptance probability is at least
    ``min_acceptance``; below that the sampler switches to the inverse CDF.
    ``seed`` may be an integer, a ``SeedSequence`` or a ``Generator``.
    """
    if not a < b:
        raise DomainError(f"truncation requires a < b, got a={a!r}, b={b!r}")
    if not sd > 0:
        raise DomainError(f"sd must be positive, got {sd!r}")
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    za, zb = (a - mu) / sd, (b - mu) / sd
    if za > 0:
        accept = norm.sf(za) - norm.sf(zb)
    else:
        accept = norm.cdf(zb) - norm.cdf(za)
    if accept < min_acceptance:
        return mu + sd * truncnorm.ppf(rng.random(n_samples), za, zb)
    out = np.empty(n_samples)
    filled = 0
    while filled < n_samples:
        need = n_samples - filled
        draw = mu + sd * rng.standard_normal(int(need / accept * 1.2) + 16)
        draw = draw[(draw >= a) & (draw <= b)][:need]
        out[filled:filled + draw.size] = draw
        filled += draw.size
    return out
