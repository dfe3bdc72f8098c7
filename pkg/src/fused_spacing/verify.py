"""Cross-checks of the path and pivot against the independent oracles.

:func:`run_checks` is what ``fused-spacing verify`` executes. Each check
returns a :class:`CheckResult`; a run fails if any check fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FusedSpacingError, TieError
from .oracle import flsa_solve, knot_scan
from .path import Signal, center, cusum, lars_path, segment_residual
from .polyhedron import HitLeaveOracle
from .selective import direction, spacing_pivot
from .truncnorm import truncated_normal_cdf

KNOT_ATOL = 1e-6
LIMIT_ATOL = 1e-10


@dataclass
class CheckResult:
    name: str
    ok: bool
    cases: int
    worst: float = 0.0
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "cases": self.cases, "worst": self.worst, **self.detail}


def _signals(seed: int, count: int, n_range=(4, 16)):
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(count):
        rng = np.random.Generator(np.random.Philox(child))
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        yield rng.standard_normal(n)


def check_knot_scan(seed: int = 0, count: int = 200) -> CheckResult:
    """Knots and entering indices of the path against a bisection grid scan."""
    worst, mismatched, leaves, ties = 0.0, [], 0, 0
    for i, y in enumerate(_signals(seed, count)):
        try:
            path = lars_path(Signal(y))
        except TieError:
            ties += 1
            continue
        scan = knot_scan(y)
        leaves += scan.leave_events
        if scan.entering != path.changepoints or scan.signs != path.signs:
            mismatched.append(i)
            continue
        worst = max(worst, float(np.max(np.abs(scan.lambdas - path.knots))))
    ok = not mismatched and leaves == 0 and worst < KNOT_ATOL
    return CheckResult(
        "knot_scan", ok, count, worst, {"mismatched": mismatched, "leave_events": leaves, "tie_aborts": ties}
    )


def check_kkt(seed: int = 1, count: int = 50) -> CheckResult:
    """Path fits between consecutive knots carry a valid KKT certificate."""
    worst, failures = 0.0, []
    for i, y in enumerate(_signals(seed, count, (4, 40))):
        path = lars_path(Signal(y))
        grid = [*path.knots.tolist(), 0.0]
        for hi, lo in zip(grid[:-1], grid[1:]):
            lam = 0.5 * (hi + lo)
            try:
                sol = flsa_solve(y, lam)
            except FusedSpacingError:
                failures.append(i)
                break
            worst = max(worst, sol.kkt_violation / (1.0 + lam))
    return CheckResult("kkt", not failures, count, worst, {"failed": failures})


def check_identities(seed: int = 2, count: int = 50) -> CheckResult:
    """Norm identity for the step directions and the CUSUM form of the correlations."""
    worst_norm = worst_corr = 0.0
    pivots_ok = True
    for y in _signals(seed, count, (4, 60)):
        path = lars_path(Signal(y))
        system = center(y)
        X = system.design
        for k in range(1, len(path) + 1):
            st = path.step(k)
            eta = direction(system, path.active(k - 1), st.j, st.s).eta
            worst_norm = max(worst_norm, abs(st.omega * float(np.linalg.norm(eta)) - 1.0))
            T = spacing_pivot(path, k, 1.0).T
            pivots_ok &= 0.0 <= T <= 1.0
        for k in range(len(path) + 1):
            r = segment_residual(y, [j for j, _ in path.active(k)])
            r_proj = r - r.mean()
            lhs = X.T @ r_proj
            rhs = system.X1.T @ r
            scale = max(1.0, float(np.max(np.abs(rhs))))
            worst_corr = max(
                worst_corr,
                float(np.max(np.abs(lhs - rhs))) / scale,
                float(np.max(np.abs(rhs - cusum(r, "S")))) / scale,
            )
    ends = max(
        abs(truncated_normal_cdf(a, mu, sd, a, b)) + abs(truncated_normal_cdf(b, mu, sd, a, b) - 1.0)
        for a, b, mu, sd in [(-1.0, 2.0, 0.0, 1.0), (5.0, 7.0, -3.0, 0.5), (-math.inf, 0.3, 1.0, 2.0)]
    )
    ok = worst_norm < 1e-9 and worst_corr < 1e-10 and ends == 0.0 and pivots_ok
    return CheckResult(
        "identities",
        ok,
        count,
        max(worst_norm, worst_corr),
        {"norm_identity": worst_norm, "correlation_identity": worst_corr, "cdf_endpoints": ends, "pivots_in_unit_interval": pivots_ok},
    )


def check_polyhedron(seed: int = 3, count: int = 10, n: int = 40) -> CheckResult:
    """Truncation limits from the explicit polyhedron against the knot triple."""
    worst, bad = 0.0, []
    for i, y in enumerate(_signals(seed, count, (n, n))):
        path = lars_path(Signal(y))
        orc = HitLeaveOracle(path, center(y))
        for k in range(1, len(path) + 1):
            lim = orc.limits(k)
            err = max(abs(lim.nu_minus - path.knot(k + 1)), abs(lim.nu_plus - path.knot(k - 1)) if k > 1 else 0.0)
            worst = max(worst, err)
            if err > LIMIT_ATOL or not lim.nu_zero_ok:
                bad.append((i, k))
    return CheckResult("polyhedron", not bad, count, worst, {"bad_steps": bad})


def check_series(values, sigma: float = 1.0) -> CheckResult:
    """All checks that apply to one user-supplied series."""
    y = np.asarray(values, dtype=float)
    path = lars_path(Signal(y, sigma=sigma))
    details: dict = {"steps": len(path)}
    worst = 0.0
    ok = True
    if y.size <= 60:
        scan = knot_scan(y)
        match = scan.entering == path.changepoints and scan.signs == path.signs
        err = float(np.max(np.abs(scan.lambdas - path.knots))) if match and len(path) else 0.0
        details.update(knot_scan_match=match, leave_events=scan.leave_events)
        ok &= match and not scan.leave_events and err < KNOT_ATOL
        worst = max(worst, err)
    if y.size <= 200 and len(path):
        orc = HitLeaveOracle(path, center(y))
        err = max(abs(orc.limits(k).nu_minus - path.knot(k + 1)) for k in range(1, len(path) + 1))
        details["polyhedron_lower_limit_error"] = err
        ok &= err < LIMIT_ATOL
        worst = max(worst, err)
    for k in range(1, len(path) + 1):
        T = spacing_pivot(path, k, sigma).T
        ok &= 0.0 <= T <= 1.0
    return CheckResult("series", bool(ok), 1, worst, details)


def run_checks(seed: int = 0, quick: bool = False) -> list[CheckResult]:
    """Run every cross-check; ``quick`` shrinks the corpora for smoke tests."""
    scale = 0.1 if quick else 1.0
    return [
        check_knot_scan(seed, max(10, int(200 * scale))),
        check_kkt(seed + 1, max(5, int(50 * scale))),
        check_identities(seed + 2, max(5, int(50 * scale))),
        check_polyhedron(seed + 3, max(2, int(10 * scale))),
    ]
