"""Seeded simulation studies.

Every replicate draws from its own Philox substream keyed by
``(seed, replicate)``, so serial and parallel runs give identical records.
Results are collected in replicate order.

Kinds
-----
equivalence   closed-form pivot versus the explicit hit/leave polyhedron
calibration   null distribution of the first pivots, KS test and QQ data
power         rejection rate of ``T_1`` for a centred step of size ``delta``
coverage      selective interval coverage under the null and a planted jump
complexity    reduced constraint count versus ``k``; path time versus ``n``
toy           the four-point example ``y = (2, 2, 0, 0)``
cgh           end-to-end fit and test on a synthetic copy-number profile
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np
from scipy.stats import kstest

from .dataio import estimate_sigma
from .errors import FusedSpacingError, TieError, ValidationError
from .oracle import flsa_solve, knot_scan
from .path import Signal, center, cusum, lars_path, segment_residual
from .polyhedron import HitLeaveOracle
from .report import fit_and_test, json_safe
from .selective import contrast, pivot, selective_ci, spacing_pivot, truncation
from .truncnorm import tail_probability

FORMAT_VERSION = "1.0"
KINDS = ("equivalence", "calibration", "power", "coverage", "complexity", "toy", "cgh")
TOY_SIGNAL = (2.0, 2.0, 0.0, 0.0)
# values usually quoted for the toy example, kept for comparison only
TOY_REFERENCE = {"lambda_1": 2.0, "j_1": 3, "s_1": -1, "lambda_2": 1.0, "j_2": 1, "s_2": 1, "steps": 2}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int = 100
    replicates: int = 1000
    seed: int = 0
    sigma_levels: tuple[float, ...] = (1.0,)
    delta_levels: tuple[float, ...] = (0.0,)
    alpha: float = 0.05
    max_steps: int | None = None
    steps: tuple[int, ...] = (1, 2)
    n_grid: tuple[int, ...] = (50, 100, 200, 400, 800)
    timing_repeats: int = 3
    breakpoints: tuple[float, ...] = (0.3, 0.5, 0.8)
    levels: tuple[float, ...] = (0.0, 3.0, -3.0, 0.0)
    location_tolerance: int = 2
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        if self.n < 2:
            raise ValidationError("n must be >= 2")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        if any(not (s > 0 and math.isfinite(s)) for s in self.sigma_levels):
            raise ValidationError("sigma levels must be positive")
        if any(d < 0 for d in self.delta_levels):
            raise ValidationError("delta levels must be nonnegative")
        if any(k < 1 for k in self.steps):
            raise ValidationError("steps are 1-based")
        if self.max_steps is not None and not 1 <= self.max_steps <= self.n - 1:
            raise ValidationError(f"max_steps must lie in 1..{self.n - 1}")
        if len(self.levels) != len(self.breakpoints) + 1:
            raise ValidationError("need one more level than breakpoints")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    @classmethod
    def default(cls, kind: str, **overrides) -> ExperimentConfig:
        """Configuration of the standard study for ``kind``."""
        if kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {kind!r}; choose from {KINDS}")
        base = {
            "equivalence": dict(n=100, replicates=1000),
            "calibration": dict(n=100, replicates=10_000, steps=(1, 2)),
            "power": dict(
                n=100,
                replicates=2000,
                delta_levels=(0.0, 0.25, 0.5, 0.75, 1.0),
                sigma_levels=(1.0, 1.5, 2.0),
                alpha=0.05,
            ),
            "coverage": dict(n=100, replicates=10_000, delta_levels=(0.0, 2.0), alpha=0.10, steps=(1,)),
            "complexity": dict(n=100, replicates=20, max_steps=40),
            "toy": dict(n=4, replicates=1),
            "cgh": dict(n=400, replicates=500, alpha=0.05, max_steps=50),
        }[kind]
        base.update(overrides)
        return cls(kind=kind, **base)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentReport:
    config: dict
    records: list[dict]
    summary: dict
    tables: dict[str, list[dict]] = field(default_factory=dict)
    tie_aborts: int = 0
    format_version: str = FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "config": self.config,
            "summary": self.summary,
            "tie_aborts": self.tie_aborts,
            "tables": self.tables,
            "records": self.records,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(json_safe(self.to_dict()), indent=indent, allow_nan=False)

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json(indent=1))

    def table_csv(self, name: str = "records") -> str:
        """One table as CSV text; columns follow the first row's key order.

        List-valued cells are written space-separated.
        """
        rows = self.records if name == "records" else self.tables[name]
        if not rows:
            return ""
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _csv_cell(v) for k, v in r.items()})
        return buf.getvalue()

    def write_csv(self, directory) -> list[str]:
        """Write ``records.csv`` and one file per table; returns the paths."""
        os.makedirs(directory, exist_ok=True)
        written = []
        for name in ["records", *self.tables]:
            text = self.table_csv(name)
            if not text:
                continue
            p = os.path.join(directory, f"{self.config['kind']}_{name}.csv")
            with open(p, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(p)
        return written


def _csv_cell(v):
    v = json_safe(v)
    if isinstance(v, list):
        return " ".join(str(x) for x in v)
    return v


def replicate_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def _map(fn, items, workers: int) -> list:
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


def ks_uniform(x) -> dict:
    """KS statistic and asymptotic p-value of ``x`` against ``U[0, 1]``."""
    x = np.asarray(x, dtype=float)
    res = kstest(x, "uniform", method="asymp")
    return {
        "N": int(x.size),
        "ks_statistic": float(res.statistic),
        "p_value": float(res.pvalue),
        "critical_0.01": 1.63 / math.sqrt(x.size),
    }


def qq_table(x, label) -> list[dict]:
    x = np.sort(np.asarray(x, dtype=float))
    N = x.size
    expected = (np.arange(1, N + 1) - 0.5) / N
    return [{"series": label, "expected": float(e), "observed": float(o)} for e, o in zip(expected, x)]


def _linfit(x, y) -> dict:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return {"slope": float(coef[0]), "intercept": float(coef[1]), "r2": 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0}


# ---------------------------------------------------------------- equivalence

def ulp_sensitivity(lam_prev: float, lam: float, lam_next: float, omega_k: float, sigma: float) -> float:
    """Largest change of ``T_k`` when one of its inputs moves by one ulp.

    Two independent double-precision computations of the knots cannot agree
    more closely than this, whatever the algorithm.
    """
    base = pivot(lam_prev, lam, lam_next, omega_k, sigma)
    moves = [
        pivot(lam_prev, np.nextafter(lam, math.inf), lam_next, omega_k, sigma),
        pivot(lam_prev, lam, lam_next, np.nextafter(omega_k, math.inf), sigma),
    ]
    if lam_next > 0:
        moves.append(pivot(lam_prev, lam, np.nextafter(lam_next, math.inf), omega_k, sigma))
    if math.isfinite(lam_prev):
        moves.append(pivot(np.nextafter(lam_prev, -math.inf), lam, lam_next, omega_k, sigma))
    return max(abs(m - base) for m in moves)


def _equivalence_rep(i: int, cfg: ExperimentConfig):
    sigma = cfg.sigma_levels[0]
    y = sigma * replicate_rng(cfg.seed, i).standard_normal(cfg.n)
    path = lars_path(y, max_steps=cfg.max_steps)
    if path.reason == "tie":
        return None
    orc = HitLeaveOracle(path, center(y))
    out = []
    for k in range(1, len(path) + 1):
        ours = spacing_pivot(path, k, sigma)
        T_poly, lim = orc.pivot(k, sigma)
        lam_prev = path.knot(k - 1)
        chain_only = k == 1 or (orc.chain_row(k) in lim.upper_rows and not orc.unexplained_upper_rows(k, lim))
        out.append(
            {
                "replicate": i,
                "k": k,
                "lambda": path.knot(k),
                "lambda_next": path.knot(k + 1),
                "nu_minus": lim.nu_minus,
                "lambda_diff": abs(lim.nu_minus - path.knot(k + 1)),
                "nu_plus_diff": 0.0 if math.isinf(lam_prev) and math.isinf(lim.nu_plus) else abs(lim.nu_plus - lam_prev),
                "T": ours.T,
                "T_oracle": T_poly,
                "T_diff": abs(ours.T - T_poly),
                "T_ulp_sensitivity": ulp_sensitivity(lam_prev, path.knot(k), path.knot(k + 1), ours.omega, sigma),
                "nu_zero_ok": lim.nu_zero_ok,
                "leave_rows": len(orc.envelope_sets(k)[1]),
                "chain_only_upper": chain_only,
            }
        )
    return out


def run_equivalence(cfg: ExperimentConfig) -> ExperimentReport:
    """Compare ``[lambda_{k+1}, lambda_{k-1}]`` and ``T_k`` with the polyhedral oracle."""
    reps = _map(partial(_equivalence_rep, cfg=cfg), range(cfg.replicates), cfg.workers)
    records = [r for rep in reps if rep is not None for r in rep]
    ties = sum(rep is None for rep in reps)
    ld = np.array([r["lambda_diff"] for r in records])
    td = np.array([r["T_diff"] for r in records])
    by_k = {}
    for r in records:
        cur = by_k.setdefault(
            r["k"], {"k": r["k"], "count": 0, "max_lambda_diff": 0.0, "max_T_diff": 0.0, "max_T_ulp_sensitivity": 0.0}
        )
        cur["count"] += 1
        cur["max_lambda_diff"] = max(cur["max_lambda_diff"], r["lambda_diff"])
        cur["max_T_diff"] = max(cur["max_T_diff"], r["T_diff"])
        cur["max_T_ulp_sensitivity"] = max(cur["max_T_ulp_sensitivity"], r["T_ulp_sensitivity"])
    summary = {
        "replicates_used": cfg.replicates - ties,
        "steps_compared": len(records),
        "max_lambda_diff": float(ld.max()) if ld.size else 0.0,
        "mean_lambda_diff": float(ld.mean()) if ld.size else 0.0,
        "max_T_diff": float(td.max()) if td.size else 0.0,
        "mean_T_diff": float(td.mean()) if td.size else 0.0,
        "max_nu_plus_diff": max((r["nu_plus_diff"] for r in records), default=0.0),
        "max_T_ulp_sensitivity": max((r["T_ulp_sensitivity"] for r in records), default=0.0),
        "steps_with_ulp_sensitivity_above_1e-13": sum(r["T_ulp_sensitivity"] > 1e-13 for r in records),
        "all_nu_zero_ok": all(r["nu_zero_ok"] for r in records),
        "leave_rows_total": sum(r["leave_rows"] for r in records),
        "upper_bound_only_chain": all(r["chain_only_upper"] for r in records),
    }
    return ExperimentReport(cfg.to_dict(), records, summary, {"by_step": list(by_k.values())}, ties)


# ---------------------------------------------------------------- calibration

def _calibration_rep(i: int, cfg: ExperimentConfig) -> dict:
    sigma = cfg.sigma_levels[0]
    y = sigma * replicate_rng(cfg.seed, i).standard_normal(cfg.n)
    path = lars_path(y, max_steps=max(cfg.steps))
    rec = {"replicate": i, "tie": path.reason == "tie"}
    for k in cfg.steps:
        rec[f"T{k}"] = spacing_pivot(path, k, sigma).T if k <= len(path) else None
    return rec


def run_calibration(cfg: ExperimentConfig) -> ExperimentReport:
    """Null pivots ``T_k`` for ``k`` in ``cfg.steps`` with KS tests and QQ data."""
    records = _map(partial(_calibration_rep, cfg=cfg), range(cfg.replicates), cfg.workers)
    ties = sum(r["tie"] for r in records)
    summary, qq = {}, []
    for k in cfg.steps:
        vals = np.array([r[f"T{k}"] for r in records if r[f"T{k}"] is not None])
        ks = ks_uniform(vals)
        ks["max_qq_deviation"] = float(np.max(np.abs(np.sort(vals) - (np.arange(1, vals.size + 1) - 0.5) / vals.size)))
        ks["min"] = float(vals.min())
        ks["max"] = float(vals.max())
        summary[f"T{k}"] = ks
        qq.extend(qq_table(vals, f"T{k}"))
    return ExperimentReport(cfg.to_dict(), records, summary, {"qq": qq}, ties)


# ---------------------------------------------------------------- power

def step_mean(n: int, delta: float) -> np.ndarray:
    """0 on the first half, ``delta`` on the second."""
    mu = np.zeros(n)
    mu[n // 2:] = delta
    return mu


def _power_rep(i: int, cfg: ExperimentConfig) -> list[dict]:
    # common random numbers across the (delta, sigma) grid
    z = replicate_rng(cfg.seed, i).standard_normal(cfg.n)
    out = []
    for sigma in cfg.sigma_levels:
        for delta in cfg.delta_levels:
            y = step_mean(cfg.n, delta) + sigma * z
            path = lars_path(y, max_steps=1)
            if len(path) < 1:
                out.append({"replicate": i, "delta": delta, "sigma": sigma, "T1": None, "reject": None})
                continue
            T = spacing_pivot(path, 1, sigma).T
            out.append({"replicate": i, "delta": delta, "sigma": sigma, "T1": T, "reject": T < cfg.alpha})
    return out


def run_power(cfg: ExperimentConfig) -> ExperimentReport:
    """Empirical ``P(T_1 < alpha)`` over the ``(delta, sigma)`` grid."""
    reps = _map(partial(_power_rep, cfg=cfg), range(cfg.replicates), cfg.workers)
    records = [r for rep in reps for r in rep]
    grid = []
    for sigma in cfg.sigma_levels:
        for delta in cfg.delta_levels:
            rej = [r["reject"] for r in records if r["sigma"] == sigma and r["delta"] == delta and r["reject"] is not None]
            p = float(np.mean(rej))
            grid.append(
                {
                    "delta": delta,
                    "sigma": sigma,
                    "variance": sigma * sigma,
                    "power": p,
                    "se": math.sqrt(p * (1 - p) / len(rej)),
                    "replicates": len(rej),
                }
            )
    return ExperimentReport(cfg.to_dict(), records, {"alpha": cfg.alpha, "grid": grid}, {"power": grid})


# ---------------------------------------------------------------- coverage

def _coverage_rep(i: int, cfg: ExperimentConfig) -> list[dict]:
    sigma = cfg.sigma_levels[0]
    z = replicate_rng(cfg.seed, i).standard_normal(cfg.n)
    out = []
    for delta in cfg.delta_levels:
        mu = step_mean(cfg.n, delta)
        y = mu + sigma * z
        path = lars_path(y, max_steps=max(cfg.steps))
        for k in cfg.steps:
            if k > len(path):
                continue
            st = path.step(k)
            theta = contrast(path, k, mu)
            lo, hi = selective_ci(path, k, sigma, cfg.alpha)
            iv = truncation(path, k)
            pivot_at_truth = tail_probability(st.lam, theta, sigma / st.omega, iv.lower, iv.upper)
            out.append(
                {
                    "replicate": i,
                    "delta": delta,
                    "k": k,
                    "theta": theta,
                    "ci_lower": lo,
                    "ci_upper": hi,
                    "covered": lo <= theta <= hi,
                    "pivot_at_truth": pivot_at_truth,
                }
            )
    return out


def run_coverage(cfg: ExperimentConfig) -> ExperimentReport:
    """Coverage of the ``1 - alpha`` selective interval for ``eta_k^T mu``."""
    reps = _map(partial(_coverage_rep, cfg=cfg), range(cfg.replicates), cfg.workers)
    records = [r for rep in reps for r in rep]
    rows = []
    for delta in cfg.delta_levels:
        for k in cfg.steps:
            sel = [r for r in records if r["delta"] == delta and r["k"] == k]
            if not sel:
                continue
            cov = float(np.mean([r["covered"] for r in sel]))
            ks = ks_uniform([r["pivot_at_truth"] for r in sel])
            rows.append(
                {
                    "delta": delta,
                    "k": k,
                    "coverage": cov,
                    "se": math.sqrt(cov * (1 - cov) / len(sel)),
                    "replicates": len(sel),
                    "pivot_ks_statistic": ks["ks_statistic"],
                    "pivot_ks_p_value": ks["p_value"],
                }
            )
    return ExperimentReport(cfg.to_dict(), records, {"level": 1 - cfg.alpha, "grid": rows}, {"coverage": rows})


# ---------------------------------------------------------------- complexity

def _time_path(y: np.ndarray, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        lars_path(y)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def run_complexity(cfg: ExperimentConfig) -> ExperimentReport:
    """Constraint growth of the reduced polyhedron and path runtime scaling.

    Timings are wall-clock and therefore excluded from the replicate records;
    they appear in the ``timing`` table only.
    """
    K = cfg.max_steps or min(cfg.n - 1, 40)
    records = []
    for i in range(cfg.replicates):
        y = cfg.sigma_levels[0] * replicate_rng(cfg.seed, i).standard_normal(cfg.n)
        path = lars_path(y, max_steps=K)
        orc = HitLeaveOracle(path, center(y))
        for k in range(1, len(path) + 1):
            poly = orc.polyhedron(k)
            records.append(
                {
                    "replicate": i,
                    "k": k,
                    "reduced_rows": len(poly.reduced()),
                    "full_rows": len(poly),
                    "leave_rows": poly.leave_count,
                }
            )
    ks = sorted({r["k"] for r in records})
    mean_rows = [float(np.mean([r["reduced_rows"] for r in records if r["k"] == k])) for k in ks]
    mean_full = [float(np.mean([r["full_rows"] for r in records if r["k"] == k])) for k in ks]
    growth = _linfit(ks, mean_rows)

    timing = []
    for idx, n in enumerate(cfg.n_grid):
        y = replicate_rng(cfg.seed, 10**6 + idx).standard_normal(n)
        timing.append({"n": n, "seconds": _time_path(y, cfg.timing_repeats)})
    slope = _linfit(np.log([t["n"] for t in timing]), np.log([t["seconds"] for t in timing]))
    summary = {
        "constraints_per_step": growth["slope"],
        "constraint_fit_r2": growth["r2"],
        "constraint_fit_intercept": growth["intercept"],
        "leave_rows_total": sum(r["leave_rows"] for r in records),
        "runtime_loglog_slope": slope["slope"],
        "runtime_fit_r2": slope["r2"],
        "timing_repeats": cfg.timing_repeats,
    }
    tables = {
        "constraints": [{"k": k, "mean_reduced_rows": a, "mean_full_rows": b} for k, a, b in zip(ks, mean_rows, mean_full)],
        "timing": timing,
    }
    return ExperimentReport(cfg.to_dict(), records, summary, tables)


# ---------------------------------------------------------------- toy

def run_toy(cfg: ExperimentConfig | None = None) -> ExperimentReport:
    """Path, envelope sets and oracle certificate for ``y = (2, 2, 0, 0)``."""
    cfg = cfg or ExperimentConfig.default("toy")
    sigma = cfg.sigma_levels[0]
    y = np.array(TOY_SIGNAL)
    path = lars_path(Signal(y, sigma=sigma))
    system = center(y)
    orc = HitLeaveOracle(path, system)

    steps, envelope, binding = [], [], []
    for k in range(1, len(path) + 1):
        st = path.step(k)
        res = spacing_pivot(path, k, sigma)
        steps.append(
            {
                "k": k,
                "lambda": st.lam,
                "j": st.j,
                "positions": list(st.positions),
                "s": st.s,
                "omega": st.omega,
                "lambda_prev": path.knot(k - 1),
                "lambda_next": path.knot(k + 1),
                "T": res.T,
            }
        )
        plus, minus = orc.envelope_sets(k)
        d_now, d_next = orc.directions(k), orc.directions(k + 1)
        i_now, i_next = d_now.index(), d_next.index()
        eta = orc.eta(k)
        for p in plus:
            c = d_now.C[:, i_now[p]]
            envelope.append(
                {
                    "k": k,
                    "set": "S_plus",
                    "j": p[0],
                    "s": p[1],
                    "value": float(c @ system.y_centered),
                    "a": float(c @ eta) / float(eta @ eta),
                    "next_hit": float(d_next.C[:, i_next[p]] @ system.y_centered) if p in i_next else None,
                }
            )
        for p in minus:
            envelope.append({"k": k, "set": "S_minus", "j": p[0], "s": p[1]})
        lim = orc.limits(k)
        poly = orc.polyhedron(k)
        binding.append(
            {
                "k": k,
                "lower_rows": [list(poly.tags[i]) for i in lim.lower_rows],
                "upper_rows": [list(poly.tags[i]) for i in lim.upper_rows],
                "nu_minus": lim.nu_minus,
                "nu_plus": lim.nu_plus,
                "S_minus_size": len(minus),
            }
        )

    cusum_rows = []
    for k in range(0, len(path) + 1):
        r = segment_residual(y, [j for j, _ in path.active(k)])
        for j, c in enumerate(cusum(r), start=1):
            cusum_rows.append({"after_step": k, "j": j, "C": float(c), "abs_C": abs(float(c))})

    scan = knot_scan(y)
    oracle_steps = [{"lambda": kn.lam, "j": kn.j, "s": kn.s} for kn in scan.knots]
    mid = 0.5 * (path.knot(1) + path.knot(2)) if len(path) else 1.0
    sol = flsa_solve(y, mid)
    checks = {
        "lambda_1_is_2": bool(len(path) and abs(path.knot(1) - 2.0) < 1e-12),
        "s_1_is_minus_1": bool(len(path) and path.step(1).s == -1),
        "two_steps": len(path) == 2,
        "S_minus_empty": all(b["S_minus_size"] == 0 for b in binding),
        "oracle_entries_match": [s["j"] for s in oracle_steps] == path.changepoints
        and [s["s"] for s in oracle_steps] == path.signs,
        "oracle_knots_match": len(scan.knots) == len(path)
        and bool(np.allclose(scan.lambdas, path.knots, atol=1e-6)),
        "lambda_2_matches_oracle": abs(path.knot(2) - (scan.knots[1].lam if len(scan.knots) > 1 else 0.0)) < 1e-6,
    }
    summary = {
        "steps": len(path),
        "path_reason": path.reason,
        "knots": path.knots.tolist(),
        "lambda_2": path.knot(2),
        "changepoints": path.changepoints,
        "signs": path.signs,
        "oracle": {
            "knots": oracle_steps,
            "leave_events": scan.leave_events,
            "fit_between_knots": {"lambda": mid, "mu_hat": sol.mu_hat.tolist(), "changepoints": sorted(sol.changepoints)},
        },
        "reference_values": TOY_REFERENCE,
        "checks": checks,
    }
    return ExperimentReport(
        cfg.to_dict(),
        steps,
        summary,
        {"envelope": envelope, "binding": binding, "cusum": cusum_rows},
    )


# ---------------------------------------------------------------- cgh

def cgh_profile(cfg: ExperimentConfig) -> tuple[np.ndarray, list[int]]:
    """Piecewise-constant mean with breaks at ``cfg.breakpoints`` (fractions of n)."""
    cps = [int(round(f * cfg.n)) for f in cfg.breakpoints]
    if any(not 1 <= c <= cfg.n - 1 for c in cps) or len(set(cps)) != len(cps) or cps != sorted(cps):
        raise ValidationError(f"breakpoints {cfg.breakpoints} do not give distinct interior changepoints")
    widths = np.diff([0, *cps, cfg.n])
    return np.repeat(np.asarray(cfg.levels, dtype=float), widths), cps


def _cgh_rep(i: int, cfg: ExperimentConfig) -> dict:
    mu, cps = cgh_profile(cfg)
    y = mu + cfg.sigma_levels[0] * replicate_rng(cfg.seed, i).standard_normal(cfg.n)
    sigma_hat = estimate_sigma(y)
    try:
        rep = fit_and_test(Signal(y, sigma=sigma_hat, sigma_source="estimated"), alpha=cfg.alpha, max_steps=cfg.max_steps)
    except (TieError, FusedSpacingError) as exc:
        return {"replicate": i, "sigma_hat": sigma_hat, "selected": [], "significant": [], "exact": False, "within_tolerance": False, "error": str(exc)}
    sel = sorted(rep.selected)
    sig = sorted(st.j for st in rep.steps if st.significant)
    tol = cfg.location_tolerance
    return {
        "replicate": i,
        "sigma_hat": sigma_hat,
        "selected": sel,
        "significant": sig,
        "exact": sel == cps,
        "within_tolerance": len(sel) == len(cps) and all(abs(a - b) <= tol for a, b in zip(sel, cps)),
        "error": None,
    }


def run_cgh(cfg: ExperimentConfig) -> ExperimentReport:
    """How often sequential testing recovers exactly the planted changepoints.

    A replicate succeeds when the selected set (steps before the first
    non-significant one) has one changepoint within ``location_tolerance``
    positions of each planted break and nothing else.
    """
    records = _map(partial(_cgh_rep, cfg=cfg), range(cfg.replicates), cfg.workers)
    _, cps = cgh_profile(cfg)
    counts = {}
    for r in records:
        counts[len(r["selected"])] = counts.get(len(r["selected"]), 0) + 1
    jumps = np.abs(np.diff(cfg.levels))
    summary = {
        "planted": cps,
        "min_jump_over_sigma": float(jumps.min() / cfg.sigma_levels[0]),
        "success_rate": float(np.mean([r["within_tolerance"] for r in records])),
        "exact_rate": float(np.mean([r["exact"] for r in records])),
        "selected_count_distribution": {str(k): v for k, v in sorted(counts.items())},
        "mean_sigma_hat": float(np.mean([r["sigma_hat"] for r in records])),
        "errors": sum(r["error"] is not None for r in records),
    }
    return ExperimentReport(cfg.to_dict(), records, summary)


RUNNERS = {
    "equivalence": run_equivalence,
    "calibration": run_calibration,
    "power": run_power,
    "coverage": run_coverage,
    "complexity": run_complexity,
    "toy": run_toy,
    "cgh": run_cgh,
}


def run(cfg: ExperimentConfig) -> ExperimentReport:
    return RUNNERS[cfg.kind](cfg)
