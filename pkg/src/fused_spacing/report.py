"""Per-step inference report for an observed series.

JSON reports carry ``format_version``. The CSV form has one row per step with
the columns of :data:`CSV_COLUMNS`, in that order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from .path import FusedPath, Signal, as_signal, lars_path
from .selective import spacing_pivot

FORMAT_VERSION = "1.0"
DEFAULT_ALPHA = 0.05
DEFAULT_MAX_STEPS = 50

CSV_COLUMNS = (
    "k",
    "lambda_prev",
    "lambda",
    "lambda_next",
    "j",
    "left_position",
    "right_position",
    "sign",
    "omega",
    "T",
    "p_value",
    "ci_lower",
    "ci_upper",
    "jump_ci_lower",
    "jump_ci_upper",
    "significant",
    "selected",
)


def _finite_or_str(x: float):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else None)
    return x


def json_safe(obj):
    """Recursively replace non-finite floats so the output is strict JSON."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item) and getattr(obj, "ndim", 1) == 0:
        obj = obj.item()
    if isinstance(obj, float):
        return _finite_or_str(obj)
    return obj


@dataclass(frozen=True)
class StepReport:
    k: int
    lambda_prev: float
    lambda_: float
    lambda_next: float
    j: int
    positions: tuple[int, int]
    sign: int
    omega: float
    T: float
    p_value: float
    ci: tuple[float, float]
    jump_ci: tuple[float, float]
    significant: bool
    selected: bool = False

    def to_dict(self) -> dict:
        d = {("lambda" if k == "lambda_" else k): v for k, v in asdict(self).items()}
        d["positions"] = list(self.positions)
        d["ci"] = list(self.ci)
        d["jump_ci"] = list(self.jump_ci)
        return d

    def csv_row(self) -> list:
        return [
            self.k,
            self.lambda_prev,
            self.lambda_,
            self.lambda_next,
            self.j,
            self.positions[0],
            self.positions[1],
            self.sign,
            self.omega,
            self.T,
            self.p_value,
            self.ci[0],
            self.ci[1],
            self.jump_ci[0],
            self.jump_ci[1],
            int(self.significant),
            int(self.selected),
        ]


@dataclass
class FitReport:
    """Everything ``fit_and_test`` computes for one series."""

    n: int
    sigma: float
    sigma_source: str
    alpha: float
    two_sided: bool
    max_steps: int
    steps: list[StepReport] = field(default_factory=list)
    path_reason: str = "complete"
    terminated_early: bool = False
    source_lines: tuple[int, ...] | None = None

    @property
    def no_changepoints(self) -> bool:
        return not self.steps

    @property
    def selected(self) -> list[int]:
        """Changepoints of the leading run of significant steps."""
        return [st.j for st in self.steps if st.selected]

    def to_dict(self) -> dict:
        d = {
            "format_version": FORMAT_VERSION,
            "n": self.n,
            "sigma": self.sigma,
            "sigma_source": self.sigma_source,
            "alpha": self.alpha,
            "p_value_kind": "two-sided" if self.two_sided else "one-sided",
            "max_steps": self.max_steps,
            "path_reason": self.path_reason,
            "terminated_early": self.terminated_early,
            "no_changepoints": self.no_changepoints,
            "selection_rule": "sequential: steps before the first p_value >= alpha",
            "selected_changepoints": self.selected,
            "steps": [st.to_dict() for st in self.steps],
        }
        if self.source_lines is not None:
            d["source_lines"] = list(self.source_lines)
        return d

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(json_safe(self.to_dict()), indent=indent, allow_nan=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for st in self.steps:
            w.writerow(json_safe(st.csv_row()))
        return buf.getvalue()


def path_summary(path: FusedPath) -> dict:
    """Knots and entries of a path as plain data (no inference)."""
    return {
        "format_version": FORMAT_VERSION,
        "n": path.n,
        "path_reason": path.reason,
        "terminated_early": path.terminated_early,
        "lambda_next": path.lambda_next,
        "no_changepoints": len(path) == 0,
        "steps": [
            {
                "k": st.k,
                "lambda": st.lam,
                "j": st.j,
                "positions": list(st.positions),
                "sign": st.s,
                "omega": st.omega,
            }
            for st in path.steps
        ],
    }


def fit_and_test(
    signal,
    alpha: float = DEFAULT_ALPHA,
    max_steps: int | None = None,
    two_sided: bool = False,
) -> FitReport:
    """Run the path and attach a pivot and selective interval to every step.

    ``signal.sigma`` is treated as the known noise level; its provenance is
    echoed as ``sigma_source``.
    """
    signal = as_signal(signal)
    if max_steps is None:
        max_steps = min(signal.n - 1, DEFAULT_MAX_STEPS)
    path = lars_path(signal, max_steps=max_steps)
    report = FitReport(
        n=signal.n,
        sigma=signal.sigma,
        sigma_source=signal.sigma_source,
        alpha=alpha,
        two_sided=two_sided,
        max_steps=max_steps,
        path_reason=path.reason,
        terminated_early=path.terminated_early,
    )
    running = True
    for k in range(1, len(path) + 1):
        res = spacing_pivot(path, k, signal.sigma, alpha=alpha)
        st = path.step(k)
        p = res.two_sided if two_sided else res.T
        significant = p < alpha
        running = running and significant
        report.steps.append(
            StepReport(
                k=k,
                lambda_prev=path.knot(k - 1),
                lambda_=st.lam,
                lambda_next=path.knot(k + 1),
                j=st.j,
                positions=st.positions,
                sign=st.s,
                omega=st.omega,
                T=res.T,
                p_value=p,
                ci=res.ci,
                jump_ci=res.jump_ci,
                significant=significant,
                selected=running,
            )
        )
    return report


def with_sigma(signal: Signal, sigma: float, source: str) -> Signal:
    return Signal(signal.values, sigma=sigma, sigma_source=source)
