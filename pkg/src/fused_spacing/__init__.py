"""Fused-lasso changepoint paths with exact post-selection spacing tests."""

from __future__ import annotations

__version__ = "0.1.0"

from .dataio import estimate_sigma, ingest_csv, read_series, write_signal_csv
from .errors import (
    DomainError,
    FusedSpacingError,
    NumericalError,
    OracleFailure,
    PathConsistencyError,
    SigmaEstimationError,
    TieError,
    ValidationError,
)
from .oracle import flsa_solve, knot_scan, tn_sampler
from .path import FusedPath, PathStep, Signal, center, cusum, fitted_means, lars_path
from .polyhedron import HitLeaveOracle, hit_leave_polyhedron, polyhedral_limits
from .report import FitReport, fit_and_test
from .selective import SpacingResult, all_pivots, selective_ci, spacing_pivot
from .truncnorm import tail_probability, truncated_normal_cdf

__all__ = [
    "DomainError",
    "FitReport",
    "FusedPath",
    "FusedSpacingError",
    "HitLeaveOracle",
    "NumericalError",
    "OracleFailure",
    "PathConsistencyError",
    "PathStep",
    "SigmaEstimationError",
    "Signal",
    "SpacingResult",
    "TieError",
    "ValidationError",
    "all_pivots",
    "center",
    "cusum",
    "estimate_sigma",
    "fit_and_test",
    "fitted_means",
    "flsa_solve",
    "hit_leave_polyhedron",
    "ingest_csv",
    "knot_scan",
    "lars_path",
    "polyhedral_limits",
    "read_series",
    "selective_ci",
    "spacing_pivot",
    "tail_probability",
    "tn_sampler",
    "truncated_normal_cdf",
    "write_signal_csv",
]
