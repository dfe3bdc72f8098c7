"""CSV ingestion, serialization of series, and noise-scale estimation."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import median_abs_deviation

from .errors import SigmaEstimationError, ValidationError
from .path import Signal, as_signal

NA_TOKENS = frozenset({"", "na", "nan", "null", "none", "."})
MAX_LISTED_LINES = 20


class ReindexWarning(UserWarning):
    """Rows were dropped, so positions no longer match file lines."""


@dataclass(frozen=True)
class IngestResult:
    values: np.ndarray
    source_lines: tuple[int, ...]  # 1-based file line of each kept value
    dropped_lines: tuple[int, ...]
    header: str | None
    column: int


def _parse(cell: str) -> float | None:
    """Float value, ``None`` for an NA token; raises ValueError otherwise."""
    tok = cell.strip()
    if tok.lower() in NA_TOKENS:
        return None
    v = float(tok)
    if not math.isfinite(v):
        raise ValueError(tok)
    return v


def _sniff(sample: str) -> str:
    try:
        return csv.Sniffer().sniff(sample, delimiters=",;\t").delimiter
    except csv.Error:
        return ","


def _resolve_column(column, header: list[str] | None, width: int) -> int:
    if column is None:
        return 0
    if isinstance(column, int) or column.strip().lstrip("-").isdigit():
        idx = int(column)
        if not 0 <= idx < width:
            raise ValidationError(f"column index {idx} outside 0..{width - 1}")
        return idx
    if header is None:
        raise ValidationError(f"column {column!r} requested by name but the file has no header")
    names = [h.strip() for h in header]
    if column not in names:
        raise ValidationError(f"column {column!r} not found; header has {names}")
    return names.index(column)


def read_series(path, column=None, na: str = "fail") -> IngestResult:
    """Read one numeric column of a UTF-8 CSV file.

    Parameters
    ----------
    path : str or Path
    column : int or str, optional
        0-based index or header name. Defaults to the first column.
    na : {"fail", "drop"}
        Missing-value policy. With ``"drop"`` the kept values are compacted
        and a :class:`ReindexWarning` reports the dropped lines.

    Raises
    ------
    ValidationError
        Unparseable cells (listing their line numbers), missing values under
        ``na="fail"``, or fewer than two usable values.
    """
    if na not in ("fail", "drop"):
        raise ValidationError(f"na policy must be 'fail' or 'drop', got {na!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {path}") from None
    except UnicodeDecodeError as exc:
        raise ValidationError(f"input is not valid UTF-8: {exc}") from None

    rows = [
        (lineno, row)
        for lineno, row in enumerate(csv.reader(text.splitlines(), delimiter=_sniff(text[:4096])), start=1)
        if row and any(cell.strip() for cell in row)
    ]
    if not rows:
        raise ValidationError(f"{path}: no data rows")

    first = rows[0][1]
    by_name = isinstance(column, str) and not column.strip().lstrip("-").isdigit()
    if by_name:
        is_header = True
    else:
        try:
            _parse(first[_resolve_column(column, None, len(first))])
            is_header = False
        except ValueError:
            is_header = True
    header = first if is_header else None
    if is_header:
        rows = rows[1:]
    idx = _resolve_column(column, header, len(first))

    values, lines, dropped, bad = [], [], [], []
    for lineno, row in rows:
        if idx >= len(row):
            bad.append(lineno)
            continue
        try:
            v = _parse(row[idx])
        except ValueError:
            bad.append(lineno)
            continue
        if v is None:
            dropped.append(lineno)
            continue
        values.append(v)
        lines.append(lineno)

    if bad:
        shown = ", ".join(map(str, bad[:MAX_LISTED_LINES]))
        more = f" (+{len(bad) - MAX_LISTED_LINES} more)" if len(bad) > MAX_LISTED_LINES else ""
        raise ValidationError(f"{path}: unparseable values on lines {shown}{more}")
    if dropped and na == "fail":
        shown = ", ".join(map(str, dropped[:MAX_LISTED_LINES]))
        raise ValidationError(f"{path}: missing values on lines {shown}; use --na drop to skip them")
    if dropped:
        warnings.warn(
            f"{path}: dropped {len(dropped)} missing value(s) (lines "
            f"{', '.join(map(str, dropped[:MAX_LISTED_LINES]))}); positions are re-indexed "
            "over the remaining rows",
            ReindexWarning,
            stacklevel=2,
        )
    if len(values) < 2:
        raise ValidationError(f"{path}: need at least 2 usable values, found {len(values)}")
    return IngestResult(
        values=np.array(values, dtype=float),
        source_lines=tuple(lines),
        dropped_lines=tuple(dropped),
        header=header[idx].strip() if header is not None else None,
        column=idx,
    )


def ingest_csv(path, column=None, na: str = "fail", sigma: float = 1.0) -> Signal:
    """Read a series into a :class:`Signal` (see :func:`read_series`)."""
    return Signal(read_series(path, column=column, na=na).values, sigma=sigma)


def write_signal_csv(signal, path, header: str | None = "value") -> None:
    """Write one value per line using shortest round-trip float formatting."""
    values = as_signal(signal).values
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header is not None:
            fh.write(f"{header}\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")


def estimate_sigma(signal) -> float:
    """Jump-robust noise scale from the MAD of first differences.

    Differences of a piecewise-constant signal plus noise are pure noise
    differences (variance ``2 sigma^2``) except at the few jumps, which the
    median ignores.
    """
    y = np.asarray(signal.values if isinstance(signal, Signal) else signal, dtype=float)
    if y.size < 3:
        raise SigmaEstimationError(f"need at least 3 values to estimate sigma, got {y.size}")
    mad = float(median_abs_deviation(np.diff(y), scale="normal"))
    if not mad > 0:
        raise SigmaEstimationError(
            "first differences have zero MAD (piecewise-constant input); pass --sigma explicitly"
        )
    return mad / math.sqrt(2.0)
