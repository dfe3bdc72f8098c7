"""Command-line entry point ``fused-spacing``.

Subcommands::

    fit         solution path of a CSV series (knots, changepoints, signs)
    test        path plus a selective p-value and interval for every step
    experiment  seeded simulation study, JSON or CSV output
    verify      oracle cross-checks; exit status 3 on any failure
    toy         the four-point example y = (2, 2, 0, 0)

Errors go to standard error as ``error [CODE]: message``. Exit status is 0
on success, 1 on a library error, 2 on a usage error and 3 when ``verify``
finds a failing check.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

from . import __version__
from .dataio import estimate_sigma, read_series
from .errors import FusedSpacingError
from .experiments import KINDS, ExperimentConfig, run, run_toy
from .path import Signal, lars_path
from .report import DEFAULT_ALPHA, fit_and_test, json_safe, path_summary
from .verify import check_series, run_checks

log = logging.getLogger("fused_spacing")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _level(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _add_input(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("input", nargs=None if required else "?", help="UTF-8 CSV file with one numeric column")
    p.add_argument("--column", help="column name or 0-based index (default: first column)")
    p.add_argument("--na", choices=("drop", "fail"), default="fail", help="missing-value policy (default: fail)")


def _add_format(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv"), default="json", dest="output_format")
    p.add_argument("-o", "--output", help="write here instead of standard output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fused-spacing",
        description="Fused-lasso changepoint path with exact selective inference.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fit", help="solution path of a series")
    _add_input(p)
    p.add_argument("--max-steps", type=_count)
    _add_format(p)

    p = sub.add_parser("test", help="path with selective p-values and intervals")
    _add_input(p)
    p.add_argument("--sigma", type=_positive, help="known noise scale (default: MAD estimate)")
    p.add_argument("--alpha", type=_level, default=DEFAULT_ALPHA)
    p.add_argument("--max-steps", type=_count, help="default: min(n - 1, 50)")
    p.add_argument(
        "--two-sided",
        action="store_true",
        help="report 2 min(T, 1 - T) instead of the one-sided pivot T",
    )
    _add_format(p)

    p = sub.add_parser("experiment", help="run a seeded simulation study")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--replicates", type=_count)
    p.add_argument("--n", type=_count)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=_level)
    p.add_argument("--sigma", type=_positive, action="append", help="noise level; repeat for a grid")
    p.add_argument("--max-steps", type=_count)
    p.add_argument("--workers", type=_count, default=1, help="worker processes (default 1)")
    p.add_argument(
        "--format",
        choices=("json", "csv"),
        default="json",
        dest="output_format",
        help="csv writes one file per table into --output (a directory)",
    )
    p.add_argument("-o", "--output")

    p = sub.add_parser("verify", help="cross-check the path against the oracles")
    _add_input(p, required=False)
    p.add_argument("--sigma", type=_positive, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="smaller corpora")

    p = sub.add_parser("toy", help="the four-point example")
    p.add_argument("--sigma", type=_positive, default=1.0)
    _add_format(p)
    return parser


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load(args) -> tuple[Signal, tuple[int, ...]]:
    res = read_series(args.input, column=args.column, na=args.na)
    log.info("read %d values from %s", res.values.size, args.input)
    return Signal(res.values), res.source_lines


def _cmd_fit(args) -> int:
    signal, _ = _load(args)
    path = lars_path(signal, max_steps=args.max_steps)
    summary = path_summary(path)
    if args.output_format == "json":
        _emit(json.dumps(json_safe(summary), indent=2), args.output)
    else:
        rows = ["k,lambda,j,left_position,right_position,sign,omega"]
        for st in summary["steps"]:
            rows.append(",".join(map(str, [st["k"], repr(st["lambda"]), st["j"], *st["positions"], st["sign"], repr(st["omega"])])))
        _emit("\n".join(rows) + "\n", args.output)
    return EXIT_OK


def _cmd_test(args) -> int:
    signal, lines = _load(args)
    if args.sigma is None:
        sigma, source = estimate_sigma(signal), "estimated"
        log.info("estimated sigma %.6g", sigma)
    else:
        sigma, source = args.sigma, "known"
    signal = Signal(signal.values, sigma=sigma, sigma_source=source)
    report = fit_and_test(signal, alpha=args.alpha, max_steps=args.max_steps, two_sided=args.two_sided)
    if args.na == "drop":
        report.source_lines = lines
    _emit(report.to_json() if args.output_format == "json" else report.to_csv(), args.output)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    overrides = {"seed": args.seed, "workers": args.workers}
    for key in ("replicates", "n", "alpha", "max_steps"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.sigma:
        overrides["sigma_levels"] = tuple(args.sigma)
    cfg = ExperimentConfig.default(args.kind, **overrides)
    log.info("running %s with %d replicates", cfg.kind, cfg.replicates)
    report = run(cfg)
    if args.output_format == "json":
        _emit(report.to_json(indent=1), args.output)
    elif args.output:
        for p in report.write_csv(args.output):
            print(p)
    else:
        _emit(report.table_csv("records"), None)
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = run_checks(args.seed, quick=args.quick)
    if args.input:
        signal, _ = _load(args)
        results.append(check_series(signal.values, sigma=args.sigma))
    failed = [r.name for r in results if not r.ok]
    print(json.dumps(json_safe({"ok": not failed, "failed": failed, "checks": [r.to_dict() for r in results]}), indent=2))
    if failed:
        print(f"error [E_VERIFY]: failing checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_toy(args) -> int:
    report = run_toy(ExperimentConfig.default("toy", sigma_levels=(args.sigma,)))
    if args.output_format == "json":
        _emit(report.to_json(indent=1), args.output)
    else:
        _emit(report.table_csv("records"), args.output)
    return EXIT_OK


COMMANDS = {
    "fit": _cmd_fit,
    "test": _cmd_test,
    "experiment": _cmd_experiment,
    "verify": _cmd_verify,
    "toy": _cmd_toy,
}


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    warnings.showwarning = _show_warning
    try:
        return COMMANDS[args.command](args)
    except FusedSpacingError as exc:
        code = exc.code
        msg = super(FusedSpacingError, exc).__str__()
        print(f"error [{code}]: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error [E_IO]: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
