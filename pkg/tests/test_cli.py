from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from fused_spacing.cli import main
from fused_spacing.report import CSV_COLUMNS


@pytest.fixture
def toy_csv(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("2\n2\n0\n0\n", encoding="utf-8")
    return p


@pytest.fixture
def noisy_csv(tmp_path):
    rng = np.random.default_rng(9)
    y = rng.standard_normal(80) + np.repeat([0.0, 3.0], 40)
    p = tmp_path / "noisy.csv"
    p.write_text("logratio\n" + "\n".join(map(repr, y.tolist())) + "\n", encoding="utf-8")
    return p


def test_fit_json(toy_csv, capsys):
    assert main(["fit", str(toy_csv)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["steps"][0]["j"] == 2 and out["steps"][0]["positions"] == [2, 3]


def test_fit_csv(toy_csv, capsys):
    assert main(["fit", str(toy_csv), "--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["lambda"] == "2.0" and rows[0]["sign"] == "-1"


def test_test_with_known_sigma(toy_csv, capsys):
    assert main(["test", str(toy_csv), "--sigma", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["sigma_source"] == "known"
    assert out["steps"][0]["T"] == pytest.approx(0.045500263896358414, rel=1e-13)


def test_test_estimates_sigma_by_default(noisy_csv, capsys):
    assert main(["test", str(noisy_csv), "--column", "logratio", "--max-steps", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["sigma_source"] == "estimated"
    assert 0.7 < out["sigma"] < 1.3
    assert out["selected_changepoints"] == [40]


def test_test_csv_and_two_sided(noisy_csv, tmp_path, capsys):
    dest = tmp_path / "out.csv"
    assert main(["test", str(noisy_csv), "--sigma", "1", "--two-sided", "--format", "csv", "-o", str(dest)]) == 0
    rows = list(csv.reader(dest.open(encoding="utf-8")))
    assert tuple(rows[0]) == CSV_COLUMNS
    rec = dict(zip(rows[0], rows[1]))
    T = float(rec["T"])
    assert float(rec["p_value"]) == pytest.approx(min(1.0, 2 * min(T, 1 - T)))


def test_constant_input_errors_without_sigma(tmp_path, capsys):
    p = tmp_path / "c.csv"
    p.write_text("1\n1\n1\n1\n", encoding="utf-8")
    assert main(["test", str(p)]) == 1
    err = capsys.readouterr().err
    assert "error [E_SIGMA]" in err and "--sigma" in err
    assert main(["test", str(p), "--sigma", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["no_changepoints"] is True


def test_na_drop_warns_and_records_lines(tmp_path, capsys):
    p = tmp_path / "na.csv"
    p.write_text("v\n0.1\nNA\n2.3\n-0.4\n1.9\n", encoding="utf-8")
    assert main(["test", str(p), "--na", "drop", "--sigma", "1"]) == 0
    captured = capsys.readouterr()
    assert "re-indexed" in captured.err
    assert json.loads(captured.out)["source_lines"] == [2, 4, 5, 6]
    assert main(["test", str(p), "--sigma", "1"]) == 1
    assert "error [E_INPUT]" in capsys.readouterr().err


def test_bad_rows_are_reported(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("1\nfoo\n2\n", encoding="utf-8")
    assert main(["fit", str(p)]) == 1
    assert "line" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    assert main(["fit", str(tmp_path / "absent.csv")]) == 1
    assert "error [E_INPUT]" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["test", "x.csv", "--alpha", "1.5"], ["test", "x.csv", "--sigma", "-1"], ["experiment"], []])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_experiment_json_and_csv(tmp_path, capsys):
    assert main(["experiment", "--kind", "calibration", "--replicates", "5", "--seed", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["config"]["seed"] == 3 and len(out["records"]) == 5
    assert main(["experiment", "--kind", "power", "--replicates", "4", "--sigma", "1", "--sigma", "2", "--format", "csv", "-o", str(tmp_path)]) == 0
    assert (tmp_path / "power_power.csv").exists()


def test_toy_command(capsys):
    assert main(["toy"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["summary"]["knots"] == [2.0]


def test_verify_quick_with_series(toy_csv, capsys):
    assert main(["verify", "--quick", str(toy_csv)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ok"] and {c["name"] for c in out["checks"]} == {"knot_scan", "kkt", "identities", "polyhedron", "series"}


def test_verify_failure_exits_3(monkeypatch, capsys):
    import fused_spacing.cli as cli
    from fused_spacing.verify import CheckResult

    monkeypatch.setattr(cli, "run_checks", lambda seed, quick: [CheckResult("knot_scan", False, 1)])
    assert main(["verify"]) == 3
    assert "error [E_VERIFY]" in capsys.readouterr().err


def test_console_script_entry_point(toy_csv):
    proc = subprocess.run(
        [sys.executable, "-m", "fused_spacing.cli", "fit", str(toy_csv)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 4
