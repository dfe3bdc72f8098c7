from __future__ import annotations

import json
import math

import numpy as np
import pytest

from fused_spacing import SigmaEstimationError, Signal, ValidationError, estimate_sigma, fit_and_test, ingest_csv, read_series, write_signal_csv
from fused_spacing.dataio import ReindexWarning
from fused_spacing.report import CSV_COLUMNS, FORMAT_VERSION, json_safe, path_summary
from fused_spacing.path import lars_path


def _write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_plain_column(tmp_path):
    sig = ingest_csv(_write(tmp_path, "2\n2\n0\n0\n"))
    np.testing.assert_array_equal(sig.values, [2, 2, 0, 0])


def test_header_by_name_with_dropped_na(tmp_path):
    p = _write(tmp_path, "pos,logratio\n1,0.5\n2,NA\n3,-0.25\n4,\n5,1e-3\n")
    with pytest.warns(ReindexWarning, match="lines 3, 5"):
        res = read_series(p, column="logratio", na="drop")
    np.testing.assert_array_equal(res.values, [0.5, -0.25, 1e-3])
    assert res.source_lines == (2, 4, 6)
    assert res.dropped_lines == (3, 5)
    assert res.header == "logratio" and res.column == 1


def test_column_by_index_and_delimiter_sniffing(tmp_path):
    res = read_series(_write(tmp_path, "a;b\n1;10\n2;20\n3;30\n"), column="1")
    np.testing.assert_array_equal(res.values, [10, 20, 30])
    res = read_series(_write(tmp_path, "1\t4\n2\t5\n", "t.tsv"), column=1)
    np.testing.assert_array_equal(res.values, [4, 5])


def test_missing_values_fail_by_default(tmp_path):
    with pytest.raises(ValidationError, match="lines 3"):
        read_series(_write(tmp_path, "x\n1\nNA\n2\n"))


def test_unparseable_rows_are_listed(tmp_path):
    with pytest.raises(ValidationError, match="lines 2, 4"):
        read_series(_write(tmp_path, "1\nabc\n2\ninf\n3\n"))


@pytest.mark.parametrize(
    "text, kwargs, match",
    [
        ("5\n", {}, "at least 2"),
        ("", {}, "no data"),
        ("a,b\n1,2\n", {"column": "c"}, "not found"),
        ("1,2\n3,4\n", {"column": 5}, "outside"),
        ("1\n2\n", {"column": "value"}, "no header|not found"),
        ("1\n2\n", {"na": "skip"}, "na policy"),
    ],
)
def test_ingest_errors(tmp_path, text, kwargs, match):
    with pytest.raises(ValidationError, match=match):
        read_series(_write(tmp_path, text), **kwargs)


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        read_series(tmp_path / "nope.csv")


def test_round_trip_is_bit_exact(tmp_path, rng):
    y = rng.standard_normal(500) * 10.0 ** rng.integers(-300, 300, size=500)
    p = tmp_path / "rt.csv"
    write_signal_csv(y, p)
    back = ingest_csv(p).values
    assert np.array_equal(back, y)
    assert back.tobytes() == y.tobytes()


def test_sigma_estimate_on_noise(rng):
    y = rng.standard_normal(10_000)
    assert 0.97 <= estimate_sigma(y) <= 1.03


def test_sigma_estimate_robust_to_a_jump(rng):
    y = rng.standard_normal(2000)
    jumped = y + np.r_[np.zeros(1000), np.full(1000, 25.0)]
    assert abs(estimate_sigma(jumped) / estimate_sigma(y) - 1) < 0.02


def test_sigma_estimate_errors():
    with pytest.raises(SigmaEstimationError, match="--sigma"):
        estimate_sigma(np.repeat([0.0, 3.0], 10))
    with pytest.raises(SigmaEstimationError):
        estimate_sigma([1.0, 2.0])


def test_toy_report():
    rep = fit_and_test(Signal([2, 2, 0, 0], sigma=1.0))
    d = json.loads(rep.to_json())
    assert d["format_version"] == FORMAT_VERSION
    assert d["no_changepoints"] is False
    (step,) = d["steps"]
    assert step["lambda_prev"] == "inf"
    assert step["positions"] == [2, 3]
    assert step["T"] == pytest.approx(0.045500263896358414, rel=1e-13)
    assert step["selected"] is True
    assert d["selected_changepoints"] == [2]


def test_constant_report_has_marker():
    rep = fit_and_test(Signal(np.full(5, 1.0)))
    d = json.loads(rep.to_json())
    assert d["no_changepoints"] is True and d["steps"] == []


def test_csv_report_columns(rng):
    y = rng.standard_normal(30) + np.repeat([0.0, 4.0], 15)
    rep = fit_and_test(Signal(y), max_steps=4, two_sided=True)
    lines = rep.to_csv().splitlines()
    assert tuple(lines[0].split(",")) == CSV_COLUMNS
    assert len(lines) == 5
    first = dict(zip(CSV_COLUMNS, lines[1].split(",")))
    assert first["lambda_prev"] == "inf"
    assert first["j"] == "15"
    assert float(first["p_value"]) == pytest.approx(min(1.0, 2 * min(rep.steps[0].T, 1 - rep.steps[0].T)))


def test_selection_is_the_leading_significant_run(rng):
    y = rng.standard_normal(60) + np.repeat([0.0, 5.0, 2.0], 20)
    rep = fit_and_test(Signal(y), max_steps=10)
    flags = [st.selected for st in rep.steps]
    first_off = flags.index(False) if False in flags else len(flags)
    assert all(flags[:first_off]) and not any(flags[first_off:])
    assert sorted(rep.selected) == [20, 40]


def test_json_safe():
    assert json_safe({"a": math.inf, "b": [-math.inf, math.nan, np.float64(1.5)]}) == {"a": "inf", "b": ["-inf", None, 1.5]}


def test_path_summary():
    s = path_summary(lars_path([2, 2, 0, 0]))
    assert s["steps"][0]["j"] == 2 and s["path_reason"] == "residual_exhausted"
