from __future__ import annotations

import json

import numpy as np
import pytest

from fused_spacing import ValidationError
from fused_spacing.experiments import (
    KINDS,
    ExperimentConfig,
    cgh_profile,
    ks_uniform,
    replicate_rng,
    run,
    run_toy,
    step_mean,
)

SMALL = {
    "equivalence": dict(n=30, replicates=3),
    "calibration": dict(replicates=40),
    "power": dict(replicates=20, delta_levels=(0.0, 1.0), sigma_levels=(1.0, 2.0)),
    "coverage": dict(replicates=20),
    "complexity": dict(replicates=2, max_steps=8, n_grid=(50, 100), timing_repeats=1),
    "toy": {},
    "cgh": dict(n=100, replicates=4),
}


def _strip_timing(d):
    d = dict(d)
    d["tables"] = {k: v for k, v in d["tables"].items() if k != "timing"}
    d["summary"] = {k: v for k, v in d["summary"].items() if not k.startswith("runtime")}
    return d


@pytest.mark.parametrize("kind", KINDS)
def test_every_kind_is_deterministic_and_serializable(kind, tmp_path):
    cfg = ExperimentConfig.default(kind, **SMALL[kind])
    first, second = run(cfg), run(cfg)
    assert _strip_timing(first.to_dict()) == _strip_timing(second.to_dict())
    parsed = json.loads(first.to_json())
    assert parsed["format_version"] == "1.0"
    assert parsed["config"]["kind"] == kind
    written = first.write_csv(tmp_path)
    assert written and all(p.endswith(".csv") for p in written)


def test_parallel_matches_serial():
    cfg = ExperimentConfig.default("calibration", replicates=12)
    serial = run(cfg)
    parallel = run(ExperimentConfig.default("calibration", replicates=12, workers=2))
    assert serial.records == parallel.records


def test_replicate_streams_are_independent_of_order():
    a = replicate_rng(5, 3).standard_normal(4)
    replicate_rng(5, 2).standard_normal(100)
    b = replicate_rng(5, 3).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, replicate_rng(5, 4).standard_normal(4))
    assert not np.array_equal(a, replicate_rng(6, 3).standard_normal(4))


def test_seed_changes_results():
    a = run(ExperimentConfig.default("calibration", replicates=5, seed=1))
    b = run(ExperimentConfig.default("calibration", replicates=5, seed=2))
    assert a.records != b.records


def test_toy_report_contents():
    rep = run_toy()
    checks = rep.summary["checks"]
    assert checks["lambda_1_is_2"] and checks["s_1_is_minus_1"] and checks["S_minus_empty"]
    assert checks["oracle_entries_match"] and checks["oracle_knots_match"] and checks["lambda_2_matches_oracle"]
    assert rep.summary["changepoints"] == [2]
    assert rep.summary["lambda_2"] == 0.0
    # C_j after the first split is identically zero
    after = [r for r in rep.tables["cusum"] if r["after_step"] == 1]
    assert all(r["C"] == 0.0 for r in after)


def test_power_grid_shape():
    rep = run(ExperimentConfig.default("power", **SMALL["power"]))
    assert [(g["delta"], g["sigma"]) for g in rep.summary["grid"]] == [(0.0, 1.0), (1.0, 1.0), (0.0, 2.0), (1.0, 2.0)]


def test_complexity_counts_grow_by_one_per_step():
    rep = run(ExperimentConfig.default("complexity", **SMALL["complexity"]))
    assert rep.summary["constraints_per_step"] == pytest.approx(1.0, abs=1e-12)
    assert rep.summary["leave_rows_total"] == 0


def test_ks_uniform_against_known_distribution(rng):
    res = ks_uniform(rng.uniform(size=2000))
    assert 0 <= res["ks_statistic"] < 0.05
    res = ks_uniform(rng.uniform(size=2000) ** 2)
    assert res["p_value"] < 1e-6


def test_profiles():
    np.testing.assert_array_equal(step_mean(6, 2.0), [0, 0, 0, 2, 2, 2])
    mu, cps = cgh_profile(ExperimentConfig.default("cgh", n=20, max_steps=None, breakpoints=(0.25, 0.5), levels=(0.0, 1.0, 2.0)))
    assert cps == [5, 10]
    np.testing.assert_array_equal(mu, np.repeat([0.0, 1.0, 2.0], [5, 5, 10]))


@pytest.mark.parametrize(
    "kind, overrides",
    [
        ("nope", {}),
        ("power", {"replicates": 0}),
        ("power", {"alpha": 1.0}),
        ("power", {"sigma_levels": (0.0,)}),
        ("power", {"delta_levels": (-1.0,)}),
        ("calibration", {"steps": (0,)}),
        ("equivalence", {"max_steps": 100}),
        ("cgh", {"levels": (0.0, 1.0)}),
        ("cgh", {"breakpoints": (0.5, 0.5), "levels": (0.0, 1.0, 2.0)}),
    ],
)
def test_config_validation(kind, overrides):
    with pytest.raises(ValidationError):
        run(ExperimentConfig.default(kind, **overrides)) if kind == "cgh" else ExperimentConfig.default(kind, **overrides)
