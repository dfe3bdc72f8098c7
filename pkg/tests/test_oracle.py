from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import kstest

from fused_spacing import DomainError, OracleFailure, ValidationError, flsa_solve, knot_scan, lars_path, tn_sampler
from fused_spacing.oracle import explicit_lars, kkt_violation, tv_denoise
from fused_spacing.path import center
from fused_spacing.truncnorm import vectorized_cdf


def test_toy_solution_between_knots():
    sol = flsa_solve([2, 2, 0, 0], 1.0)
    np.testing.assert_allclose(sol.mu_hat, [1.5, 1.5, 0.5, 0.5], atol=1e-14)
    assert sol.changepoints == frozenset({2})
    assert sol.signs == {2: -1}
    assert sol.kkt_violation < 1e-12


def test_large_penalty_gives_the_mean(rng):
    y = rng.standard_normal(15)
    sol = flsa_solve(y, 1e6)
    np.testing.assert_allclose(sol.mu_hat, np.full(15, y.mean()), atol=1e-12)
    assert not sol.changepoints


def test_zero_penalty_interpolates(rng):
    y = rng.standard_normal(9)
    np.testing.assert_allclose(tv_denoise(y, 0.0), y)


def test_solution_beats_perturbations(rng):
    y = rng.standard_normal(30)
    lam = 0.7
    sol = flsa_solve(y, lam)
    base = sol.objective(y)
    for _ in range(50):
        other = sol.mu_hat + 1e-3 * rng.standard_normal(30)
        assert 0.5 * np.sum((y - other) ** 2) + lam * np.sum(np.abs(np.diff(other))) >= base - 1e-12


def test_kkt_detects_a_wrong_fit(rng):
    y = rng.standard_normal(20)
    sol = flsa_solve(y, 0.5)
    wrong = sol.mu_hat.copy()
    wrong[3] += 0.1
    assert kkt_violation(y, wrong, 0.5, sol.changepoints) > 1e-3


def test_knot_scan_constant_and_single_jump():
    assert knot_scan(np.full(7, -1.25)).knots == []
    y = np.r_[np.zeros(4), np.full(6, 2.0)]
    scan = knot_scan(y)
    assert scan.entering == [4] and scan.signs == [1]
    # m (L - m) / L times the jump
    assert scan.lambdas[0] == pytest.approx(2.0 * 4 * 6 / 10, abs=1e-6)
    assert scan.leave_events == 0


def test_knot_scan_rejects_bad_grid():
    with pytest.raises(ValidationError):
        knot_scan([1.0, 2.0, 0.5], lambda_grid=[0.0, 1.0, 2.0])


@pytest.mark.parametrize("seed", range(12))
def test_explicit_lars_never_drops_and_matches(seed):
    rng = np.random.default_rng(100 + seed)
    y = rng.standard_normal(rng.integers(4, 65))
    events = explicit_lars(center(y))
    path = lars_path(y)
    assert all(e.kind == "enter" for e in events)
    assert [e.j for e in events] == path.changepoints
    assert [e.s for e in events] == path.signs
    np.testing.assert_allclose([e.lam for e in events], path.knots, rtol=1e-10)


def test_sampler_support_and_determinism():
    a = tn_sampler(0.0, 1.0, 0.5, 1.5, 2000, seed=3)
    b = tn_sampler(0.0, 1.0, 0.5, 1.5, 2000, seed=3)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0.5 and a.max() <= 1.5


def test_sampler_untruncated_mean():
    x = tn_sampler(0.0, 1.0, -np.inf, np.inf, 40_000, seed=1)
    assert abs(x.mean()) < 4 / np.sqrt(x.size)


@pytest.mark.parametrize("args", [(0.0, 1.0, 0.5, 1.5), (0.0, 1.0, 6.0, 6.5), (2.0, 0.5, -10.0, -3.0)])
def test_sampler_matches_truncated_cdf(args):
    n = 5000
    x = tn_sampler(*args, n, seed=7)
    stat = kstest(x, lambda t: vectorized_cdf(t, *args)).statistic
    assert stat < 1.63 / np.sqrt(n)


def test_sampler_errors():
    with pytest.raises(DomainError):
        tn_sampler(0.0, 1.0, 1.0, 1.0, 10)
    with pytest.raises(DomainError):
        tn_sampler(0.0, -1.0, 0.0, 1.0, 10)
    with pytest.raises(ValidationError):
        tn_sampler(0.0, 1.0, 0.0, 1.0, 0)


def test_oracle_failure_is_an_assertion():
    assert issubclass(OracleFailure, AssertionError)
