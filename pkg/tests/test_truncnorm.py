from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import truncnorm

from fused_spacing import DomainError, tail_probability, truncated_normal_cdf
from fused_spacing.truncnorm import log_sf_ratio, spacing_tail, vectorized_cdf

INF = math.inf

# (x, mu, sd, a, b) -> P(X >= x), reference values from 1000-digit arithmetic
REFERENCE_TAILS = [
    ((2.0, 0.0, 1.0, 0.0, INF), 0.045500263896358414),
    ((0.5, 0.0, 1.0, -1.0, 2.0), 0.34911957866337287),
    ((40.0, 0.0, 1.0, 38.0, 45.0), 1.2670193415676689e-34),
    ((38.001, 0.0, 1.0, 38.0, 38.5), 0.96268716044731767),
    ((-38.2, 0.0, 1.0, -39.0, -38.0), 0.99951202293351801),
    ((10.0, 0.0, 2.0, 9.0, INF), 0.084367024535936756),
    ((1.3, 0.2, 0.7, 1.0, 1.6), 0.33999841291571132),
    ((0.01, 0.0, 1.0, -0.02, 0.03), 0.39996000193335886),
    ((60.0, 0.0, 1.0, 55.0, INF), 1.2663996685737566e-125),
    ((3.0, -2.0, 1.0, -1.0, 4.0), 1.8005390866788445e-6),
]


@pytest.mark.parametrize("args, expected", REFERENCE_TAILS)
def test_tail_matches_high_precision_reference(args, expected):
    assert tail_probability(*args) == pytest.approx(expected, rel=1e-12)


def test_cdf_endpoints_are_exact():
    for a, b, mu, sd in [(-1.0, 2.0, 0.0, 1.0), (5.0, 7.0, -3.0, 0.5), (-INF, 0.3, 1.0, 2.0), (20.0, INF, 0.0, 1.0)]:
        assert truncated_normal_cdf(a, mu, sd, a, b) == 0.0
        assert truncated_normal_cdf(b, mu, sd, a, b) == 1.0
        assert truncated_normal_cdf(a - 1.0, mu, sd, a, b) == 0.0
        assert truncated_normal_cdf(b + 1.0, mu, sd, a, b) == 1.0


def test_cdf_agrees_with_scipy_in_the_bulk(rng):
    for _ in range(200):
        mu, sd = rng.normal(), rng.uniform(0.3, 3.0)
        a, b = np.sort(rng.normal(0, 2, size=2))
        x = rng.uniform(a, b)
        ref = truncnorm.cdf(x, (a - mu) / sd, (b - mu) / sd, loc=mu, scale=sd)
        assert truncated_normal_cdf(x, mu, sd, a, b) == pytest.approx(ref, abs=1e-12)


def test_cdf_is_monotone_far_in_the_tail():
    xs = np.linspace(50.0, 51.0, 201)
    cdf = vectorized_cdf(xs, 0.0, 1.0, 50.0, 51.0)
    # mass concentrates within ~1/50 of the lower end
    assert np.all(np.diff(cdf) >= 0)
    assert np.all(np.diff(cdf[:20]) > 0)
    assert cdf[0] == 0.0 and cdf[-1] == 1.0


def test_tail_plus_cdf_is_one(rng):
    for _ in range(100):
        a, b = np.sort(rng.normal(0, 10, size=2))
        x = rng.uniform(a, b)
        assert tail_probability(x, 0.0, 1.0, a, b) + truncated_normal_cdf(x, 0.0, 1.0, a, b) == pytest.approx(1.0, abs=1e-12)


def test_log_sf_ratio():
    assert log_sf_ratio(3.0, 0.0) == 0.0
    assert log_sf_ratio(3.0, INF) == -INF
    from scipy.special import log_ndtr

    assert log_sf_ratio(1.0, 0.5) == pytest.approx(log_ndtr(-1.5) - log_ndtr(-1.0), rel=1e-13)


def test_spacing_tail_scales_with_omega():
    assert spacing_tail(INF, 2.0, 0.0, 1.0, 1.0) == pytest.approx(0.045500263896358414, rel=1e-13)
    assert spacing_tail(INF, 4.0, 0.0, 0.5, 1.0) == pytest.approx(0.045500263896358414, rel=1e-13)


@pytest.mark.parametrize("args", [(0.0, 0.0, 0.0, -1.0, 1.0), (0.0, 0.0, 1.0, 1.0, 1.0), (0.0, 0.0, 1.0, 2.0, 1.0)])
def test_domain_errors(args):
    with pytest.raises(DomainError):
        tail_probability(*args)
