from __future__ import annotations

import math

import numpy as np
import pytest

from fused_spacing import Signal, lars_path, polyhedral_limits
from fused_spacing.experiments import replicate_rng
from fused_spacing.path import center
from fused_spacing.polyhedron import HitLeaveOracle, hit_leave_polyhedron
from fused_spacing.selective import spacing_pivot


def _oracle(y):
    path = lars_path(Signal(y))
    return path, HitLeaveOracle(path, center(y))


def test_polyhedral_limits_on_a_box():
    # -1 <= x_1 <= 2, -3 <= x_2 <= 4; eta = e_1
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b = np.array([2.0, 1.0, 4.0, 3.0])
    lim = polyhedral_limits(A, b, np.array([1.0, 0.0]), np.array([0.5, 0.0]))
    assert (lim.nu_minus, lim.nu_plus) == (-1.0, 2.0)
    assert lim.nu_zero == 3.0
    assert lim.lower_rows == (1,) and lim.upper_rows == (0,)


def test_nu_zero_is_smallest_orthogonal_slack():
    A = np.array([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0]])
    b = np.array([0.1, 5.0, 9.0])
    lim = polyhedral_limits(A, b, np.array([1.0, 0.0]), np.array([0.0, 0.3]))
    assert lim.nu_zero == pytest.approx(-0.2)
    assert not lim.nu_zero_ok
    assert lim.nu_minus == -math.inf


@pytest.mark.parametrize("seed", range(12))
def test_limits_equal_adjacent_knots(seed):
    y = np.random.default_rng(seed).standard_normal(30)
    path, orc = _oracle(y)
    for k in range(1, len(path) + 1):
        lim = orc.limits(k)
        assert lim.nu_minus == pytest.approx(path.knot(k + 1), abs=1e-10)
        assert lim.nu_plus == pytest.approx(path.knot(k - 1), abs=1e-10) if k > 1 else lim.nu_plus == math.inf
        assert lim.nu_zero_ok
        T, _ = orc.pivot(k, 1.0)
        assert T == pytest.approx(spacing_pivot(path, k, 1.0).T, abs=1e-9)


def test_flat_rows_carry_the_lower_limit():
    # at this step the competitor that enters next had a vanishing
    # denominator one step earlier; only its flat row pins the lower limit
    y = np.random.default_rng(4).standard_normal(30)
    path, orc = _oracle(y)
    lim = orc.limits(9)
    tags = orc.polyhedron(9).tags
    kinds = {tags[i][0] for i in lim.lower_rows}
    assert "flat" in kinds and "hit" not in kinds
    assert lim.nu_minus == pytest.approx(path.knot(10), abs=1e-10)


def test_observed_y_satisfies_full_polyhedron(rng):
    y = rng.standard_normal(25)
    path, orc = _oracle(y)
    for k in (1, 3, len(path)):
        poly = hit_leave_polyhedron(path, center(y), k)
        assert poly.satisfied()
        assert poly.leave_count == 0
        stacked = poly.limits()
        fast = orc.limits(k)
        assert stacked.nu_minus == pytest.approx(fast.nu_minus, abs=1e-12)
        assert stacked.nu_plus == pytest.approx(fast.nu_plus, abs=1e-12)


def test_reduced_system_size_grows_linearly():
    y = np.random.default_rng(11).standard_normal(60)
    path, orc = _oracle(y)
    sizes = [len(orc.polyhedron(k).reduced()) for k in range(1, 21)]
    assert sizes == list(range(2, 22))


def test_hit_identity_holds(rng):
    y = rng.standard_normal(20)
    path, orc = _oracle(y)
    for k in range(1, len(path)):
        assert orc.hit_identity_gap(k) < 1e-10


def test_leave_envelope_is_empty_and_upper_bound_is_the_chain():
    # a full-length path whose neutral competitors used to be misfiled
    y = replicate_rng(0, 0).standard_normal(100)
    path, orc = _oracle(y)
    for k in range(1, len(path) + 1):
        _, minus = orc.envelope_sets(k)
        assert minus == []
        if k > 1:
            lim = orc.limits(k)
            assert orc.chain_row(k) in lim.upper_rows
            assert orc.unexplained_upper_rows(k, lim) == []


def test_row_tags_match_stacked_system(rng):
    y = rng.standard_normal(20)
    path, orc = _oracle(y)
    for k in range(1, len(path) + 1):
        assert orc.row_tags(k) == list(orc.polyhedron(k).tags)
