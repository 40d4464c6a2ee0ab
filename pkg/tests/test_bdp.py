import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relutrain.bdp import alpha_r, bdp, bdp_bounds, bdp_exact, mc_bdp, overparam_condition, suggested_width

R_GRID = (0.1, 0.5, 1 / math.sqrt(3), 1.0, 2.0, 10.0)


def test_bdp_exact_values():
    assert abs(bdp_exact(1, 1.0) - 0.25) < 1e-14
    assert abs(bdp_exact(1, 1 / math.sqrt(3)) - 1 / 3) < 1e-12
    assert abs(bdp_exact(2, 1.0) - (1 - math.sqrt(2) / 2) / 2) < 1e-12
    assert abs(bdp_exact(2, 1.0) - 0.1464466) < 1e-7


def test_d1_closed_form():
    for r in np.linspace(0.05, 20, 37):
        assert abs(bdp_exact(1, r) - math.atan(1 / r) / math.pi) < 1e-14


def test_d2_closed_form():
    # the d = 2 integral is 1 - cos(alpha) and the constant is 1/2
    for r in (0.3, 1.0, 4.0):
        assert abs(bdp_exact(2, r) - 0.5 * (1 - math.cos(alpha_r(r)))) < 1e-13


def test_bounds_values():
    lower, upper = bdp_bounds(1, 1.0)
    assert abs(lower - math.sin(math.pi / 4) / math.pi) < 1e-12
    assert abs(upper - math.sqrt(1 / (2 * math.pi)) * math.pi / 4) < 1e-12
    assert abs(lower - 0.2251) < 1e-4
    assert abs(upper - 0.3133) < 1e-4


def test_bounds_vanish_for_large_radius():
    lower, upper = bdp_bounds(1, 1e9)
    assert lower < 1e-9 and upper < 1e-9


def test_bracketing_grid():
    for d in range(1, 51):
        for r in R_GRID:
            res = bdp(d, r)
            assert res.lower <= res.exact <= res.upper
            assert res.exact < 0.5


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.floats(0.01, 50.0), st.floats(1.01, 3.0))
def test_exact_decreasing_in_radius(d, r, factor):
    assert bdp_exact(d, r * factor) < bdp_exact(d, r)


def test_invalid_radius():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            bdp_exact(1, bad)


def test_suggested_width():
    assert suggested_width(200, 1, 1 / math.sqrt(3)) == 300
    assert suggested_width(2, 1, 1.0) == 3
    assert suggested_width(50, 7, 0.3, with_bias=False) == 50


def test_overparam_condition():
    assert overparam_condition(10, 1, 1.0, 0.05)
    assert overparam_condition(10, 1, 1.0, 1e-12)
    assert not overparam_condition(1, 50, 1.0, 0.99)
    with pytest.raises(ValueError):
        overparam_condition(10, 1, 1.0, 0.0)


def test_mc_bdp_is_deterministic_and_close():
    a = mc_bdp(2, 1.0, 50000, 3)
    assert a == mc_bdp(2, 1.0, 50000, 3)
    assert abs(a[0] - bdp_exact(2, 1.0)) < 4 * a[1]
