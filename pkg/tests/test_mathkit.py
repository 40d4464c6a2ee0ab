import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relutrain.mathkit import (
    binom_pmf,
    binom_tail,
    gamma_ratio,
    gauss_legendre,
    integrate,
    integrate_sin_power,
    log_binom,
    log_multinomial,
)


def test_rule_weights_sum_to_two():
    for order in (1, 2, 8, 32, 64):
        assert abs(gauss_legendre(order).weights.sum() - 2.0) < 1e-12


def test_rule_exact_for_polynomials_up_to_degree_2n_minus_1():
    rule = gauss_legendre(32)
    for k in range(64):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(np.sum(rule.weights * rule.nodes**k) - exact) < 1e-10


def test_integrate_smooth_and_vector_valued():
    assert abs(integrate(np.exp, 0.0, 1.0) - (math.e - 1)) < 1e-13
    vals = integrate(lambda x: np.stack([np.sin(x), np.cos(x)]), 0.0, math.pi / 2)
    np.testing.assert_allclose(vals, [1.0, 1.0], atol=1e-13)
    assert integrate(np.sin, 1.0, 1.0) == 0.0


@pytest.mark.parametrize(
    "d, expected",
    [(1, 1 / math.sqrt(math.pi)), (2, math.sqrt(math.pi) / 2), (3, 2 / math.sqrt(math.pi))],
)
def test_gamma_ratio_values(d, expected):
    assert abs(gamma_ratio(d) - expected) < 1e-12
    assert abs(gamma_ratio(1) - 0.5641895835) < 1e-10


def test_gamma_ratio_recurrence_and_large_d():
    for d in range(1, 400):
        assert abs(gamma_ratio(d) * gamma_ratio(d + 1) / (d / 2) - 1) < 1e-10
    assert math.isfinite(gamma_ratio(5000))


def test_gamma_ratio_rejects_nonpositive():
    with pytest.raises(ValueError):
        gamma_ratio(0)


@pytest.mark.parametrize(
    "alpha, d, expected", [(0.7, 1, 0.7), (math.pi / 3, 2, 0.5), (math.pi / 2, 3, math.pi / 4)]
)
def test_integrate_sin_power_values(alpha, d, expected):
    assert abs(integrate_sin_power(alpha, d) - expected) < 1e-12


def test_integrate_sin_power_domain():
    with pytest.raises(ValueError):
        integrate_sin_power(-0.1, 2)
    with pytest.raises(ValueError):
        integrate_sin_power(4.0, 2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, math.pi / 2), st.floats(0.0, 0.5), st.integers(1, 30))
def test_integrate_sin_power_monotone(alpha, step, d):
    a2 = min(alpha + step, math.pi / 2)
    assert integrate_sin_power(a2, d) >= integrate_sin_power(alpha, d) - 1e-15
    assert integrate_sin_power(alpha, d + 1) <= integrate_sin_power(alpha, d) + 1e-15


@pytest.mark.parametrize("n, parts, expected", [(4, [4], 0.0), (4, [2, 1, 1], math.log(12)), (6, [3, 3], math.log(20))])
def test_log_multinomial_values(n, parts, expected):
    assert abs(log_multinomial(n, parts) - expected) < 1e-12


def test_log_multinomial_matches_factorials():
    for n in range(13):
        for a, b in product(range(n + 1), repeat=2):
            if a + b <= n:
                exact = math.factorial(n) // (math.factorial(a) * math.factorial(b) * math.factorial(n - a - b))
                assert abs(math.exp(log_multinomial(n, [a, b, n - a - b])) / exact - 1) < 1e-12


def test_log_multinomial_rejects_bad_partition():
    with pytest.raises(ValueError):
        log_multinomial(4, [2, 1])
    with pytest.raises(ValueError):
        log_multinomial(4, [5, -1])


def test_binomial_helpers_match_exhaustive_sum():
    for n in range(1, 21):
        for p in (0.1, 0.25, 0.5, 0.75, 0.9):
            pmf = [math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(n + 1)]
            np.testing.assert_allclose(binom_pmf(n, p), pmf, rtol=1e-12, atol=1e-300)
            for m in range(n + 2):
                assert abs(binom_tail(n, m, p) - math.fsum(pmf[m:])) < 1e-12
    assert abs(math.exp(log_binom(10, 3)) - 120) < 1e-9


def test_binomial_degenerate_probabilities():
    np.testing.assert_array_equal(binom_pmf(3, 0.0), [1, 0, 0, 0])
    np.testing.assert_array_equal(binom_pmf(3, 1.0), [0, 0, 0, 1])
    assert binom_tail(3, 0, 0.3) == 1.0
    assert binom_tail(3, 4, 0.3) == 0.0
