import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy.stats import binom, norm

from relutrain.dist import (
    EmpiricalDist,
    Layer2Case,
    ProbVector,
    StochMatrix,
    active_row,
    classify_case,
    compose_dist,
    dead_prob_case12,
    dead_prob_case22,
    mc_active_dist,
    p2_matrix,
    pi1,
    write_dist_csv,
)
from relutrain.errors import UnsupportedCaseError
from relutrain.netcore import InitScheme
from relutrain.output import read_csv

SB, SN = InitScheme.sphere(True), InitScheme.sphere(False)


def _dead_case12_oracle(s, n1, r):
    """P(c <= 0, c + r a <= 0, c + r b <= 0) with a ~ N(0, s), b ~ N(0, n1 - s), c ~ N(0, 1)."""

    def f(c):
        return norm.pdf(c) * norm.cdf(-c / (r * math.sqrt(s))) * norm.cdf(-c / (r * math.sqrt(n1 - s)))

    return sp_integrate.quad(f, -np.inf, 0.0, epsabs=1e-14, epsrel=1e-13)[0]


def _case22_row_oracle(n2, r):
    """Active layer-2 counts for one active with-bias layer-1 neuron, by quadrature over its angle."""

    def dead(phi):
        w, b = math.cos(phi), math.sin(phi)
        top, low = r * abs(w) + b, max(b - r * abs(w), 0.0)
        return 0.5 - (math.atan(top) - math.atan(low)) / (2 * math.pi)

    # active iff r|w| + b > 0; split the circle at the kinks of that condition
    lo = -math.atan(r)
    edges = [lo, 0.0, math.pi / 2, math.pi, math.pi - lo]
    row = np.zeros(n2 + 1)
    for j in range(n2 + 1):
        total = sum(
            sp_integrate.quad(lambda ph: binom.pmf(j, n2, 1 - dead(ph)), a, b, epsabs=1e-13)[0]
            for a, b in zip(edges[:-1], edges[1:])
        )
        row[j] = total / (math.pi + 2 * math.atan(r))
    return row


def test_prob_vector_and_matrix_validation():
    with pytest.raises(ValueError):
        ProbVector([0.5, 0.6])
    with pytest.raises(ValueError):
        StochMatrix([[0.5, 0.4]])
    v = ProbVector([0.25, 0.75])
    assert v.n == 1 and v.mean() == 0.75 and v.tail(1) == 0.75


def test_pi1_with_bias_is_binomial():
    p = pi1(6, 1, 1.0, SB)
    np.testing.assert_allclose(p.probs, binom.pmf(np.arange(7), 6, 0.75), rtol=1e-12)
    assert abs(p.probs[6] - 0.177979) < 1e-6
    assert abs(p.probs.sum() - 1) < 1e-14


def test_pi1_without_bias_is_point_mass():
    for n1 in (1, 4, 9):
        np.testing.assert_array_equal(pi1(n1, 3, 0.7, SN).probs, np.eye(n1 + 1)[n1])


def test_pi1_scaled_normal_uses_effective_radius():
    s = InitScheme.normal(2.0, 1.0, bias=True)
    np.testing.assert_allclose(pi1(3, 1, 0.5, s).probs, pi1(3, 1, 1.0, SB).probs, rtol=1e-12)


def test_case_classification():
    assert classify_case(SN, InitScheme.he(False)) is Layer2Case.NO_BIAS_NO_BIAS
    assert classify_case(SN, InitScheme.he(True)) is Layer2Case.NO_BIAS_BIAS
    assert classify_case(SB, InitScheme.normal()) is Layer2Case.BIAS_NO_BIAS
    assert classify_case(SB, SB) is Layer2Case.BIAS_BIAS
    with pytest.raises(UnsupportedCaseError):
        classify_case(InitScheme.he(True), SB)
    with pytest.raises(UnsupportedCaseError):
        classify_case(SB, InitScheme.normal(1.0, 2.0))


def test_case21_row_is_half_binomial():
    for n2 in (1, 3, 8):
        np.testing.assert_allclose(active_row(Layer2Case.BIAS_NO_BIAS, 1, n2, 1.0), binom.pmf(np.arange(n2 + 1), n2, 0.5))


def test_case11_single_neurons():
    np.testing.assert_allclose(active_row(Layer2Case.NO_BIAS_NO_BIAS, 1, 1, 1.0), [0.5, 0.5])


@pytest.mark.parametrize("n1", [2, 3, 6, 9])
def test_case12_dead_probability_matches_direct_integral(n1):
    for s in range(1, n1):
        for r in (0.5, 1.0, 3.0):
            assert abs(dead_prob_case12(s, n1, r) - _dead_case12_oracle(s, n1, r)) < 1e-12


def test_case12_printed_angle_differs_off_symmetry():
    assert abs(dead_prob_case12(2, 4, 1.0, printed_angle=True) - dead_prob_case12(2, 4, 1.0)) < 1e-14
    assert abs(dead_prob_case12(1, 4, 1.0, printed_angle=True) - dead_prob_case12(1, 4, 1.0)) > 1e-4


def test_case12_dead_probability_range():
    # values can drop below 1/4 (e.g. n1 = 6, s = 3); they stay within [1/8, 1/2]
    vals = [dead_prob_case12(s, n1, r) for n1 in range(1, 12) for s in range(n1 + 1) for r in (0.2, 1.0, 5.0)]
    assert min(vals) >= 0.125 and max(vals) <= 0.5 + 1e-15
    assert dead_prob_case12(3, 6, 1.0) < 0.25


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_case22_row_matches_direct_quadrature(r):
    np.testing.assert_allclose(active_row(Layer2Case.BIAS_BIAS, 1, 3, r), _case22_row_oracle(3, r), atol=1e-10)


def test_case22_dead_probability_continuous_at_branch_boundary():
    r = 1.3
    b = math.pi / 2 - math.atan(r)
    assert abs(dead_prob_case22(b - 1e-12, r) - dead_prob_case22(b, r)) < 1e-9


def test_p2_rows_sum_to_one():
    for s1, s2 in ((SN, InitScheme.normal()), (SN, SB), (SB, InitScheme.he(False)), (SB, SB)):
        n1 = 1 if s1.has_bias else 5
        m = p2_matrix(n1, 4, 0.8, s1, s2).matrix
        np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-10)
        np.testing.assert_array_equal(m[:n1, 0], 1.0)


def test_compose_identity_and_associativity():
    pi0 = pi1(3, 1, 1.0, SB)
    assert np.array_equal(compose_dist(pi0, [StochMatrix(np.eye(4))]).probs, pi0.probs)
    gen = np.random.default_rng(0)
    a = gen.random((4, 5))
    b = gen.random((5, 3))
    a /= a.sum(1, keepdims=True)
    b /= b.sum(1, keepdims=True)
    left = compose_dist(compose_dist(pi0, [StochMatrix(a)]), [StochMatrix(b)])
    right = compose_dist(pi0, [StochMatrix(a @ b)])
    np.testing.assert_allclose(left.probs, right.probs, atol=1e-12)
    with pytest.raises(ValueError):
        compose_dist(pi0, [StochMatrix(b)])


def test_mc_layer1_point_mass_without_bias():
    emp = mc_active_dist((1, 5, 3, 1), [SN, SB, SB], 1.0, 2000, 0)
    np.testing.assert_array_equal(emp[0].probs, np.eye(6)[5])


def test_mc_is_deterministic():
    a = mc_active_dist((1, 4, 3, 1), SB, 1.0, 3000, 5)
    b = mc_active_dist((1, 4, 3, 1), SB, 1.0, 3000, 5)
    assert all(np.array_equal(x.probs, y.probs) for x, y in zip(a, b))


def test_mc_layer2_agrees_with_analytic():
    emp = mc_active_dist((1, 6, 4, 1), [SN, SB, SB], 1.0, 20000, 1)
    analytic = compose_dist(pi1(6, 1, 1.0, SN), [p2_matrix(6, 4, 1.0, SN, SB)])
    assert analytic.tv(emp[1].probs) < 0.02


def test_write_dist_csv(tmp_path):
    emp = EmpiricalDist(1, np.array([0.25, 0.75]), np.array([0.01, 0.01]), 100)
    write_dist_csv(tmp_path / "d.csv", [(1, pi1(1, 1, 1.0, SB)), (1, emp)])
    header, rows = read_csv(tmp_path / "d.csv")
    assert header == ["layer", "count", "probability", "stderr"] and len(rows) == 4
