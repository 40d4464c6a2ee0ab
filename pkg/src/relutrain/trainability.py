"""Trainability: the probability that an initialization keeps enough neurons alive.

A network is trainable for per-layer requirements ``m_t`` when every hidden
layer has at most ``n_t - m_t`` permanently dead neurons. For shallow
networks this is a binomial tail. For three layers with one-dimensional
input there are four closed-form cases, and a generic composition of
stochastic matrices; everything is cross-checked by Monte Carlo.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .bdp import bdp_exact
from .dist import Layer2Case, _check_schemes, dead_prob_case12, dead_prob_case22, sample_stack
from .errors import UnsupportedCaseError
from .mathkit import binom_pmf, binom_tail, integrate, log_binom, log_multinomial
from .netcore import Architecture, InitScheme, classify_stack
from .rng import block_generators


class EstimateKind(str, Enum):
    EXACT = "exact"
    LOWER_BOUND = "lower-bound"
    UPPER_BOUND = "upper-bound"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class TrainabilityEstimate:
    """A trainability value with its standard error (zero for analytic values).

    Values are probabilities except for formulas reproduced verbatim that
    can overshoot 1 (the printed deep-network bounds), hence only
    non-negativity is enforced.
    """

    value: float
    stderr: float = 0.0
    kind: EstimateKind = EstimateKind.EXACT

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimateKind(self.kind))
        if not (math.isfinite(self.value) and self.value >= -1e-12):
            raise ValueError(f"invalid trainability value {self.value}")
        if not self.stderr >= 0:
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")


@dataclass(frozen=True)
class Requirement:
    """Required number of active neurons ``m_t`` for each hidden layer.

    ``m_t = 0`` is accepted and imposes nothing. With
    ``require_active=True`` a layer must additionally keep at least one
    active neuron.
    """

    m: tuple[int, ...]
    require_active: bool = False

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        if any(v < 0 for v in m):
            raise ValueError(f"requirements must be >= 0, got {m}")
        object.__setattr__(self, "m", m)

    def check(self, arch: Architecture) -> None:
        if len(self.m) != len(arch.hidden):
            raise ValueError(f"{len(self.m)} requirements for {len(arch.hidden)} hidden layers")
        if any(m > n for m, n in zip(self.m, arch.hidden)):
            raise ValueError(f"requirement {self.m} exceeds widths {arch.hidden}")


def shallow_trainability(n: int, m: int, d: int, r: float, scheme: InitScheme) -> TrainabilityEstimate:
    """Probability that at least ``m`` of ``n`` first-layer neurons are active."""
    if m > n:
        raise ValueError(f"required m={m} exceeds width n={n}")
    if not scheme.has_bias:
        return TrainabilityEstimate(1.0)
    ratio = scheme.bias_scale_ratio()
    if ratio is None:
        raise UnsupportedCaseError(f"scheme {scheme.tag} has no closed-form trainability")
    return TrainabilityEstimate(binom_tail(n, m, 1.0 - bdp_exact(d, r * ratio)))


def expected_active_lower(n: int, d: int, r: float) -> float:
    """Lower bound n(1 - sqrt(d/2pi) alpha sin(alpha)^(d-1)) on the mean number of active neurons."""
    a = math.atan(1.0 / r)
    return n * (1.0 - math.sqrt(d / (2 * math.pi)) * a * math.sin(a) ** (d - 1))


# ---------------------------------------------------------------------------
# three-layer networks with one-dimensional input


class Variant(str, Enum):
    PRINTED = "printed"
    CORRECTED = "corrected"


_DEEP_CASES = {c.value: c for c in Layer2Case}


@dataclass(frozen=True)
class _Mixture:
    """Layer-2 dead probabilities given the layer-1 configuration.

    ``expect(f)`` averages ``f(p, p_g, p_b)`` over the layer-1 randomness,
    where ``p`` is the dead probability of a layer-2 neuron, ``p_g`` its
    tentatively dead part and ``p_b`` its permanently dead part.
    ``layer1`` is the weight given to the all-required-active layer-1 event.
    """

    expect: Callable
    layer1: float


def _discrete(weights, p, pg, pb):
    weights, p, pg, pb = (np.asarray(v, dtype=float) for v in (weights, p, pg, pb))

    def expect(f):
        return np.asarray(f(p, pg, pb)) @ weights

    return expect


def _mixture(case: Layer2Case, n1: int, r: float, variant: Variant) -> _Mixture:
    printed = variant is Variant.PRINTED
    p1_active = 1.0 - bdp_exact(1, r)
    if case is Layer2Case.NO_BIAS_NO_BIAS:
        same = 2.0 ** (1 - n1)
        if printed:
            pb = 2.0 ** (-n1 - 1)
            # the tentatively dead base is printed as 3/4 - 2^(-n1-1) for mixed signs
            return _Mixture(_discrete([same, 1 - same], [0.5, 0.25], [0.5 - pb, 0.75 - pb], [pb, pb]), 1.0)
        pb = 2.0**-n1
        return _Mixture(_discrete([same, 1 - same], [0.5, 0.25], [0.5 - pb, 0.25 - pb], [pb, pb]), 1.0)
    if case is Layer2Case.NO_BIAS_BIAS:
        pb = 2.0 ** (-n1 - 1)
        p = np.array([dead_prob_case12(s, n1, r, printed_angle=printed) for s in range(n1 + 1)])
        factor = p1_active**n1 if printed else 1.0
        return _Mixture(_discrete(binom_pmf(n1, 0.5), p, p - pb, np.full_like(p, pb)), factor)
    if case is Layer2Case.BIAS_NO_BIAS:
        if printed:
            return _Mixture(_discrete([1.0], [0.5], [0.25], [0.25]), 1.0)
        return _Mixture(_discrete([1.0], [0.5], [0.0], [0.5]), p1_active)

    a = math.atan(r)
    split, total = math.pi / 2 - a, math.pi / 2 + a

    def expect(f):
        def g(w):
            p = dead_prob_case22(w, r)
            return f(p, p - 0.25, np.full_like(p, 0.25))

        return (np.asarray(integrate(g, 0.0, split, tol=1e-12)) + np.asarray(integrate(g, split, total, tol=1e-12))) / total

    return _Mixture(expect, p1_active)


def _check_deep(case, n1, n2, m1, m2, r):
    case = _DEEP_CASES[case] if isinstance(case, str) else Layer2Case(case)
    if not (1 <= m1 <= n1 and 1 <= m2 <= n2):
        raise ValueError(f"need 1 <= m1 <= n1 and 1 <= m2 <= n2, got n=({n1},{n2}) m=({m1},{m2})")
    if case in (Layer2Case.BIAS_NO_BIAS, Layer2Case.BIAS_BIAS) and not n1 == m1 == 1:
        raise UnsupportedCaseError(f"case {case.value} requires n1 = m1 = 1")
    if not (r > 0 and math.isfinite(r)):
        raise ValueError(f"radius must be positive and finite, got {r}")
    return case


def _hat_columns(n2: int, m2: int) -> list[tuple[int, int]]:
    """(permanently dead l, active j) pairs in lexicographic order."""
    return [(l, j) for l in range(n2 - m2 + 1) for j in range(1, m2)]


def deep3_components(case, n1: int, n2: int, m1: int, m2: int, r: float, *, variant: str = "corrected"):
    """Truncated layer-1 distribution, P'_2 and the joint (active, permanent) matrix for layer 2.

    Returns ``(pi1_tail, p_prime, p_hat)``: ``pi1_tail`` over layer-1 counts
    ``m1..n1``, ``p_prime`` of shape (n1-m1+1, n2-m2+1) over layer-2 counts
    ``m2..n2``, and ``p_hat`` with one column per ``(l, j)`` in
    lexicographic order, holding Pr(j active, l permanently dead).
    """
    case = _check_deep(case, n1, n2, m1, m2, r)
    variant = Variant(variant)
    mix = _mixture(case, n1, r, variant)
    js = np.arange(m2, n2 + 1)
    log_c = np.array([log_binom(n2, int(j)) for j in js])

    def main(p, pg, pb):
        p = np.asarray(p)
        return np.exp(log_c)[:, None] * (1 - p) ** js[:, None] * p ** (n2 - js[:, None])

    cols = _hat_columns(n2, m2)

    def hat(p, pg, pb):
        rows = [
            math.exp(log_multinomial(n2, (n2 - j - l, j, l))) * (1 - p) ** j * pg ** (n2 - j - l) * pb**l
            for l, j in cols
        ]
        return np.array(rows).reshape(len(cols), -1)

    size1 = n1 - m1 + 1
    pi1_tail = np.zeros(size1)
    pi1_tail[-1] = mix.layer1  # only "all layer-1 neurons active" feeds layer 2
    p_prime = np.zeros((size1, n2 - m2 + 1))
    p_prime[-1] = mix.expect(main)
    p_hat = np.zeros((size1, len(cols)))
    if cols:
        p_hat[-1] = mix.expect(hat)
    return pi1_tail, p_prime, p_hat


def compose_trainability(pi1_tail, p_primed: Sequence, p_hat: Sequence) -> float:
    """``pi'_1 P'_2 ... 1 + pi'_1 Phat_2 ... 1``; empty chains reduce to the sum of ``pi'_1``."""
    v = np.asarray(pi1_tail, dtype=float)
    first, second = v, v
    for k, m in enumerate(p_primed):
        m = np.asarray(m, dtype=float)
        if m.shape[0] != first.size:
            raise ValueError(f"P' matrix {k} has {m.shape[0]} rows, expected {first.size}")
        first = first @ m
    hats = list(p_hat)
    for k, m in enumerate(hats):
        m = np.asarray(m, dtype=float)
        if m.shape[0] != second.size:
            raise ValueError(f"Phat matrix {k} has {m.shape[0]} rows, expected {second.size}")
        second = second @ m
    total = math.fsum(first)
    if hats:
        total += math.fsum(second)
    return total


def deep3_trainability(
    case, n1: int, n2: int, m1: int, m2: int, r: float, *, variant: str = "printed"
) -> TrainabilityEstimate:
    """Lower bound on the trainability of a (1, n1, n2, n3) network.

    ``variant="printed"`` evaluates the closed forms term by term as they
    are usually stated. Two of them are not valid lower bounds: the
    no-bias/no-bias form carries 3/4 where the tentatively dead probability
    is 1/4 - 2^(-n1-1), and the bias/no-bias form drops the layer-1
    survival factor. They also plug the smallest possible permanently dead
    probability into a sum that decreases in it.

    ``variant="corrected"`` returns the exact probability that all required
    layer-1 neurons are active, at least one layer-2 neuron is active and at
    most ``n2 - m2`` layer-2 neurons are permanently dead. That event
    implies trainability, so the value is a true lower bound.
    """
    pi1_tail, p_prime, p_hat = deep3_components(case, n1, n2, m1, m2, r, variant=variant)
    return TrainabilityEstimate(compose_trainability(pi1_tail, [p_prime], [p_hat]), kind=EstimateKind.LOWER_BOUND)


def zero_bias_upper_1d_exact(n: int, L: int) -> Fraction:
    """Closed-form upper bound as an exact rational; ``L`` counts hidden layers of width ``n``."""
    if n < 1 or L < 1:
        raise ValueError(f"need n >= 1 and L >= 1, got n={n}, L={L}")
    two = Fraction(2)
    a1 = 1 - two**-n
    a2 = 1 - two ** (-n + 1) - (n - 1) * two ** (-2 * n)
    coef = (1 - two ** (-n + 1)) * (1 - two**-n) / (1 + (n - 1) * two**-n)
    return a1 ** (L - 1) - coef * (-(a1 ** (L - 1)) + a2 ** (L - 1))


def zero_bias_upper_1d(n: int, L: int) -> TrainabilityEstimate:
    return TrainabilityEstimate(float(zero_bias_upper_1d_exact(n, L)), kind=EstimateKind.UPPER_BOUND)


def mc_trainability(
    arch: Architecture | Sequence[int],
    schemes: InitScheme | Sequence[InitScheme],
    r: float,
    req: Requirement | Sequence[int],
    samples: int,
    seed: int,
    *,
    probe_count: int = 4096,
) -> TrainabilityEstimate:
    """Fraction of sampled networks in which every hidden layer meets ``req``."""
    arch = arch if isinstance(arch, Architecture) else Architecture(tuple(arch))
    req = req if isinstance(req, Requirement) else Requirement(tuple(req))
    req.check(arch)
    schemes = _check_schemes(arch, schemes)
    hits = 0
    for gen, count in block_generators(seed, samples):
        ws, bs = sample_stack(arch, schemes, gen, count)
        st = classify_stack(ws, bs, r, probe_count)
        ok = np.ones(count, dtype=bool)
        for t, n_t in enumerate(arch.hidden):
            ok &= np.count_nonzero(st.permanent[t], axis=1) <= n_t - req.m[t]
            if req.require_active:
                ok &= np.any(~st.dead[t], axis=1)
        hits += int(np.count_nonzero(ok))
    p = hits / samples
    return TrainabilityEstimate(p, math.sqrt(p * (1 - p) / samples), EstimateKind.MONTE_CARLO)
