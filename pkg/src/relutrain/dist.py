"""Distributions of the number of active neurons per hidden layer.

``pi_t[i]`` is the probability that exactly ``i`` neurons of hidden layer
``t`` are active (not dead) on B_r(0). Consecutive layers are linked by
row-stochastic matrices, ``pi_t = pi_{t-1} P_t``. Layer-2 matrices are
available in closed form for one-dimensional input and four combinations
of layer-1/layer-2 schemes; everything else is covered by Monte Carlo.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .bdp import bdp_exact
from .errors import UnsupportedCaseError
from .mathkit import binom_pmf, integrate, log_binom
from .netcore import Architecture, InitScheme, SchemeKind, classify_stack, draw_layer
from .output import write_csv
from .rng import block_generators


@dataclass(frozen=True, eq=False)
class ProbVector:
    """Probability mass over counts 0..n."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("a probability vector must be one-dimensional and non-empty")
        if np.any(p < -1e-15) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"not a probability vector (sum {p.sum()!r})")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.size - 1

    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)

    def tail(self, m: int) -> float:
        """Pr(count >= m)."""
        return float(math.fsum(self.probs[max(m, 0) :]))

    def tv(self, other: "ProbVector | np.ndarray") -> float:
        q = other.probs if isinstance(other, ProbVector) else np.asarray(other, dtype=float)
        if q.shape != self.probs.shape:
            raise ValueError(f"support sizes differ: {self.probs.shape} vs {q.shape}")
        return 0.5 * float(np.abs(self.probs - q).sum())


@dataclass(frozen=True, eq=False)
class StochMatrix:
    """Row-stochastic matrix of shape (n_{t-1} + 1, n_t + 1)."""

    matrix: np.ndarray

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2:
            raise ValueError("a stochastic matrix must be two-dimensional")
        if np.any(a < -1e-15) or np.any(a > 1 + 1e-12) or np.any(np.abs(a.sum(axis=1) - 1.0) > 1e-10):
            raise ValueError("rows must be probability vectors")
        a = np.clip(a, 0.0, 1.0)
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


class Layer2Case(str, Enum):
    """Closed-form layer-2 cases for one-dimensional input."""

    NO_BIAS_NO_BIAS = "1.1"
    NO_BIAS_BIAS = "1.2"
    BIAS_NO_BIAS = "2.1"
    BIAS_BIAS = "2.2"


def _layer2_kind(scheme: InitScheme) -> bool:
    """True for a usable with-bias layer-2 scheme, False for a no-bias normal one."""
    if scheme.kind in (SchemeKind.NORMAL_NO_BIAS, SchemeKind.HE_NO_BIAS):
        return False
    if scheme.isotropic_with_bias:
        return True
    raise UnsupportedCaseError(
        f"layer-2 scheme {scheme.tag} is not covered; with-bias normal layers need equal weight and bias scales"
    )


def classify_case(scheme1: InitScheme, scheme2: InitScheme) -> Layer2Case:
    if scheme1.kind is SchemeKind.SPHERE_NO_BIAS:
        return Layer2Case.NO_BIAS_BIAS if _layer2_kind(scheme2) else Layer2Case.NO_BIAS_NO_BIAS
    if scheme1.kind is SchemeKind.SPHERE_WITH_BIAS:
        return Layer2Case.BIAS_BIAS if _layer2_kind(scheme2) else Layer2Case.BIAS_NO_BIAS
    raise UnsupportedCaseError(f"layer-1 scheme {scheme1.tag} has no closed-form layer-2 matrix")


def pi1(n1: int, d: int, r: float, scheme: InitScheme) -> ProbVector:
    """Distribution of active layer-1 neurons: a point mass without bias, binomial with bias."""
    if n1 < 1:
        raise ValueError(f"n1 must be >= 1, got {n1}")
    if not scheme.has_bias:
        probs = np.zeros(n1 + 1)
        probs[n1] = 1.0
        return ProbVector(probs)
    ratio = scheme.bias_scale_ratio()
    if ratio is None:
        raise UnsupportedCaseError(f"scheme {scheme.tag} has no closed-form layer-1 distribution")
    # r*sigma_w*|g| + sigma_b*h <= 0  <=>  (r*sigma_w/sigma_b)*|g| + h <= 0
    return ProbVector(binom_pmf(n1, 1.0 - bdp_exact(d, r * ratio)))


def dead_prob_case12(s: int, n1: int, r: float, *, printed_angle: bool = False) -> float:
    """Layer-2 dead probability given ``s`` positive unit weights in a no-bias layer 1.

    The crossover angle between the two integrals is atan(sqrt(s/(n1-s))).
    ``printed_angle=True`` uses atan(s/(n1-s)) instead, which is off by up
    to a few 1e-3 except at s in {0, n1/2, n1}.
    """
    if not 0 <= s <= n1:
        raise ValueError(f"s must lie in 0..{n1}, got {s}")
    alpha = math.atan2(s, n1 - s) if printed_angle else math.atan2(math.sqrt(s), math.sqrt(n1 - s))
    a, b = r * math.sqrt(s), r * math.sqrt(n1 - s)

    def g(x):
        return x / np.sqrt(1.0 + x * x)  # sin(atan(x))

    first = integrate(lambda th: g(a * np.cos(th)), math.pi / 2, math.pi + alpha)
    second = integrate(lambda th: g(b * np.sin(th)), math.pi + alpha, 2 * math.pi)
    return 0.5 + (float(first) + float(second)) / (4 * math.pi)


def dead_prob_case22(omega, r: float) -> np.ndarray:
    """Layer-2 dead probability given the angle ``omega`` of an active layer-1 neuron.

    ``omega`` ranges over [0, pi/2 + atan r); the branch boundary
    pi/2 - atan r belongs to the upper branch.
    """
    omega = np.asarray(omega, dtype=float)
    a = math.atan(r)
    rho = math.sqrt(r * r + 1.0)
    upper = np.arctan2(1.0, rho * np.cos(omega - a))  # atan(1/h) for h >= 0
    lower = np.where(omega < math.pi / 2 - a, np.arctan(rho * np.cos(omega + a)), 0.0)
    return 0.25 + (upper + lower) / (2 * math.pi)


def _binom_rows(n2: int, p_dead: np.ndarray) -> np.ndarray:
    """Rows C(n2, j) (1-p)^j p^(n2-j) for each dead probability ``p`` (k,) -> (n2+1, k)."""
    p = np.asarray(p_dead, dtype=float)
    j = np.arange(n2 + 1)[:, None]
    coef = np.exp([log_binom(n2, int(k)) for k in range(n2 + 1)])[:, None]
    return coef * (1.0 - p) ** j * p ** (n2 - j)


def active_row(case: Layer2Case, n1: int, n2: int, r: float, *, printed_angle: bool = False) -> np.ndarray:
    """Distribution of active layer-2 neurons when all ``n1`` layer-1 neurons are active."""
    if case is Layer2Case.NO_BIAS_NO_BIAS:
        same = 2.0 ** (1 - n1)  # all layer-1 signs equal
        return same * binom_pmf(n2, 0.5) + (1.0 - same) * binom_pmf(n2, 0.75)
    if case is Layer2Case.NO_BIAS_BIAS:
        weights = binom_pmf(n1, 0.5)
        p = np.array([dead_prob_case12(s, n1, r, printed_angle=printed_angle) for s in range(n1 + 1)])
        return _binom_rows(n2, p) @ weights
    if n1 != 1:
        raise UnsupportedCaseError(f"case {case.value} needs a single layer-1 neuron, got n1={n1}")
    if case is Layer2Case.BIAS_NO_BIAS:
        return binom_pmf(n2, 0.5)
    a = math.atan(r)
    split = math.pi / 2 - a
    total = math.pi / 2 + a

    def f(w):
        return _binom_rows(n2, dead_prob_case22(w, r))

    row = integrate(f, 0.0, split, tol=1e-12) + integrate(f, split, total, tol=1e-12)
    return np.asarray(row) / total


def p2_matrix(n1: int, n2: int, r: float, scheme1: InitScheme, scheme2: InitScheme) -> StochMatrix:
    """Layer-2 transition matrix for one-dimensional input.

    Rows below ``n1`` put all mass on zero active neurons; the last row
    comes from the case formula.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("widths must be >= 1")
    if not (r > 0 and math.isfinite(r)):
        raise ValueError(f"radius must be positive and finite, got {r}")
    case = classify_case(scheme1, scheme2)
    mat = np.zeros((n1 + 1, n2 + 1))
    mat[:n1, 0] = 1.0
    mat[n1] = active_row(case, n1, n2, r)
    return StochMatrix(mat)


def compose_dist(pi0: ProbVector, matrices: Sequence[StochMatrix]) -> ProbVector:
    """``pi0 P_1 P_2 ...``."""
    v = pi0.probs
    for k, m in enumerate(matrices):
        a = m.matrix if isinstance(m, StochMatrix) else np.asarray(m, dtype=float)
        if a.shape[0] != v.size:
            raise ValueError(f"matrix {k} has {a.shape[0]} rows, distribution has {v.size} entries")
        v = v @ a
    return ProbVector(v)


@dataclass(frozen=True)
class EmpiricalDist:
    layer: int
    probs: np.ndarray
    stderr: np.ndarray
    samples: int

    def as_prob_vector(self) -> ProbVector:
        return ProbVector(self.probs)


def sample_stack(arch: Architecture, schemes: Sequence[InitScheme], gen: np.random.Generator, count: int):
    """Draw ``count`` networks as stacked arrays (layer by layer from ``gen``)."""
    ws, bs = [], []
    for t, scheme in enumerate(schemes):
        w, b = draw_layer(scheme, arch.widths[t], arch.widths[t + 1], gen, count)
        ws.append(w)
        bs.append(b)
    return ws, bs


def _check_schemes(arch: Architecture, schemes) -> list[InitScheme]:
    schemes = [schemes] * arch.depth if isinstance(schemes, InitScheme) else list(schemes)
    if len(schemes) != arch.depth:
        raise ValueError(f"{len(schemes)} schemes for {arch.depth} layers")
    if any(s.kind is SchemeKind.DATA_DEPENDENT for s in schemes):
        raise UnsupportedCaseError("Monte Carlo sampling of the data-dependent scheme needs training inputs")
    return schemes


def mc_active_dist(
    arch: Architecture | Sequence[int],
    schemes: InitScheme | Sequence[InitScheme],
    r: float,
    samples: int,
    seed: int,
    *,
    probe_count: int = 4096,
) -> list[EmpiricalDist]:
    """Empirical active-count distribution of every hidden layer over ``samples`` networks."""
    arch = arch if isinstance(arch, Architecture) else Architecture(tuple(arch))
    schemes = _check_schemes(arch, schemes)
    hidden = arch.hidden
    hist = [np.zeros(n + 1, dtype=np.int64) for n in hidden]
    for gen, count in block_generators(seed, samples):
        ws, bs = sample_stack(arch, schemes, gen, count)
        st = classify_stack(ws, bs, r, probe_count)
        for t, active in enumerate(st.active_counts()):
            hist[t] += np.bincount(active, minlength=hidden[t] + 1)
    out = []
    for t, h in enumerate(hist):
        p = h / samples
        out.append(EmpiricalDist(layer=t + 1, probs=p, stderr=np.sqrt(p * (1 - p) / samples), samples=samples))
    return out


def write_dist_csv(path: str | Path, layers: Sequence[tuple[int, ProbVector | EmpiricalDist]]) -> Path:
    """CSV with columns layer, count, probability, stderr (0 for analytic rows)."""
    rows = []
    for layer, dist in layers:
        probs = dist.probs
        err = dist.stderr if isinstance(dist, EmpiricalDist) else np.zeros_like(probs)
        rows.extend((layer, k, float(probs[k]), float(err[k])) for k in range(probs.size))
    return write_csv(path, ("layer", "count", "probability", "stderr"), rows)
