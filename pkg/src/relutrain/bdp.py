"""Born-dead probability of a single ReLU neuron on the ball B_r(0).

A first-layer neuron ``relu(w.x + b)`` with ``(w, b)`` drawn from an
isotropic distribution is dead on the ball when ``r*|w| + b <= 0``. The
probability depends only on the direction of ``(w, b)``, so the scale of
the normal initialization is irrelevant here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mathkit import gamma_ratio, integrate_sin_power
from .rng import block_generators


def _check_radius(r: float) -> None:
    if not (r > 0 and math.isfinite(r)):
        raise ValueError(f"radius must be positive and finite, got {r}")


def alpha_r(r: float) -> float:
    """Half-angle atan(1/r) of the dead cone."""
    _check_radius(r)
    return math.atan(1.0 / r)


@dataclass(frozen=True)
class BdpResult:
    exact: float
    lower: float
    upper: float
    alpha_r: float
    d: int
    r: float


def bdp_exact(d: int, r: float) -> float:
    """Probability that a with-bias first-layer neuron is born dead on B_r(0)."""
    a = alpha_r(r)
    return gamma_ratio(d) / math.sqrt(math.pi) * integrate_sin_power(a, d)


def bdp_bounds(d: int, r: float) -> tuple[float, float]:
    a = alpha_r(r)
    s = math.sin(a)
    lower = s**d / (math.pi * d)
    upper = math.sqrt(d / (2 * math.pi)) * a * s ** (d - 1)
    return lower, upper


def bdp(d: int, r: float) -> BdpResult:
    lower, upper = bdp_bounds(d, r)
    return BdpResult(exact=bdp_exact(d, r), lower=lower, upper=upper, alpha_r=alpha_r(r), d=d, r=r)


def suggested_width(m: int, d: int, r: float, with_bias: bool = True) -> int:
    """Width whose expected number of active first-layer neurons is at least m."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not with_bias:
        return m
    target = m / (1.0 - bdp_exact(d, r))
    # absorb round-off so that e.g. 200 / (2/3) lands on 300, not 301
    return math.ceil(round(target, 9))


def overparam_condition(m: int, d: int, r: float, delta: float) -> bool:
    """Whether 1 - (1-delta)**(1/m) < exp(-C_r d) / (pi d), C_r = -log sin(atan(1/r))."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if m < 1 or d < 1:
        raise ValueError("m and d must be positive")
    c_r = -math.log(math.sin(alpha_r(r)))
    lhs = -math.expm1(math.log1p(-delta) / m)
    rhs = math.exp(-c_r * d) / (math.pi * d)
    return lhs < rhs


def mc_bdp(d: int, r: float, samples: int, seed: int) -> tuple[float, float]:
    """Fraction of standard-normal (w, b) draws with r*|w| + b <= 0, with its standard error."""
    _check_radius(r)
    dead = 0
    for gen, count in block_generators(seed, samples):
        wb = gen.standard_normal((count, d + 1))
        dead += int(np.count_nonzero(r * np.linalg.norm(wb[:, :d], axis=1) + wb[:, d] <= 0))
    p = dead / samples
    return p, math.sqrt(p * (1 - p) / samples)
