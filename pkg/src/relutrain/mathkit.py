"""Special functions, Gauss-Legendre quadrature and log-domain combinatorics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int


@lru_cache(maxsize=None)
def gauss_legendre(order: int = 32) -> QuadratureRule:
    if order < 1:
        raise ValueError(f"quadrature order must be positive, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, order=order)


def _composite(f, a: float, b: float, panels: int, rule: QuadratureRule) -> np.ndarray:
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * rule.nodes[None, :]).ravel()
    w = (half[:, None] * rule.weights[None, :]).ravel()
    return np.asarray(f(x)) @ w


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    tol: float = 1e-13,
    order: int = 32,
    max_panels: int = 1 << 12,
) -> float | np.ndarray:
    """Composite Gauss-Legendre integral of a vectorized ``f`` over [a, b].

    The number of panels doubles until two successive estimates differ by
    less than ``tol`` (absolute). ``f`` maps an array of abscissae of shape
    ``(k,)`` to ``(k,)`` or ``(..., k)``; vector-valued integrands are
    integrated component-wise.
    """
    if a == b:
        return 0.0 * np.asarray(f(np.array([a])))[..., 0]
    rule = gauss_legendre(order)
    panels = 1
    prev = _composite(f, a, b, panels, rule)
    while panels < max_panels:
        panels *= 2
        cur = _composite(f, a, b, panels, rule)
        if np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
    return prev


def gamma_ratio(d: int) -> float:
    """Gamma((d+1)/2) / Gamma(d/2) via a log-gamma difference."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return math.exp(math.lgamma((d + 1) / 2) - math.lgamma(d / 2))


def integrate_sin_power(alpha: float, d: int) -> float:
    """Integral of sin(u)**(d-1) over [0, alpha] for 0 <= alpha <= pi."""
    if not 0.0 <= alpha <= math.pi:
        raise ValueError(f"alpha must lie in [0, pi], got {alpha}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if d == 1:
        return float(alpha)
    return float(integrate(lambda u: np.sin(u) ** (d - 1), 0.0, alpha))


def log_multinomial(n: int, parts: Sequence[int]) -> float:
    """Log of n! / (k_1! k_2! ...)."""
    parts = [int(k) for k in parts]
    if any(k < 0 for k in parts) or sum(parts) != n:
        raise ValueError(f"parts {parts} are not a partition of {n}")
    return math.lgamma(n + 1) - math.fsum(math.lgamma(k + 1) for k in parts)


def log_binom(n: int, k: int) -> float:
    return log_multinomial(n, (k, n - k))


def binom_pmf(n: int, p: float) -> np.ndarray:
    """Binomial(n, p) probability mass on 0..n, evaluated in log space."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        out = np.zeros(n + 1)
        out[n if p == 1.0 else 0] = 1.0
        return out
    lp, lq = math.log(p), math.log1p(-p)
    return np.array([math.exp(log_binom(n, j) + j * lp + (n - j) * lq) for j in range(n + 1)])


def binom_tail(n: int, m: int, p: float) -> float:
    """P(Binomial(n, p) >= m) by compensated summation of the log-space pmf."""
    if m <= 0:
        return 1.0
    if m > n:
        return 0.0
    return min(1.0, math.fsum(binom_pmf(n, p)[m:]))
