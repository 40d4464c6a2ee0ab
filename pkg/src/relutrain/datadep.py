"""Data-dependent bias initialization for over-parameterized shallow networks.

Neuron ``i`` is anchored at training input ``x_{i mod m}``: its bias is
``-w_i . x_j + |eps_i|`` so its kink passes (almost) through the datum.
The output scale is calibrated so that the mean squared network output
over the training inputs matches He initialization without bias.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .netcore import Architecture
from .rng import block_generators


def _inputs(inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"inputs must be a non-empty (m, d) array, got shape {x.shape}")
    return x


def _anchor_sq_sum(x: np.ndarray, counts: np.ndarray) -> float:
    """Sum over data k and anchors i of c_i |x_k - x_i|^2, in O(m d)."""
    m = x.shape[0]
    sq = np.sum(x * x, axis=1)
    col = m * sq + sq.sum() - 2.0 * (x @ x.sum(axis=0))
    return float(np.clip(col, 0.0, None) @ counts)


@dataclass(frozen=True)
class DataDepConfig:
    sigma_in: float
    sigma_e: float
    sigma_out: float
    h: float = 1.0

    def __post_init__(self):
        for name in ("sigma_in", "sigma_out", "h"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (self.sigma_e >= 0 and math.isfinite(self.sigma_e)):
            raise ValueError(f"sigma_e must be nonnegative and finite, got {self.sigma_e}")
        if self.h < 1:
            raise ValueError(f"over-parameterization ratio h must be >= 1, got {self.h}")

    def width(self, m: int) -> int:
        return math.ceil(round(self.h * m, 9))

    @property
    def s(self) -> float:
        return self.sigma_e / self.sigma_in


def default_params(inputs, h: float, d: int | None = None) -> DataDepConfig:
    """sigma_in^2 = 2/d, sigma_e = 0 and sigma_out^2 matched to He initialization without bias.

    A non-integral ``h * m`` is rounded up to the width ``n`` and ``h`` is
    replaced by ``n / m``; the calibration then uses the actual number of
    neurons anchored at each datum, so the match stays exact.
    """
    x = _inputs(inputs)
    m = x.shape[0]
    d = x.shape[1] if d is None else d
    if h < 1:
        raise ValueError(f"over-parameterization ratio h must be >= 1, got {h}")
    n = math.ceil(round(h * m, 9))
    h = n / m
    # with n = h m every datum anchors h neurons and this is |X|^2 / (h sum_{k<i} |x_k - x_i|^2)
    denom = 0.5 * _anchor_sq_sum(x, np.bincount(anchors(n, m), minlength=m).astype(float))
    if not denom > 0:
        raise ValueError("all training inputs are identical")
    sigma_out2 = float(np.sum(x * x)) / denom
    return DataDepConfig(sigma_in=math.sqrt(2.0 / d), sigma_e=0.0, sigma_out=math.sqrt(sigma_out2), h=h)


def anchors(n: int, m: int) -> np.ndarray:
    """Index of the datum anchoring each of the ``n`` neurons."""
    return np.arange(n) % m


def datadep_biases(weights, inputs, sigma_e: float, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Biases ``-w_i . x_{i mod m} + |eps_i|`` with ``eps_i ~ N(0, sigma_e^2)``."""
    w = np.asarray(weights, dtype=float)
    x = _inputs(inputs)
    n, m = w.shape[0], x.shape[0]
    if n < m:
        raise ValueError(f"width {n} is smaller than the number of data {m}")
    if w.shape[1] != x.shape[1]:
        raise ValueError(f"weight fan-in {w.shape[1]} != input dimension {x.shape[1]}")
    gen = np.random.default_rng(seed)
    eps = sigma_e * gen.standard_normal(n)
    return -np.einsum("id,id->i", w, x[anchors(n, m)]) + np.abs(eps)


def _pair_terms(x: np.ndarray, s: float) -> np.ndarray:
    """(s^2 + D^2)(atan(s/D) + pi/2) + s D for every pair, with the limit s^2 pi at D = 0."""
    delta = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ang = np.where(delta > 0, np.arctan(s / delta) + math.pi / 2, math.pi)
    return (s * s + delta * delta) * ang + s * delta


def expected_q(inputs, n: int, cfg: DataDepConfig) -> float:
    """Mean over the training inputs of E|N(x)|^2 / d_out under the data-dependent scheme.

    Datum ``i`` anchors ``c_i`` of the ``n`` neurons. When ``n = h m`` every
    ``c_i = h`` and this is the usual closed form.
    """
    x = _inputs(inputs)
    m = x.shape[0]
    counts = np.bincount(anchors(n, m), minlength=m).astype(float)
    terms = _pair_terms(x, cfg.s)  # terms[k, i]
    return cfg.sigma_out**2 * cfg.sigma_in**2 / (m * math.pi) * float(terms @ counts @ np.ones(m))


def he_reference_q(inputs, n: int, d: int | None = None) -> float:
    """Same quantity for He initialization without bias: 2 |X|_F^2 / (d m)."""
    x = _inputs(inputs)
    d = x.shape[1] if d is None else d
    sigma_in2, sigma_out2 = 2.0 / d, 2.0 / n
    return n * sigma_out2 * sigma_in2 / (2 * x.shape[0]) * float(np.sum(x * x))


def mc_q(inputs, arch: Architecture, cfg: DataDepConfig, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo mean and standard error of (1/m) sum_k |N(x_k)|^2 / d_out."""
    x = _inputs(inputs)
    arch = arch if isinstance(arch, Architecture) else Architecture(tuple(arch))
    if arch.depth != 2 or arch.n_in != x.shape[1]:
        raise ValueError(f"need a shallow architecture with input dimension {x.shape[1]}, got {arch.widths}")
    n, d_out, m = arch.widths[1], arch.n_out, x.shape[0]
    if n < m:
        raise ValueError(f"width {n} is smaller than the number of data {m}")
    xa = x[anchors(n, m)]  # (n, d)
    total = total_sq = 0.0
    for gen, count in block_generators(seed, samples):
        w1 = cfg.sigma_in * gen.standard_normal((count, n, x.shape[1]))
        eps = np.abs(cfg.sigma_e * gen.standard_normal((count, n)))
        w2 = cfg.sigma_out * gen.standard_normal((count, d_out, n))
        b1 = -np.einsum("snd,nd->sn", w1, xa) + eps
        hidden = np.maximum(np.einsum("snd,kd->skn", w1, x) + b1[:, None, :], 0.0)
        out = np.einsum("skn,son->sko", hidden, w2)
        q = np.sum(out * out, axis=(1, 2)) / (m * d_out)
        total += float(q.sum())
        total_sq += float(np.sum(q * q))
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples) if samples > 1 else 0.0
