"""Shallow ReLU networks that interpolate data exactly, and datasets that need the full width.

``m + 1`` distinct points are interpolated by ``m`` neurons that share one
direction ``w``: after ordering the points along ``w``, neuron ``i`` puts
its kink at point ``i`` and its output weight fixes the value at point
``i + 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateDataError
from .netcore import NetworkParams
from .output import read_csv, write_csv

MAX_DIRECTION_ATTEMPTS = 1000
GAP_GUARD = 1e-12


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training pairs with inputs ``(N, d)`` and targets ``(N,)`` or ``(N, k)`` inside the ball of radius ``r``."""

    inputs: np.ndarray
    targets: np.ndarray
    r: float | None = None

    def __post_init__(self):
        x = np.array(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.array(self.targets, dtype=float)
        if x.ndim != 2 or x.shape[0] == 0 or y.shape[:1] != x.shape[:1]:
            raise ValueError(f"inputs {x.shape} and targets {y.shape} are inconsistent")
        norms = np.linalg.norm(x, axis=1)
        r = float(norms.max()) if self.r is None else float(self.r)
        if r == 0.0 and self.r is None:
            r = 1.0
        if not (r > 0 and math.isfinite(r)):
            raise ValueError(f"radius must be positive and finite, got {r}")
        if np.any(norms > r * (1 + 1e-12)):
            raise ValueError(f"inputs leave the ball of radius {r}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "r", r)

    # the trainer reads ``x`` and ``y``
    @property
    def x(self) -> np.ndarray:
        return self.inputs

    @property
    def y(self) -> np.ndarray:
        return self.targets

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def to_json(self) -> str:
        return json.dumps({"r": self.r, "inputs": self.inputs.tolist(), "targets": self.targets.tolist()}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        doc = json.loads(text)
        return cls(np.asarray(doc["inputs"]), np.asarray(doc["targets"]), doc.get("r"))

    def write_csv(self, path: str | Path) -> Path:
        ys = self.targets.reshape(self.size, -1)
        header = [f"x{k}" for k in range(self.dim)] + (["y"] if ys.shape[1] == 1 else [f"y{k}" for k in range(ys.shape[1])])
        return write_csv(path, header, (list(map(float, xi)) + list(map(float, yi)) for xi, yi in zip(self.inputs, ys)))

    @classmethod
    def read_csv(cls, path: str | Path, r: float | None = None) -> "Dataset":
        header, rows = read_csv(path)
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
        nx = sum(1 for h in header if h.startswith("x"))
        y = data[:, nx:]
        return cls(data[:, :nx], y[:, 0] if y.shape[1] == 1 else y, r)


def _gaps_ok(proj: np.ndarray, scale: float) -> bool:
    gaps = np.diff(np.sort(proj))
    return gaps.size == 0 or gaps.min() > GAP_GUARD * scale


def find_direction(points, seed: int = 0) -> np.ndarray:
    """Unit vector along which the projections of ``points`` are pairwise distinct."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    scale = max(float(np.linalg.norm(x, axis=1).max()), 1.0)
    if x.shape[1] == 1:
        w = np.ones(1)
        if not _gaps_ok(x[:, 0], scale):
            raise DegenerateDataError("duplicate input points")
        return w
    gen = np.random.default_rng(seed)
    for _ in range(MAX_DIRECTION_ATTEMPTS):
        w = gen.standard_normal(x.shape[1])
        w /= np.linalg.norm(w)
        if _gaps_ok(x @ w, scale):
            return w
    raise DegenerateDataError(f"no separating direction in {MAX_DIRECTION_ATTEMPTS} attempts; inputs are likely duplicated")


def build_interpolant(data: Dataset, seed: int = 0) -> NetworkParams:
    """Width-``m`` shallow network through all ``m + 1`` data points."""
    x, y = data.inputs, data.targets
    if data.size < 2:
        raise DegenerateDataError("at least two data points are needed")
    w = find_direction(x, seed)
    proj = x @ w
    order = np.argsort(proj, kind="stable")
    p, ys = proj[order], y[order]
    m = data.size - 1
    vec = ys.ndim > 1
    c = np.zeros((m,) + ys.shape[1:])
    # values of N(.; i-1) at the sorted points, updated one neuron at a time
    current = np.broadcast_to(ys[0], ys.shape).astype(float).copy()
    for i in range(m):
        c[i] = (ys[i + 1] - current[i + 1]) / (p[i + 1] - p[i])
        ramp = np.maximum(p - p[i], 0.0)
        current += ramp[:, None] * c[i] if vec else ramp * c[i]
    w1 = np.tile(w, (m, 1))
    b1 = -p[:m]
    w2 = c.T if vec else c[None, :]
    b2 = np.atleast_1d(ys[0]).astype(float)
    return NetworkParams((w1, w2), (b1, b2))


def divided_differences(alpha, y) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.diff(y) / np.diff(alpha)


def line_coordinates(inputs) -> np.ndarray:
    """Coordinates ``alpha_i`` of collinear inputs ``x_i = alpha_i u`` along a unit vector ``u``."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        return x.copy()
    ref = x[np.argmax(np.linalg.norm(x, axis=1))]
    u = ref / np.linalg.norm(ref)
    alpha = x @ u
    if not np.allclose(np.outer(alpha, u), x, atol=1e-12 * max(1.0, float(np.abs(x).max()))):
        raise ValueError("inputs are not collinear with the origin")
    return alpha


def count_slope_changes(inputs, targets, tol: float = 0.0) -> int:
    """Number of breakpoints of the piecewise linear interpolant through collinear data."""
    alpha = line_coordinates(inputs)
    order = np.argsort(alpha)
    dd = divided_differences(alpha[order], np.asarray(targets, dtype=float)[order])
    return int(np.count_nonzero(np.abs(np.diff(dd)) > tol))


def nd_margin(inputs, targets) -> float:
    """Smallest pairwise gap between any three consecutive divided differences."""
    alpha = line_coordinates(inputs)
    order = np.argsort(alpha)
    dd = divided_differences(alpha[order], np.asarray(targets, dtype=float)[order])
    if dd.size < 2:
        return math.inf
    gaps = [abs(dd[i + 1] - dd[i]) for i in range(dd.size - 1)]
    gaps += [abs(dd[i + 2] - dd[i]) for i in range(dd.size - 2)]
    return float(min(gaps))


def witness_data(m: int, seed: int = 0, d: int = 1) -> Dataset:
    """``m + 1`` collinear points whose interpolant needs ``m - 1`` slope changes.

    Inputs are ``alpha_i u`` for a random unit ``u`` and increasing
    ``alpha_i`` in [-1, 1]. Divided differences alternate in sign with
    magnitudes ``1 + 0.25 i + 0.1 u_i``, so any three consecutive ones are
    pairwise at least 0.4 apart.
    """
    if m < 4:
        raise ValueError(f"m must be >= 4, got {m}")
    gen = np.random.default_rng(seed)
    base = np.linspace(-1.0, 1.0, m + 1)
    jitter = gen.uniform(-0.25, 0.25, m + 1) * (2.0 / m)
    jitter[[0, -1]] = 0.0
    alpha = base + jitter
    slopes = (-1.0) ** np.arange(m) * (1.0 + 0.25 * np.arange(m) + 0.1 * gen.uniform(size=m))
    y = np.concatenate([[gen.standard_normal()], np.cumsum(slopes * np.diff(alpha))])
    y[1:] += y[0]
    u = gen.standard_normal(d)
    u /= np.linalg.norm(u)
    return Dataset(np.outer(alpha, u), y, 1.0)
