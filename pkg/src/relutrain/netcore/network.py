"""ReLU network parameters, architectures and forward evaluation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Architecture:
    """Layer widths ``(n_0, n_1, ..., n_L)``; ``n_0`` is the input dimension."""

    widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(n) for n in self.widths)
        if len(widths) < 2:
            raise ValueError(f"an architecture needs at least two widths, got {widths}")
        if any(n < 1 for n in widths):
            raise ValueError(f"all widths must be >= 1, got {widths}")
        object.__setattr__(self, "widths", widths)

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    @property
    def depth(self) -> int:
        """Number of affine layers L."""
        return len(self.widths) - 1

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.widths[1:-1]

    @classmethod
    def parse(cls, text: str) -> "Architecture":
        return cls(tuple(int(tok) for tok in text.replace(" ", "").split(",") if tok))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """Per-layer weights ``W^t`` (n_t x n_{t-1}) and biases ``b^t`` (n_t,).

    Arrays are copied and made read-only; training returns new instances.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(_frozen(w) for w in self.weights)
        bs = tuple(_frozen(b) for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise ValueError("weights and biases must be non-empty and of equal length")
        for t, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {t + 1}: weight {w.shape} and bias {b.shape} are inconsistent")
            if t and w.shape[1] != ws[t - 1].shape[0]:
                raise ValueError(f"layer {t + 1}: fan-in {w.shape[1]} != previous width {ws[t - 1].shape[0]}")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def architecture(self) -> Architecture:
        return Architecture((self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights))

    @property
    def depth(self) -> int:
        return len(self.weights)

    def equal(self, other: "NetworkParams") -> bool:
        """Bit-for-bit equality of all arrays."""
        return self.depth == other.depth and all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )

    def to_dict(self) -> dict:
        return {
            "architecture": list(self.architecture.widths),
            "layers": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in zip(self.weights, self.biases)],
        }

    def to_json(self) -> str:
        """Layer-major JSON; every double is written with 17 significant digits."""
        layers = []
        for w, b in zip(self.weights, self.biases):
            rows = ", ".join("[" + ", ".join(_num(v) for v in row) + "]" for row in w)
            layers.append('{"weight": [' + rows + '], "bias": [' + ", ".join(_num(v) for v in b) + "]}")
        arch = ", ".join(str(n) for n in self.architecture.widths)
        return '{"architecture": [' + arch + '], "layers": [' + ", ".join(layers) + "]}"

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkParams":
        ws = [np.asarray(layer["weight"], dtype=float) for layer in doc["layers"]]
        bs = [np.asarray(layer["bias"], dtype=float) for layer in doc["layers"]]
        params = cls(tuple(ws), tuple(bs))
        if "architecture" in doc and tuple(doc["architecture"]) != params.architecture.widths:
            raise ValueError("architecture field does not match layer shapes")
        return params

    @classmethod
    def from_json(cls, text: str) -> "NetworkParams":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NetworkParams":
        return cls.from_json(Path(path).read_text())


def _num(v: float) -> str:
    v = float(v)
    if not np.isfinite(v):
        raise ValueError("non-finite parameter cannot be serialized")
    return format(v, ".17g")


def _as_batch(params: NetworkParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    n_in = params.architecture.n_in
    single = x.ndim == 0 or (x.ndim == 1 and n_in > 1)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1) if n_in > 1 else x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[-1] != n_in:
        raise ValueError(f"input dimension {x.shape[-1]} != network input dimension {params.architecture.n_in}")
    return x, single


def forward_trace(params: NetworkParams, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Network output and the pre-activations of every hidden layer.

    ``x`` is one point of shape ``(n_0,)`` or a batch ``(N, n_0)``. For
    ``n_0 == 1`` a scalar is one point and a flat array is a batch.
    """
    h, single = _as_batch(params, x)
    pre = []
    for t, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        if t == params.depth - 1:
            h = z
        else:
            pre.append(z)
            h = np.maximum(z, 0.0)
    if single:
        return h[0], [z[0] for z in pre]
    return h, pre


def forward(params: NetworkParams, x) -> np.ndarray:
    return forward_trace(params, x)[0]


def relu_net(c: Sequence[float], w: Sequence[float], b: Sequence[float], c0: float = 0.0) -> NetworkParams:
    """Shallow scalar network ``c0 + sum_i c_i relu(w_i x + b_i)`` for 1-D input."""
    w = np.asarray(w, dtype=float).reshape(-1, 1)
    return NetworkParams(
        (w, np.asarray(c, dtype=float).reshape(1, -1)),
        (np.asarray(b, dtype=float).reshape(-1), np.array([float(c0)])),
    )
