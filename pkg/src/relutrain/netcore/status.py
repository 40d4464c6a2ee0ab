"""Life state of hidden neurons on the ball B_r(0).

A hidden neuron is dead on the ball when it is a constant function there.
Layer-1 deadness is decided exactly. For deeper layers and one-dimensional
input the pre-activations are piecewise linear with knots at the zero
crossings of earlier layers, so checking them at those knots and the two
endpoints is exact. For higher-dimensional input the maximum is taken over
a fixed scrambled Sobol set of ball points and is only approximate.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .network import NetworkParams


class LifeState(str, Enum):
    ACTIVE = "active"
    TENTATIVELY_DEAD = "tentatively-dead"
    PERMANENTLY_DEAD = "permanently-dead"


@dataclass(frozen=True)
class NeuronStatus:
    layer: int  # 1-based hidden layer index
    index: int
    state: LifeState
    max_preact: float  # max of the pre-activation over the ball (or probes)
    constant_value: float | None = None  # output value when dead
    exact: bool = True

    @property
    def dead(self) -> bool:
        return self.state is not LifeState.ACTIVE


@dataclass(frozen=True)
class PiecewiseLinear:
    """Knots of a 1-D input network on [-r, r] and its values there.

    ``preacts[t]`` holds the pre-activation of hidden layer ``t + 1`` at the
    knots with shape ``(K, n_{t+1})``; ``outputs`` has shape ``(K, n_L)``.
    Every pre-activation and the output are affine between adjacent knots.
    """

    knots: np.ndarray
    preacts: tuple[np.ndarray, ...]
    outputs: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.outputs[:, 0] if self.outputs.shape[1] == 1 else self.outputs

    def __call__(self, x) -> np.ndarray:
        """Linear interpolation between knots (output dimension 1 only)."""
        return np.interp(x, self.knots, self.outputs[:, 0])


@dataclass
class StackStatus:
    """Status of a stack of ``S`` networks; each array is ``(S, n_t)``."""

    dead: list[np.ndarray]
    permanent: list[np.ndarray]
    max_preact: list[np.ndarray]
    constant_value: list[np.ndarray]

    def active_counts(self) -> list[np.ndarray]:
        return [np.count_nonzero(~d, axis=1) for d in self.dead]


def _hidden_forward(points, weights, biases, upto):
    """Pre-activations of hidden layers 1..upto at ``points`` (S, K, n0)."""
    pre = []
    h = points
    for t in range(upto):
        z = np.einsum("skn,smn->skm", h, weights[t]) + biases[t][:, None, :]
        pre.append(z)
        h = np.maximum(z, 0.0)
    return pre


def _knot_points(weights, biases, r: float, layers: int) -> np.ndarray:
    """Sorted candidate points (S, K) holding -r, r and the zero crossings
    of hidden layers 1..layers inside (-r, r).

    Crossings are searched interval by interval, so each new layer only
    needs its pre-activation at the existing points. Intervals without a
    sign change contribute a duplicate of their left point.
    """
    s = weights[0].shape[0]
    pts = np.broadcast_to(np.array([-r, r]), (s, 2))
    for t in range(layers):
        z = _hidden_forward(pts[..., None], weights, biases, t + 1)[-1]  # (S, K, n)
        za, zb = z[:, :-1, :], z[:, 1:, :]
        xa, xb = pts[:, :-1, None], pts[:, 1:, None]
        cross = za * zb < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = np.where(cross, xa - za * (xb - xa) / (zb - za), xa)
        pts = np.sort(np.concatenate([pts, xc.reshape(s, -1)], axis=1), axis=1)
    return pts


@lru_cache(maxsize=16)
def ball_probes(d: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` quasi-uniform points in the unit ball of R^d, plus the origin."""
    sobol = qmc.Sobol(d + 1, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # non power-of-two counts
        u = sobol.random(count)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = ndtri(u[:, :d])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts = np.vstack([np.zeros((1, d)), g * u[:, d:] ** (1.0 / d)])
    pts.setflags(write=False)
    return pts


def classify_stack(weights, biases, r: float, probe_count: int = 4096, probe_seed: int = 0) -> StackStatus:
    """Classify every hidden neuron of ``S`` stacked networks at once.

    ``weights[t]`` has shape ``(S, n_{t+1}, n_t)`` and ``biases[t]`` shape
    ``(S, n_{t+1})``. Only hidden layers are classified.
    """
    if not (r > 0 and math.isfinite(r)):
        raise ValueError(f"radius must be positive and finite, got {r}")
    weights = [np.asarray(w, dtype=float) for w in weights]
    biases = [np.asarray(b, dtype=float) for b in biases]
    hidden = len(weights) - 1
    s, d_in = weights[0].shape[0], weights[0].shape[2]
    dead, perm, maxz, const = [], [], [], []
    if hidden == 0:
        return StackStatus(dead, perm, maxz, const)

    w1, b1 = weights[0], biases[0]
    m1 = r * np.linalg.norm(w1, axis=2) + b1
    zero_w = ~np.any(w1 != 0, axis=2)
    d1 = (m1 <= 0) | zero_w
    dead.append(d1)
    perm.append(d1.copy())
    maxz.append(m1)
    const.append(np.where(zero_w, np.maximum(b1, 0.0), 0.0))
    if hidden == 1:
        return StackStatus(dead, perm, maxz, const)

    # pre-activation maxima of deeper layers, evaluated in memory-bounded chunks
    width = max(w.shape[1] for w in weights[:-1])
    probes = None if d_in == 1 else r * ball_probes(d_in, probe_count, probe_seed)
    deeper = [np.empty((s, weights[t].shape[1])) for t in range(1, hidden)]
    first = [np.empty((s, weights[t].shape[1])) for t in range(1, hidden)]
    chunk = s
    while True:
        k_est = probes.shape[0] if probes is not None else 2 * (width + 1) ** max(hidden - 1, 1)
        if chunk * k_est * width <= 1 << 22 or chunk == 1:
            break
        chunk = max(1, chunk // 2)
    for lo in range(0, s, chunk):
        ws = [w[lo : lo + chunk] for w in weights]
        bs = [b[lo : lo + chunk] for b in biases]
        if probes is None:
            pts = _knot_points(ws, bs, r, hidden - 1)[..., None]
        else:
            pts = np.broadcast_to(probes, (ws[0].shape[0],) + probes.shape)
        pre = _hidden_forward(pts, ws, bs, hidden)
        for t in range(1, hidden):
            deeper[t - 1][lo : lo + chunk] = pre[t].max(axis=1)
            first[t - 1][lo : lo + chunk] = pre[t][:, 0, :]

    for t in range(1, hidden):
        w, b = weights[t], biases[t]
        # constant iff every upstream neuron it actually reads from is constant
        structural = np.all((w == 0) | dead[-1][:, None, :], axis=2)
        m = deeper[t - 1]
        dt = structural | (m <= 0)
        dead.append(dt)
        perm.append(dt & np.all(w <= 0, axis=2) & (b <= 0))
        maxz.append(m)
        const.append(np.where(dt & (m > 0), np.maximum(first[t - 1], 0.0), 0.0))
    return StackStatus(dead, perm, maxz, const)


def eval_piecewise_1d(params: NetworkParams, r: float) -> PiecewiseLinear:
    """Exact knots of a 1-D input network on [-r, r] with values at each knot."""
    if params.architecture.n_in != 1:
        raise ValueError("eval_piecewise_1d needs a one-dimensional input")
    if not (r > 0 and math.isfinite(r)):
        raise ValueError(f"radius must be positive and finite, got {r}")
    ws = [w[None] for w in params.weights]
    bs = [b[None] for b in params.biases]
    knots = np.unique(_knot_points(ws, bs, r, params.depth - 1)[0])
    pre = _hidden_forward(knots[None, :, None], ws, bs, params.depth - 1)
    h = np.maximum(pre[-1][0], 0.0) if pre else knots[:, None]
    out = h @ params.weights[-1].T + params.biases[-1]
    return PiecewiseLinear(knots=knots, preacts=tuple(z[0] for z in pre), outputs=out)


def neuron_status(params: NetworkParams, r: float, probe_count: int = 4096) -> list[NeuronStatus]:
    """Life state of every hidden neuron, layer by layer."""
    st = classify_stack([w[None] for w in params.weights], [b[None] for b in params.biases], r, probe_count)
    exact_deep = params.architecture.n_in == 1
    out = []
    for t, (dead, perm, m, c) in enumerate(zip(st.dead, st.permanent, st.max_preact, st.constant_value)):
        for j in range(dead.shape[1]):
            if perm[0, j]:
                state = LifeState.PERMANENTLY_DEAD
            elif dead[0, j]:
                state = LifeState.TENTATIVELY_DEAD
            else:
                state = LifeState.ACTIVE
            out.append(
                NeuronStatus(
                    layer=t + 1,
                    index=j,
                    state=state,
                    max_preact=float(m[0, j]),
                    constant_value=float(c[0, j]) if dead[0, j] else None,
                    exact=t == 0 or exact_deep,
                )
            )
    return out


def status_counts(statuses: list[NeuronStatus]) -> dict[int, dict[LifeState, int]]:
    """Per-layer counts of each life state."""
    counts: dict[int, dict[LifeState, int]] = {}
    for s in statuses:
        layer = counts.setdefault(s.layer, {state: 0 for state in LifeState})
        layer[s.state] += 1
    return counts
