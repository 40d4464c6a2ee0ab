"""Square-loss gradients and mini-batch optimizers.

Training runs on a stack of ``R`` independent replicates at once: every
array carries a leading replicate axis, and each replicate shuffles its
data with its own generator. A single run is the ``R = 1`` case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .network import NetworkParams


class Method(str, Enum):
    SGD = "sgd"
    MOMENTUM = "momentum"
    ADAM = "adam"


@dataclass(frozen=True)
class OptimizerConfig:
    method: Method = Method.SGD
    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 128
    epochs: int = 1000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ValueError(f"learning rate must be finite and >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")


@dataclass
class TrainHistory:
    """Training RMSE after each epoch (entry 0 is at initialization), per replicate.

    Epochs skipped by ``record_every`` hold NaN in ``rmse``; the initial and
    final epochs are always recorded. Dead counts are tracked every epoch.
    """

    rmse: np.ndarray  # (R, epochs + 1)
    dead_layer1: np.ndarray | None = None  # (R, epochs + 1) when tracked

    def final_rmse(self) -> np.ndarray:
        return self.rmse[:, -1]


def _bmm(a, b):
    """Batched ``a @ b`` for (R, I, K) x (R, K, J); broadcasts when K or J is 1.

    Batched matmul is slow for the degenerate shapes of 1-D input and
    scalar output networks, which dominate the experiments.
    """
    if a.shape[2] == 1:
        return np.einsum("ri,rj->rij", a[:, :, 0], b[:, 0, :])
    if b.shape[2] == 1:
        return np.einsum("rik,rk->ri", a, b[:, :, 0])[:, :, None]
    return np.matmul(a, b)


def _stack_forward(ws, bs, x):
    """Forward pass of stacked nets on per-replicate inputs ``x`` (R, B, n0)."""
    hs, zs = [x], []
    for t in range(len(ws)):
        # in place: fresh temporaries of this size cost more than the arithmetic
        z = _bmm(hs[-1], ws[t].transpose(0, 2, 1))
        z += bs[t][:, None, :]
        zs.append(z)
        if t < len(ws) - 1:
            hs.append(np.maximum(z, 0.0))
    return hs, zs


def _stack_grad(ws, bs, x, y):
    """Gradient of mean_b |N(x_b) - y_b|^2 for every replicate; phi'(0) = 0."""
    hs, zs = _stack_forward(ws, bs, x)
    delta = zs[-1] - y
    delta *= 2.0 / x.shape[1]
    gw = [None] * len(ws)
    gb = [None] * len(ws)
    ones = np.ones((x.shape[0], 1, x.shape[1]))  # batch sums as matmuls, much faster than sum(axis=1)
    for t in range(len(ws) - 1, -1, -1):
        gw[t] = np.matmul(delta.transpose(0, 2, 1), hs[t])
        gb[t] = np.matmul(ones, delta)[:, 0, :]
        if t:
            delta = _bmm(delta, ws[t])
            delta *= zs[t - 1] > 0
    return gw, gb


def _data_arrays(data, n_in):
    x, y = (data.x, data.y) if hasattr(data, "x") else data
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if n_in == 1 else x.reshape(1, -1)
    if y.ndim == 1:
        y = y.reshape(x.shape[0], -1)
    if x.shape[-1] != n_in or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError(f"data shapes {x.shape}, {y.shape} do not fit input dimension {n_in}")
    return x, y


def loss_grad(params: NetworkParams, data) -> NetworkParams:
    """Exact gradient of the mean square loss on ``data`` = (x, y) or a Dataset."""
    x, y = _data_arrays(data, params.architecture.n_in)
    gw, gb = _stack_grad([w[None] for w in params.weights], [b[None] for b in params.biases], x[None], y[None])
    return NetworkParams(tuple(g[0] for g in gw), tuple(g[0] for g in gb))


def mse_loss(params: NetworkParams, data) -> float:
    x, y = _data_arrays(data, params.architecture.n_in)
    _, zs = _stack_forward([w[None] for w in params.weights], [b[None] for b in params.biases], x[None])
    return float(np.mean(np.sum((zs[-1][0] - y) ** 2, axis=-1)))


def _rmse(ws, bs, x, y):
    _, zs = _stack_forward(ws, bs, x)
    return np.sqrt(np.mean(np.sum((zs[-1] - y) ** 2, axis=-1), axis=1))


def _dead1(w1, b1, r):
    return np.count_nonzero((r * np.linalg.norm(w1, axis=2) + b1 <= 0) | ~np.any(w1 != 0, axis=2), axis=1)


@dataclass
class _OptState:
    opt: OptimizerConfig
    bufs: list = field(default_factory=list)
    second: list = field(default_factory=list)
    step: int = 0

    def apply(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        opt = self.opt
        if not self.bufs:
            self.bufs = [np.zeros_like(p) for p in params]
            self.second = [np.zeros_like(p) for p in params] if opt.method is Method.ADAM else []
        self.step += 1
        for k, (p, g) in enumerate(zip(params, grads)):
            if opt.method is Method.SGD:
                p -= opt.lr * g
            elif opt.method is Method.MOMENTUM:
                v = self.bufs[k]
                v *= opt.momentum
                v += g
                p -= opt.lr * v
            else:
                m, v = self.bufs[k], self.second[k]
                m *= opt.beta1
                m += (1 - opt.beta1) * g
                v *= opt.beta2
                v += (1 - opt.beta2) * g * g
                mhat = m / (1 - opt.beta1**self.step)
                vhat = v / (1 - opt.beta2**self.step)
                p -= opt.lr * mhat / (np.sqrt(vhat) + opt.eps)


def _permutations(gens, n, count):
    """``count`` epochs of independent permutations of range(n) per replicate: (R, count, n)."""
    return np.stack([np.argsort(g.random((count, n)), axis=1) for g in gens])


def train_replicates(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    x,
    y,
    opt: OptimizerConfig,
    *,
    seeds: Sequence[int] | None = None,
    dead_radius: float | None = None,
    chunk_epochs: int = 64,
    record_every: int = 1,
) -> tuple[list[np.ndarray], list[np.ndarray], TrainHistory]:
    """Train ``R`` stacked networks; ``weights[t]`` is ``(R, n_{t+1}, n_t)``.

    ``x``/``y`` are either shared ``(N, .)`` arrays or per-replicate
    ``(R, N, .)`` arrays. Replicate ``i`` shuffles with
    ``default_rng(seeds[i])`` (default ``opt.seed + i``). Training RMSE is
    evaluated every ``record_every`` epochs.
    """
    if record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every}")
    ws = [np.array(w, dtype=float) for w in weights]
    bs = [np.array(b, dtype=float) for b in biases]
    r_count = ws[0].shape[0]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 2:
        x = np.broadcast_to(x, (r_count,) + x.shape)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim == 2:
        y = np.broadcast_to(y, (r_count,) + y.shape)
    n = x.shape[1]
    if x.shape[0] != r_count or y.shape[:2] != (r_count, n) or x.shape[2] != ws[0].shape[2]:
        raise ValueError(f"data shapes {x.shape}, {y.shape} do not fit {r_count} replicates")
    seeds = [opt.seed + i for i in range(r_count)] if seeds is None else list(seeds)
    gens = [np.random.default_rng(s) for s in seeds]
    rows = np.arange(r_count)[:, None]

    rmse = np.full((r_count, opt.epochs + 1), np.nan)
    dead = np.empty((r_count, opt.epochs + 1), dtype=int) if dead_radius is not None else None
    rmse[:, 0] = _rmse(ws, bs, x, y)
    if dead is not None:
        dead[:, 0] = _dead1(ws[0], bs[0], dead_radius)

    state = _OptState(opt)
    params = ws + bs
    full_batch = opt.batch_size >= n
    for start in range(0, opt.epochs, chunk_epochs):
        count = min(chunk_epochs, opt.epochs - start)
        perms = None if full_batch else _permutations(gens, n, count)
        for e in range(count):
            if full_batch:
                batches = [(x, y)]
            else:
                p = perms[:, e]
                batches = [
                    (x[rows, p[:, lo : lo + opt.batch_size]], y[rows, p[:, lo : lo + opt.batch_size]])
                    for lo in range(0, n, opt.batch_size)
                ]
            for xb, yb in batches:
                gw, gb = _stack_grad(ws, bs, xb, yb)
                state.apply(params, gw + gb)
            epoch = start + e + 1
            if epoch % record_every == 0 or epoch == opt.epochs:
                rmse[:, epoch] = _rmse(ws, bs, x, y)
            if dead is not None:
                dead[:, epoch] = _dead1(ws[0], bs[0], dead_radius)
    return ws, bs, TrainHistory(rmse=rmse, dead_layer1=dead)


def train(
    params: NetworkParams, data, opt: OptimizerConfig, *, dead_radius: float | None = None
) -> tuple[NetworkParams, TrainHistory]:
    """Train one network on ``data`` = (x, y) or a Dataset; history has one replicate row."""
    x, y = _data_arrays(data, params.architecture.n_in)
    ws, bs, hist = train_replicates(
        [w[None] for w in params.weights],
        [b[None] for b in params.biases],
        x,
        y,
        opt,
        seeds=[opt.seed],
        dead_radius=dead_radius,
    )
    return NetworkParams(tuple(w[0] for w in ws), tuple(b[0] for b in bs)), hist


def stack_params(params: Sequence[NetworkParams]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Stack a list of same-shaped networks along a new leading axis."""
    depth = params[0].depth
    return (
        [np.stack([p.weights[t] for p in params]) for t in range(depth)],
        [np.stack([p.biases[t] for p in params]) for t in range(depth)],
    )


def unstack_params(weights, biases) -> list[NetworkParams]:
    return [
        NetworkParams(tuple(w[i] for w in weights), tuple(b[i] for b in biases)) for i in range(weights[0].shape[0])
    ]
