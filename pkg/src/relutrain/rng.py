"""Seed handling for Monte Carlo estimators.

Samples are grouped into fixed-size blocks and block ``k`` draws from the
stream spawned at key ``k`` of the master seed. Results therefore depend
only on ``(seed, samples)``, not on how blocks are scheduled.
"""
from __future__ import annotations

from typing import Iterator

import numpy as np

BLOCK_SIZE = 8192


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def block_generators(seed: int, samples: int, block_size: int = BLOCK_SIZE) -> Iterator[tuple[np.random.Generator, int]]:
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    for k, start in enumerate(range(0, samples, block_size)):
        yield substream(seed, k), min(block_size, samples - start)
