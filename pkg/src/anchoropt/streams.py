"""Deterministic RNG stream derivation.

Every random draw in a campaign comes from a generator keyed by the master
seed plus a tuple of integer indices, so results never depend on evaluation
order or on how work is scheduled.
"""

from typing import Iterator

import numpy as np

# Top-level key namespaces.
PSO = 0
OPTIMIZE_NOISE = 1
EVALUATE_NOISE = 2
INIT = 3
BASELINE = 4


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def normal_blocks(seed: int, namespace: int, n_anchors: int, n_positions: int, n_realizations: int,
                  length: int = 1, block: int = 64) -> Iterator[np.ndarray]:
    """Yield unit-variance noise blocks indexed ``[realization, anchor, position, sample]``.

    One stream per (anchor, position); realization ``r`` always takes the
    ``r``-th draw of that stream, so any bank is an exact sub-block of a bank
    with more realizations, anchors or positions, whatever the block size.
    """
    rngs = [[derive_rng(seed, namespace, j, p) for p in range(n_positions)] for j in range(n_anchors)]
    for r0 in range(0, n_realizations, block):
        n = min(block, n_realizations - r0)
        out = np.empty((n, n_anchors, n_positions, length))
        for j in range(n_anchors):
            for p in range(n_positions):
                out[:, j, p, :] = rngs[j][p].standard_normal((n, length))
        yield out


def standard_normal_bank(seed: int, namespace: int, n_anchors: int, n_positions: int,
                         n_realizations: int, length: int = 1) -> np.ndarray:
    blocks = normal_blocks(seed, namespace, n_anchors, n_positions, n_realizations, length,
                           block=max(n_realizations, 1))
    return np.concatenate(list(blocks), axis=0)
