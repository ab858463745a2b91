"""Counter-based normal variates.

Every variate is a pure function of (seed, particle, step, component).  Particles
are grouped in fixed-size blocks; block ``b`` at step ``k`` reads a Philox stream
keyed by ``(seed, b)`` with its counter started at ``k`` in the third word.  The
block layout never depends on how many workers process it, so results are
identical for any partitioning.
"""
from __future__ import annotations

import numpy as np

DEFAULT_BLOCK = 4096
_INIT_STREAM = 1  # fourth counter word used for initial-condition draws


def block_generator(seed: int, block: int, step: int, stream: int = 0) -> np.random.Generator:
    key = np.array([seed, block], dtype=np.uint64)
    counter = np.array([0, 0, step, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def block_ranges(n: int, block_size: int = DEFAULT_BLOCK):
    return [(b, lo, min(n, lo + block_size)) for b, lo in enumerate(range(0, n, block_size))]


def normals(seed: int, step: int, n: int, d: int, block_size: int = DEFAULT_BLOCK,
            stream: int = 0) -> np.ndarray:
    """(n, d) standard normals for one step, assembled block by block."""
    out = np.empty((n, d))
    for b, lo, hi in block_ranges(n, block_size):
        out[lo:hi] = block_normals(seed, b, step, hi - lo, d, block_size, stream)
    return out


def block_normals(seed, block, step, rows, d, block_size=DEFAULT_BLOCK, stream=0):
    # normals are produced sequentially, so a short final block is a prefix of a full one
    return block_generator(seed, block, step, stream).standard_normal((rows, d))


def init_normals(seed, n, d, block_size=DEFAULT_BLOCK):
    return normals(seed, 0, n, d, block_size, stream=_INIT_STREAM)
