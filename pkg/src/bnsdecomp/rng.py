"""Counter-based random streams keyed by (seed, purpose, block).

Each block of paths draws from its own Philox stream, so a path's random
numbers depend only on the seed and its index, never on how many paths are
simulated or in which order blocks are processed.
"""

from __future__ import annotations

import enum

import numpy as np

BLOCK_SIZE = 2048


class Purpose(enum.IntEnum):
    JUMP_ARRIVALS = 1
    JUMP_TIMES = 2
    GAUSS = 3


def stream(seed: int, purpose: Purpose, block: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence([int(seed), int(purpose), int(block)])
    return np.random.Generator(np.random.Philox(ss))


def n_blocks(n_paths: int, block_size: int = BLOCK_SIZE) -> int:
    return -(-n_paths // block_size)
