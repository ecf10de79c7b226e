"""Counter-based random substreams.

Every draw is keyed by ``(seed, *keys)`` through :class:`numpy.random.SeedSequence`
spawn keys and fed to a Philox generator.  Sample ``i`` of a batch lives in
block ``i // BLOCK_SIZE``, so its value depends only on the seed, the stream
keys and ``i``; never on how blocks are scheduled across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

BLOCK_SIZE = 8192


def substream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def blocked_draw(
    count: int,
    seed: int,
    keys: tuple[int, ...],
    draw: Callable[[np.random.Generator, int], np.ndarray],
    workers: int = 1,
) -> np.ndarray:
    """Concatenate ``draw(rng_b, size_b)`` over fixed-size blocks ``b``.

    ``draw`` must return an array whose first axis has length ``size_b``.
    """
    count = int(count)
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    n_blocks = -(-count // BLOCK_SIZE)

    def one(b: int) -> np.ndarray:
        size = min(BLOCK_SIZE, count - b * BLOCK_SIZE)
        return draw(substream(seed, *keys, b), size)

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(n_blocks)))
    else:
        parts = [one(b) for b in range(n_blocks)]
    return np.concatenate(parts, axis=0)


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit child seed for an independent named stream."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
