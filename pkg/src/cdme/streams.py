"""Deterministic block-partitioned random streams.

Work items (Monte Carlo paths, simulation runs) are split into fixed-size
blocks. Block ``b`` of a job tagged ``tag`` draws from a Philox generator
keyed by ``(seed, tag, b)``, so the numbers a given item sees depend only on
the seed and its position, never on how blocks are scheduled over threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

__all__ = ["block_generator", "block_sizes", "map_blocks", "combine_moments", "block_moments", "standard_error", "BLOCK_SIZE"]

BLOCK_SIZE = 8192

_TAGS = {"fk": 1, "fk_deriv": 2, "hermite": 3, "particles": 4, "bootstrap": 5, "ou": 6}


def block_generator(seed: int, tag: str, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _TAGS[tag], int(block)])
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(total: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(int(total), block_size)
    return [block_size] * full + ([rest] if rest else [])


def map_blocks(func: Callable[[int, int], object], total: int, threads: int = 1, block_size: int = BLOCK_SIZE) -> list:
    """Run ``func(block_index, size)`` over every block; results in block order."""
    sizes = block_sizes(total, block_size)
    if threads <= 1 or len(sizes) <= 1:
        return [func(b, s) for b, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, range(len(sizes)), sizes))


def combine_moments(parts: Sequence[tuple]) -> tuple[int, np.ndarray, np.ndarray]:
    """Merge per-block ``(count, mean, M2)`` in order (Chan et al. update)."""
    n, mean, m2 = 0, None, None
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        if n == 0:
            n, mean, m2 = nb, np.array(mb, dtype=float), np.array(m2b, dtype=float)
            continue
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta * delta * (n * nb / tot)
        n = tot
    return n, mean, m2


def block_moments(x: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    """``(count, mean, M2)`` along axis 0."""
    n = x.shape[0]
    mean = x.mean(axis=0)
    m2 = ((x - mean) ** 2).sum(axis=0)
    return n, mean, m2


def standard_error(n: int, m2) -> np.ndarray:
    m2 = np.asarray(m2, dtype=float)
    if n < 2:
        return np.zeros_like(m2)
    return np.sqrt(m2 / (n - 1) / n)

