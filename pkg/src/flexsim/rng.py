"""
flexsim Random Streams

Seedable, splittable generators. Every consumer draws from its own
substream keyed by a path below the run seed, so adding a consumer never
shifts the draws of another.
"""

from typing import Callable, List, Optional, Union

import numpy as np


SeedLike = Union[int, np.random.Generator, None]

# Substream keys below a run seed
ARRIVALS = 0
ROUTING = 1
JOB_SIZES = 2
DUMMY_SIZES = 3
POLICY = 4
TOPOLOGY = 5
RATES = 6


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a generator for an int seed, or pass a generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream at `path` below `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=path)))


def derive_seed(seed: int, *path: int) -> int:
    """A 63-bit integer seed derived from `seed` and a path."""
    state = np.random.SeedSequence(seed, spawn_key=path).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))


class BufferedStream:
    """
    Scalar draws served from vectorised blocks.

    `draw_block(rng, size)` must return a 1-D array; values are handed out
    one at a time through `next()`.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        draw_block: Callable[[np.random.Generator, int], np.ndarray],
        block_size: int = 8192,
    ):
        self._rng = rng
        self._draw_block = draw_block
        self._block_size = block_size
        self._buffer: List[float] = []
        self._pos = 0

    def next(self) -> float:
        if self._pos >= len(self._buffer):
            self._buffer = self._draw_block(self._rng, self._block_size).tolist()
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return value


def exponential_stream(rng: np.random.Generator, mean: float = 1.0, block_size: int = 8192) -> BufferedStream:
    return BufferedStream(rng, lambda g, k: g.exponential(mean, size=k), block_size)


def uniform_stream(rng: np.random.Generator, block_size: int = 8192) -> BufferedStream:
    return BufferedStream(rng, lambda g, k: g.random(size=k), block_size)


def choice_stream(
    rng: np.random.Generator,
    probabilities: Optional[np.ndarray],
    n: int,
    block_size: int = 8192,
) -> BufferedStream:
    """Indices in range(n) drawn with the given probabilities (uniform if None)."""
    if probabilities is None:
        return BufferedStream(rng, lambda g, k: g.integers(0, n, size=k), block_size)
    p = np.asarray(probabilities, dtype=float)
    p = p / p.sum()
    return BufferedStream(rng, lambda g, k: g.choice(n, size=k, p=p), block_size)
