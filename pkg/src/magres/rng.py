"""Seeded random streams.

Every stochastic operation in the toolkit takes an explicit :class:`RngState`.
A single 64-bit seed is expanded into named substreams with
:class:`numpy.random.SeedSequence`, so one integer reproduces a whole
experiment and independent components never share draws.
"""

from __future__ import annotations

import zlib
from typing import Optional

import numpy as np

SEED_MASK = (1 << 64) - 1


def _key(name: str | int) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name) & 0xFFFFFFFF
    return zlib.crc32(str(name).encode("utf-8"))


def derive_seed(seed: int, *path: str | int) -> int:
    """Return a 64-bit seed for the substream ``path`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(_key(p) for p in path))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


class RngState:
    """A reproducible random stream.

    Attributes:
        seed: 64-bit seed the stream was built from.
        path: substream keys below ``seed`` (empty for a root stream).
        draws: number of variates consumed so far (stream position).
        carry: state of the correlated-noise process, if one is in use.
    """

    def __init__(self, seed: int = 0, path: tuple = ()):
        self.seed = int(seed) & SEED_MASK
        self.path = tuple(path)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_key(p) for p in self.path))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self.draws = 0
        self.carry: Optional[np.ndarray] = None

    def substream(self, *path: str | int) -> "RngState":
        """Independent child stream; does not advance this stream."""
        return RngState(self.seed, self.path + tuple(path))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def _count(self, size) -> None:
        self.draws += int(np.prod(size)) if size is not None else 1

    def normal(self, size=None):
        self._count(size)
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        self._count(size)
        return self._gen.uniform(low, high, size)

    def integers(self, low, high, size=None):
        self._count(size)
        return self._gen.integers(low, high, size)

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``."""
        self._count(k)
        return self._gen.choice(n, size=k, replace=False)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, path={self.path}, draws={self.draws})"


def as_rng(rng: RngState | int | None) -> RngState:
    if isinstance(rng, RngState):
        return rng
    return RngState(0 if rng is None else rng)
