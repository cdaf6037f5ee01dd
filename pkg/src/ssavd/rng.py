"""Seeded random state with deterministic child streams.

Backed by numpy's PCG64 generator: identical seed plus identical call
sequence gives identical draws on every platform.  Child streams are
derived from the seed and integer keys, so prefetch or generation order
cannot change results.
"""

from __future__ import annotations

import numpy as np


class RngState:
    def __init__(self, seed, _keys=()):
        self.seed = int(seed)
        self._keys = tuple(int(k) for k in _keys)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, *self._keys]))
        )

    def child(self, *keys):
        """Independent stream derived from the seed and ``keys``."""
        return RngState(self.seed, self._keys + tuple(keys))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def coin(self, p=0.5):
        return bool(self._gen.uniform() < p)
