"""
Seeded random number streams.

Identical (seed, algorithm) pairs always produce identical streams; child
streams are derived by name so independent consumers never share state.
"""

import zlib

import numpy as np

from utils.errors import ConfigError

BIT_GENERATORS = {
    'pcg64': np.random.PCG64,
    'philox': np.random.Philox,
    'sfc64': np.random.SFC64,
    'mt19937': np.random.MT19937,
}


class SeededRng:
    """Deterministic random stream identified by a 64-bit seed and an algorithm id"""

    def __init__(self, seed: int, algorithm: str = 'pcg64', _entropy=None):
        if algorithm not in BIT_GENERATORS:
            raise ConfigError(f"Unknown RNG algorithm '{algorithm}'")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.algorithm = algorithm
        self._entropy = list(_entropy) if _entropy is not None else [self.seed]
        sequence = np.random.SeedSequence(self._entropy)
        self.generator = np.random.Generator(BIT_GENERATORS[algorithm](sequence))

    def spawn(self, name: str) -> 'SeededRng':
        """Derive an independent child stream keyed by name (independent of draw history)"""
        key = zlib.crc32(name.encode('utf-8'))
        return SeededRng(self.seed, self.algorithm, _entropy=self._entropy + [key])

    def normal(self, shape, precision: str = 'f64') -> np.ndarray:
        dtype = np.float32 if precision == 'f32' else np.float64
        return self.generator.standard_normal(shape, dtype=dtype)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def choice(self, options, size=None, replace=True):
        return self.generator.choice(options, size=size, replace=replace)

    def permutation(self, n):
        return self.generator.permutation(n)

    def random(self, size=None):
        return self.generator.random(size)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, algorithm='{self.algorithm}')"
