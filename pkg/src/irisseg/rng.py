"""Deterministic PRNG: SplitMix64.

All randomness in the package flows through this module so results are
bit-reproducible across platforms and numpy versions. The generator is
the standard SplitMix64 finalizer over a Weyl sequence with increment
GAMMA; uniform doubles take the top 53 bits.

Stream-splitting convention: derive_seed(seed, index) gives independent
per-item streams (augmentation images, network layers) from one run seed.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_DOUBLE_SCALE = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 output finalizer (bijective on 64-bit ints)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Child seed for item `index` of a run seeded with `seed`.

    Injective in index (GAMMA is odd), so distinct items get distinct
    streams for any run seed.
    """
    return mix64((seed + GAMMA * (index + 1)) & MASK64)


class Rng:
    """Sequential SplitMix64 stream."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & MASK64
        return mix64(self._state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * _DOUBLE_SCALE
        return lo + (hi - lo) * u

    def sign(self) -> int:
        """Equiprobable +1 / -1 from the low bit of one draw."""
        return 1 if self.next_u64() & 1 else -1

    def below(self, n: int) -> int:
        """Integer in [0, n). Modulo reduction; bias is negligible for n << 2^64."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n)."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def uniform_array(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Vectorized equivalent of n sequential uniform() calls.

        SplitMix64 state is a Weyl sequence, so the i-th draw depends only
        on state + (i+1)*GAMMA; that makes exact vectorization possible.
        """
        start = self._state
        idx = np.arange(1, n + 1, dtype=np.uint64)
        z = (np.uint64(start) + np.uint64(GAMMA) * idx)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        z = z ^ (z >> np.uint64(31))
        self._state = (start + GAMMA * n) & MASK64
        u = (z >> np.uint64(11)).astype(np.float64) * _DOUBLE_SCALE
        return lo + (hi - lo) * u
