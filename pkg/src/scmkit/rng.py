"""SplitMix64 generator with keyed stream derivation.

Pure integer arithmetic, so a given seed yields the same bits on every
platform. Child streams come from :func:`derive_seed`, which folds each key
into the parent seed through the SplitMix64 finalizer::

    s = seed
    for key in keys:
        s = mix64(s + (key + 1) * GOLDEN)      # mod 2**64

Doubles use the top 53 bits; normals use Box-Muller (cosine branch only, one
normal per pair of uniforms).
"""

from __future__ import annotations

import math

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    s = seed & MASK
    for k in keys:
        s = mix64(s + ((k + 1) * GOLDEN & MASK))
    return s


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        return mix64(self.state)

    def spawn(self, *keys: int) -> "SplitMix64":
        return SplitMix64(derive_seed(self.state, *keys))

    def uniform(self) -> float:
        """Uniform on [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_open(self) -> float:
        """Uniform on (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * (1.0 / (1 << 53))

    def normal(self) -> float:
        u1 = self.uniform_open()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)])

    def exponential(self) -> float:
        return -math.log(self.uniform_open())

    def dirichlet_flat(self, k: int) -> np.ndarray:
        e = np.array([self.exponential() for _ in range(k)])
        return e / e.sum()

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (no modulo bias)."""
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> list:
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out
