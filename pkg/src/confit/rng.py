"""Portable deterministic randomness and hashing.

Everything that needs reproducible randomness (splits, pair sampling,
weight init, shuffles) goes through SplitMix64 so that identical seeds
produce identical results on every platform. FNV-1a 64 is the shared
byte-hashing primitive, used both for feature bucketing and for deriving
independent sub-seeds from a run seed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string."""
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def derive_seed(base: int, *parts: int | str) -> int:
    """Derive an independent 64-bit sub-seed from a base seed and a label path.

    Each part is folded into an FNV-1a hash: ints as 8 little-endian bytes,
    strings as UTF-8 followed by a NUL separator.
    """
    h = fnv1a64((base & _MASK64).to_bytes(8, "little"))
    for part in parts:
        if isinstance(part, int):
            chunk = (part & _MASK64).to_bytes(8, "little")
        else:
            chunk = part.encode("utf-8") + b"\x00"
        for b in chunk:
            h ^= b
            h = (h * FNV_PRIME) & _MASK64
    return h


class SplitMix64:
    """SplitMix64 pseudo-random generator (64-bit state, golden-gamma increment)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def bounded(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError(f"bounded() requires n >= 1, got {n}")
        threshold = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < threshold:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle (descending index order)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]

    def shuffled(self, items: Sequence) -> list:
        out = list(items)
        self.shuffle(out)
        return out


def splitmix64_array(seed: int, n: int) -> np.ndarray:
    """First n outputs of SplitMix64(seed) as a uint64 array, vectorized.

    The state after i steps is seed + i*gamma (mod 2^64), so all outputs
    can be mixed in parallel. Matches SplitMix64.next_u64 call-for-call.
    """
    states = (np.uint64(seed) + np.uint64(_GAMMA) * np.arange(1, n + 1, dtype=np.uint64))
    z = states
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def uniform_array(seed: int, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """First n uniforms in [low, high) from SplitMix64(seed), vectorized."""
    u01 = (splitmix64_array(seed, n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return low + u01 * (high - low)
