"""SplitMix64 random stream; every weight init and data draw derives from it."""

import math
from typing import MutableSequence, Sequence, TypeVar

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

T = TypeVar("T")


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def derive_seed(seed: int, label: str) -> int:
    """Deterministically derive an independent 64-bit seed from (seed, label)."""
    return _mix((seed ^ _fnv1a64(label)) & MASK64)


class Rng:
    """SplitMix64 generator with a single 64-bit state."""

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    @classmethod
    def for_name(cls, seed: int, name: str) -> "Rng":
        """Substream keyed by a name, e.g. a parameter name or "sample/17"."""
        return cls(derive_seed(seed, name))

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix(self.state)

    def next_block(self, n: int) -> np.ndarray:
        """
        Draw n outputs at once; identical to n calls of next_u64.

        Returns:
            uint64 array of length n
        """
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA)
        z = steps + np.uint64(self.state)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        return z

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_array(self, n: int) -> np.ndarray:
        return (self.next_block(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def normal(self, shape: Sequence[int], std: float = 1.0) -> np.ndarray:
        """Gaussian draws via Box-Muller, float64."""
        n = int(np.prod(shape)) if len(shape) else 1
        pairs = (n + 1) // 2
        u = self.uniform_array(2 * pairs)
        u1 = 1.0 - u[:pairs]  # (0, 1]
        u2 = u[pairs:]
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([radius * np.cos(2.0 * math.pi * u2),
                            radius * np.sin(2.0 * math.pi * u2)])[:n]
        return (z * std).reshape(tuple(shape))

    def randint(self, low: int, high: int) -> int:
        """Integer in [low, high)."""
        if high <= low:
            raise ValueError(f"randint: empty range [{low}, {high})")
        return low + self.next_u64() % (high - low)

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("choice: empty sequence")
        return items[self.randint(0, len(items))]

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i + 1)
            items[i], items[j] = items[j], items[i]


def rng_next(r: Rng) -> int:
    """Advance r and return the next unsigned 64-bit output."""
    return r.next_u64()
