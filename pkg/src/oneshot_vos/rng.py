"""Counter-based SplitMix64 generator.

Every random quantity in the package is drawn from here so that runs are
reproducible bit-for-bit and portable to other languages: value ``i`` of a
stream seeded with ``s`` is ``mix64(s + (i + 1) * GOLDEN)``.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *path: int) -> int:
    """Child seed for a named sub-stream, e.g. ``derive_seed(s, SEQ, 3)``."""
    h = seed & MASK64
    for key in path:
        h = mix64(h ^ mix64(key * GOLDEN + 0x632BE59BD9B4E019))
    return h


class SplitMix64:
    """Sequential view over the counter-based stream."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0

    def u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * np.uint64(GOLDEN)
            return _mix64_array(z)

    def next_u64(self) -> int:
        return int(self.u64(1)[0])

    def uniform(self, n: int | tuple = 1, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        shape = (n,) if isinstance(n, int) else tuple(n)
        count = int(np.prod(shape))
        u = (self.u64(count) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return (low + (high - low) * u).reshape(shape)

    def random(self) -> float:
        return float(self.uniform(1)[0])

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in ``[low, high)``."""
        if high <= low:
            raise ValueError("empty integer range")
        return low + int(self.u64(1)[0] % np.uint64(high - low))

    def normal(self, n: int | tuple = 1) -> np.ndarray:
        shape = (n,) if isinstance(n, int) else tuple(n)
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[:pairs]  # (0, 1], keeps log finite
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u[pairs:]
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return z[:count].reshape(shape)

    def choice(self, seq):
        return seq[self.integers(0, len(seq))]

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of ``range(n)``."""
        out = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(0, i + 1)
            out[i], out[j] = out[j], out[i]
        return out
