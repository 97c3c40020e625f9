"""Deterministic, platform-stable random number generation.

The generator hashes a 64-bit counter with the splitmix64 finalizer
(Steele et al.), so identical seeds give bit-identical streams on every
platform and the whole stream for a batch can be produced with vectorized
uint64 arithmetic. All randomness in the package flows through this class.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .tensor import DEFAULT_DTYPE, Tensor

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to uint64 input."""
    with np.errstate(over="ignore"):
        z = x.astype(np.uint64, copy=True)
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
    return z


class Rng:
    """Counter-based splitmix64 stream seeded by a u64."""

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int):
        self.seed = int(seed) & _U64_MASK
        self.counter = 0

    def spawn(self, tag: int) -> "Rng":
        """Independent child stream; equal (seed, tag) gives the same child."""
        salted = np.uint64((self.seed ^ 0xD1B54A32D192ED03) & _U64_MASK)
        with np.errstate(over="ignore"):
            child = _splitmix64(np.asarray([salted + _GOLDEN * np.uint64((int(tag) + 1) & _U64_MASK)], dtype=np.uint64))
        return Rng(int(child[0]))

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            keyed = np.uint64(self.seed) + _GOLDEN * idx
        return _splitmix64(keyed)

    def uniform(self, shape=()) -> np.ndarray:
        """i.i.d. samples in [0, 1) with 53-bit resolution."""
        shape = _norm_shape(shape)
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return u.reshape(shape)

    def normal(self, shape=()) -> np.ndarray:
        """i.i.d. standard normal samples via the Box-Muller transform."""
        shape = _norm_shape(shape)
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if n == 0:
            return np.zeros(shape)
        pairs = (n + 1) // 2
        u = self._raw(2 * pairs)
        u1 = 1.0 - (u[:pairs] >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)  # (0, 1]
        u2 = (u[pairs:] >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Uniform integers in [low, high) (rejection-free scaling; high > low)."""
        if high <= low:
            raise ContractError(f"empty integer range [{low}, {high})")
        shape = _norm_shape(shape)
        u = self.uniform(shape)
        return (low + np.floor(u * (high - low))).astype(np.int64)

    def choice(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), by partial Fisher-Yates."""
        if k > n:
            raise ContractError(f"cannot draw {k} distinct values from {n}")
        pool = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + int(self.integers(0, n - i))
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k].copy()

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        n = len(items)
        for i in range(n - 1):
            j = i + int(self.integers(0, n - i))
            items[i], items[j] = items[j], items[i]


def _norm_shape(shape) -> tuple:
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)


def sample_gaussian(rng: Rng, shape, dtype=DEFAULT_DTYPE) -> Tensor:
    """Tensor of i.i.d. N(0, 1) entries, deterministic given the rng state."""
    return Tensor(rng.normal(shape).astype(dtype))
