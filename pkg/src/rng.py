"""Deterministic random number generation.

The generator is xoshiro256** seeded through SplitMix64. It is implemented on
Python integers so the output sequence is identical on every platform; bulk
draws are handed to numpy once generated.
"""

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> Tuple[int, int]:
    """Advance a SplitMix64 state. Returns (new_state, output)."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


@dataclass
class RngState:
    """xoshiro256** stream identified by (seed, stream).

    Two states built from the same (seed, stream) pair produce the same output
    sequence. Different stream ids give independent substreams of one seed.
    """

    seed: int
    stream: int = 0
    _s: List[int] = field(default_factory=list, init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0 <= self.seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not 0 <= self.stream <= MASK64:
            raise ValueError(
                f"stream must be an unsigned 64-bit integer, got {self.stream}"
            )
        self.reset()

    def reset(self) -> None:
        """Rewind to the start of the (seed, stream) sequence."""
        _, stream_key = splitmix64(self.stream)
        sm = self.seed ^ stream_key
        state = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            state.append(out)
        if not any(state):
            state[0] = 1
        self._s = state

    def spawn(self, stream: int) -> "RngState":
        """Return a fresh generator on another substream of the same seed."""
        return RngState(self.seed, stream)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def raw(self, n: int) -> np.ndarray:
        """Draw n raw 64-bit outputs."""
        s0, s1, s2, s3 = self._s
        out = [0] * n
        for i in range(n):
            x = (s1 * 5) & MASK64
            out[i] = ((((x << 7) | (x >> 57)) & MASK64) * 9) & MASK64
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self._s = [s0, s1, s2, s3]
        return np.array(out, dtype=np.uint64)

    def uniform(self, size) -> np.ndarray:
        """Uniform doubles in [0, 1) with 53 random bits each."""
        shape = _as_shape(size)
        n = int(np.prod(shape)) if shape else 1
        bits = self.raw(n) >> np.uint64(11)
        return (bits.astype(np.float64) * (1.0 / 9007199254740992.0)).reshape(shape)

    def standard_normal(self, size) -> np.ndarray:
        """Standard normal draws (Box-Muller on consecutive uniform pairs)."""
        shape = _as_shape(size)
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
        angle = 2.0 * math.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = radius * np.cos(angle)
        z[:, 1] = radius * np.sin(angle)
        return z.reshape(-1)[:n].reshape(shape)

    def integers(self, high: int, size) -> np.ndarray:
        """Integers in [0, high) by scaling uniforms."""
        if high <= 0:
            raise ValueError(f"high must be positive, got {high}")
        idx = np.floor(self.uniform(size) * high).astype(np.int64)
        return np.minimum(idx, high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of range(n)."""
        return np.argsort(self.uniform(n), kind="stable")


def _as_shape(size) -> Tuple[int, ...]:
    if isinstance(size, (int, np.integer)):
        return (int(size),)
    return tuple(int(s) for s in size)
