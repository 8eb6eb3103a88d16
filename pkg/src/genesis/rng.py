"""Counter-based deterministic randomness (splitmix64).

Every random decision in the pipeline flows from a (master_seed,
sample_index, transform_tag) stream key, so any sample can be regenerated
bit-exactly in isolation, regardless of worker count or call order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

MASK64 = (1 << 64) - 1

# splitmix64 constants (Steele, Lea & Flood's published generator)
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

# Stream tags: one sub-stream per transform family, per sample.
TAG_SCHEME = 0
TAG_CROP = 1
TAG_NONLINEAR = 2
TAG_SHUFFLE = 3
TAG_PAINT = 4
# Plumbing streams outside the transform-record namespace: synthetic source
# volumes, model init, batch sampling, probe set construction.
TAG_PHANTOM = 5
TAG_MODEL = 6
TAG_TRAIN = 7
TAG_PROBE = 8

TAG_NAMES = {
    TAG_SCHEME: "scheme",
    TAG_CROP: "crop",
    TAG_NONLINEAR: "nonlinear",
    TAG_SHUFFLE: "shuffle",
    TAG_PAINT: "paint",
}
TAG_VALUES = {name: tag for tag, name in TAG_NAMES.items()}


def next_u64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state by one step; return (new_state, output)."""
    state = (state + GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return state, z ^ (z >> 31)


@dataclass(frozen=True)
class StreamKey:
    """Identifies one independent random stream.

    Serialized layout (manifest + cross-language contract): 17 bytes,
    little-endian — master_seed u64, sample_index u64, transform_tag u8.
    """

    master_seed: int
    sample_index: int
    transform_tag: int

    def to_bytes(self) -> bytes:
        return (
            (self.master_seed & MASK64).to_bytes(8, "little")
            + (self.sample_index & MASK64).to_bytes(8, "little")
            + bytes([self.transform_tag & 0xFF])
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "StreamKey":
        if len(raw) != 17:
            raise ArgumentError(f"stream key must be 17 bytes, got {len(raw)}")
        return cls(
            int.from_bytes(raw[0:8], "little"),
            int.from_bytes(raw[8:16], "little"),
            raw[16],
        )


def derive_stream(key: StreamKey) -> int:
    """Derive an initial splitmix64 state from a stream key.

    Two splitmix64 scrambles over the key fields: the first consumes the
    master seed, the second consumes its output xor the sample index; the
    tag is folded in via a multiply that spreads its 8 bits over the word.
    Each stage is injective per field, so distinct keys collide only with
    negligible probability.
    """
    _, h1 = next_u64(key.master_seed & MASK64)
    _, h2 = next_u64(h1 ^ (key.sample_index & MASK64))
    return h2 ^ (((key.transform_tag & 0xFF) * GAMMA) & MASK64)


class Rng:
    """splitmix64 stream; a plain value, cheap to copy, never shared."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & MASK64

    @classmethod
    def from_key(cls, key: StreamKey) -> "Rng":
        return cls(derive_stream(key))

    def next_u64(self) -> int:
        self.state, out = next_u64(self.state)
        return out

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform f64 in [lo, hi); returns lo when lo == hi."""
        if lo > hi:
            raise ArgumentError(f"uniform: lo {lo} > hi {hi}")
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)

    def uniform_int(self, lo: int, hi_inclusive: int) -> int:
        """Uniform integer in [lo, hi_inclusive], exactly unbiased.

        Lemire-style bounded rejection; a plain modulo of the 64-bit draw
        would bias small residue classes.
        """
        if lo > hi_inclusive:
            raise ArgumentError(f"uniform_int: lo {lo} > hi {hi_inclusive}")
        n = hi_inclusive - lo + 1
        m = self.next_u64() * n
        low = m & MASK64
        if low < n:
            threshold = (1 << 64) % n
            while low < threshold:
                m = self.next_u64() * n
                low = m & MASK64
        return lo + (m >> 64)

    def chance(self, p: float) -> bool:
        """True with probability p."""
        return self.uniform(0.0, 1.0) < p

    def shuffle_indices(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n)."""
        if n < 0:
            raise ArgumentError(f"shuffle_indices: n {n} < 0")
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.uniform_int(0, i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def uniform_array(self, n: int, lo: float, hi: float) -> np.ndarray:
        """n uniform draws, bit-identical to n sequential uniform() calls.

        splitmix64 advances by a constant, so outputs k=1..n from state s
        are mix(s + k*GAMMA); that maps onto vectorized uint64 ops.
        """
        if lo > hi:
            raise ArgumentError(f"uniform_array: lo {lo} > hi {hi}")
        k = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self.state) + k * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GAMMA) & MASK64
        return lo + (hi - lo) * ((z >> np.uint64(11)).astype(np.float64) * 2.0**-53)

    def copy(self) -> "Rng":
        return Rng(self.state)


def stream(master_seed: int, sample_index: int, tag: int) -> Rng:
    """Convenience: Rng for (master_seed, sample_index, transform_tag)."""
    return Rng.from_key(StreamKey(master_seed, sample_index, tag))
