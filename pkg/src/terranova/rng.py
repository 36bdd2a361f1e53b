"""Deterministic random streams with tiny, serializable state.

Every source of randomness in the engine is a named `RandomStream` derived
from a 64-bit seed. Streams are independent (combat never perturbs map
generation), their state is a single u64 that round-trips through the
canonical state encoding, and all draws are integer arithmetic, so results
are identical across platforms and processes.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """SplitMix64 finalizer: diffuse a 64-bit value."""
    x = x & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return (x ^ (x >> 31)) & MASK64


def combine(*parts: int) -> int:
    """Fold several integers into one well-mixed 64-bit value."""
    acc = 0x8BADF00D5EEDC0DE
    for p in parts:
        acc = mix64((acc + GOLDEN + (p & MASK64)) & MASK64)
    return acc


def label_seed(seed: int, label: str) -> int:
    """Derive a substream seed from a master seed and a stream name."""
    h = 0xCBF29CE484222325
    for ch in label.encode("utf-8"):
        h = ((h ^ ch) * 0x100000001B3) & MASK64
    return combine(seed, h)


class RandomStream:
    """SplitMix64 sequence. State is one u64; each draw advances it once."""

    __slots__ = ("state",)

    def __init__(self, state: int) -> None:
        self.state = state & MASK64

    @classmethod
    def from_seed(cls, seed: int, label: str) -> "RandomStream":
        return cls(label_seed(seed, label))

    def clone(self) -> "RandomStream":
        return RandomStream(self.state)

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def randrange(self, n: int) -> int:
        """Uniform int in [0, n). Modulo bias is < n / 2**64, ignored."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return self.next_u64() % n

    def randint(self, a: int, b: int) -> int:
        """Uniform int in [a, b] inclusive."""
        return a + self.randrange(b - a + 1)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        """Fisher-Yates, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), order randomized."""
        idx = list(range(n))
        self.shuffle(idx)
        return idx[:k]

    def __eq__(self, other) -> bool:
        return isinstance(other, RandomStream) and self.state == other.state

    def __repr__(self) -> str:
        return f"RandomStream(0x{self.state:016x})"
