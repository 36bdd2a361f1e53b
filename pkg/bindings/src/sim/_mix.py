"""The random-baseline index derivation, reproduced bit-for-bit from the
engine's documented contract: SplitMix64 folding of
(tag, seed, slot, episode, step_index, sub-space index) modulo the
sub-space size. Digest parity with native runs is what pins the two
implementations together.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
RANDOM_POLICY_TAG = 0x52506F6C


def mix64(x: int) -> int:
    x = x & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return (x ^ (x >> 31)) & MASK64


def combine(*parts: int) -> int:
    acc = 0x8BADF00D5EEDC0DE
    for p in parts:
        acc = mix64((acc + GOLDEN + (p & MASK64)) & MASK64)
    return acc


def random_flat_action(seed: int, slot: int, episode: int, step_index: int,
                       sizes: list[int]) -> list[int]:
    return [combine(RANDOM_POLICY_TAG, seed, slot, episode, step_index, k) % size
            for k, size in enumerate(sizes)]
