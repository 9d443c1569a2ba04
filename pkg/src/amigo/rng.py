"""Deterministic, platform-independent pseudorandom generator.

Episode sampling, noise placement, and baseline-agent tie breaking all go
through this module so that runs reproduce bit-for-bit across platforms and
across independent reimplementations.  The core generator is SplitMix64
(Steele, Lea & Flood 2014): a 64-bit state advanced by a fixed odd constant
and finalized with two xor-shift multiplies.  Bounded draws use rejection
sampling, so they are unbiased for every bound.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

T = TypeVar("T")


class SplitMix64:
    """SplitMix64 stream seeded with a 64-bit value."""

    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % bound)
        while True:
            draw = self.next_u64()
            if draw < limit:
                return draw % bound

    def chance(self, numerator: int, denominator: int) -> bool:
        return self.below(denominator) < numerator

    def choice(self, seq: Sequence[T]) -> T:
        if not seq:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.below(len(seq))]

    def sample(self, seq: Sequence[T], k: int) -> list[T]:
        """k items without replacement, order given by a partial Fisher-Yates shuffle."""
        if k < 0 or k > len(seq):
            raise ValueError(f"cannot sample {k} items from {len(seq)}")
        pool = list(seq)
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, items: list[T]) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(base: int, *salts: int | str) -> int:
    """Stable 64-bit sub-seed from a base seed and arbitrary salts.

    String salts are folded in through SHA-256 so the result does not depend
    on the platform hash seed.
    """
    h = hashlib.sha256()
    h.update((base & _MASK64).to_bytes(8, "big"))
    for salt in salts:
        if isinstance(salt, int):
            h.update(b"i")
            h.update((salt & _MASK64).to_bytes(8, "big"))
        else:
            h.update(b"s")
            h.update(salt.encode("utf-8"))
            h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "big")
