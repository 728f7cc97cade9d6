"""Deterministic digit streams for exact circle arithmetic.

The base map multiplies by 4 on the circle, i.e. shifts base-4 digit
expansions. Floating-point iteration of 4*omega mod 1 consumes two mantissa
bits per step and collapses onto a periodic orbit of the FLOAT map within ~26
steps, so orbits are represented by their digit streams instead: a splitmix64
generator emits 64-bit words, each read as 32 base-4 digits (most significant
first). Under Lebesgue measure the digits of omega are i.i.d. uniform on
{0,1,2,3}, so a fresh pseudorandom stream IS a Lebesgue sample of the circle,
and advancing the window by one digit IS the base map, exactly, for any
number of steps.

Streams are keyed by (master seed, label, index) through splitmix64-style
finalizer mixing, so per-sample results never depend on scheduling or worker
count.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

U64 = np.uint64
_NP_GOLDEN = U64(GOLDEN)
_NP_MIX1 = U64(MIX1)
_NP_MIX2 = U64(MIX2)
_TWO_NEG_53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer: bijective avalanche on 64-bit ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output word)."""
    state = (state + GOLDEN) & MASK64
    return state, mix64(state)


def derive_seed(master: int, label: int, index: int = 0) -> int:
    """Stream seed keyed by (master, label, index).

    Double finalizer mixing scatters the lattice of (label, index) pairs over
    the full 64-bit state space; overlap of two distinct streams within any
    realistic stream length is a birthday event at ~2^-40 or below.
    """
    s = mix64((master & MASK64) ^ mix64(label * GOLDEN + 1))
    return mix64(s ^ mix64(index * GOLDEN + 2))


def derive_seeds(master: int, label: int, n: int, start: int = 0) -> np.ndarray:
    """Vectorized derive_seed for indices start..start+n-1, as uint64."""
    idx = np.arange(start, start + n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        inner = _mix64_np(idx * _NP_GOLDEN + U64(2))
        s = U64(mix64((master & MASK64) ^ mix64(label * GOLDEN + 1)))
        return _mix64_np(s ^ inner)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> U64(30))) * _NP_MIX1
    z = (z ^ (z >> U64(27))) * _NP_MIX2
    return z ^ (z >> U64(31))


def splitmix64_next_np(state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch splitmix64 step on a uint64 array (state is not mutated)."""
    with np.errstate(over="ignore"):
        state = state + _NP_GOLDEN
        return state, _mix64_np(state)


class DigitStream:
    """Endless base-4 digit stream keyed by a 64-bit seed.

    Digits come from successive splitmix64 words, 32 digits per word, most
    significant 2-bit group first. Pure-Python reference implementation; the
    compiled and numpy kernels consume the identical sequence.
    """

    __slots__ = ("seed", "_state", "_word", "_left")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._state = self.seed
        self._word = 0
        self._left = 0

    def next_digit(self) -> int:
        if self._left == 0:
            self._state, self._word = splitmix64_next(self._state)
            self._left = 32
        d = (self._word >> 62) & 0x3
        self._word = (self._word << 2) & MASK64
        self._left -= 1
        return d

    @classmethod
    def resume(cls, state: int, word: int, left: int) -> "DigitStream":
        """Reconstruct a stream mid-word (generator state, partial word,
        digits left in it), so batched sample state can be converted into
        scalar form without losing the digit future."""
        ds = cls(state)
        ds._word = word & MASK64
        ds._left = left
        return ds

    def take(self, n: int) -> list[int]:
        return [self.next_digit() for _ in range(n)]


def word_to_digits(word: int) -> list[int]:
    """The 32 base-4 digits of a 64-bit word, most significant first."""
    return [(word >> (62 - 2 * i)) & 0x3 for i in range(32)]


def u64_to_unit(word: int) -> float:
    """Map a 64-bit word to [0,1) by its leading 53 bits.

    Truncation, not rounding: the result is exactly representable and
    strictly below 1 (rounding word * 2^-64 can land ON 1.0 for words
    within half an ulp of the top).
    """
    return ((word & MASK64) >> 11) * _TWO_NEG_53
