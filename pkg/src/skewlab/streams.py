"""Batched sample state shared by the compiled and numpy backends.

A StreamState holds m independent skew-product samples. The circle
coordinate lives in digit-stream form: `win` is the 64-bit window holding
the next 32 base-4 digits of omega (read as a float via its leading 53
bits), `buf`/`nrem` hold upcoming digits, and `sm` is the splitmix64 state
that extends the expansion forever. Advancing the window by one digit is
the base map, exactly.

Initialization order per seed is frozen (backends and tests rely on it):
word 1 -> the x coordinate ((w >> 11) * 2^-53), word 2 -> the window,
word 3 -> the digit buffer.
"""

from __future__ import annotations

import numpy as np

from .rngstream import DigitStream, splitmix64_next_np, word_to_digits

U64 = np.uint64


class StreamState:
    """m parallel (omega, x) samples in digit-stream form."""

    __slots__ = ("win", "buf", "nrem", "sm", "x")

    def __init__(self, win, buf, nrem, sm, x):
        self.win = win
        self.buf = buf
        self.nrem = nrem
        self.sm = sm
        self.x = x

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def omega_values(self) -> np.ndarray:
        # leading 53 bits of each window: exact in float64, strictly < 1
        return (self.win >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def copy(self) -> "StreamState":
        return StreamState(
            self.win.copy(), self.buf.copy(), self.nrem.copy(),
            self.sm.copy(), self.x.copy(),
        )

    def select(self, idx) -> "StreamState":
        """Gather a sub-ensemble (copies, original untouched)."""
        return StreamState(
            self.win[idx].copy(), self.buf[idx].copy(), self.nrem[idx].copy(),
            self.sm[idx].copy(), self.x[idx].copy(),
        )

    def scatter_from(self, other: "StreamState", idx):
        """Write back a sub-ensemble produced by select(idx)."""
        self.win[idx] = other.win
        self.buf[idx] = other.buf
        self.nrem[idx] = other.nrem
        self.sm[idx] = other.sm
        self.x[idx] = other.x


def stream_init(seeds) -> StreamState:
    """Lebesgue-product sample of (omega, x) per seed."""
    seeds = np.ascontiguousarray(seeds, dtype=np.uint64)
    sm, wx = splitmix64_next_np(seeds)
    x = (wx >> U64(11)).astype(np.float64) * 2.0**-53
    sm, w1 = splitmix64_next_np(sm)
    sm, w2 = splitmix64_next_np(sm)
    nrem = np.full(seeds.shape, 32, dtype=np.int64)
    return StreamState(
        np.ascontiguousarray(w1), np.ascontiguousarray(w2), nrem,
        np.ascontiguousarray(sm), x,
    )


def stream_single(seed: int) -> StreamState:
    return stream_init(np.array([seed], dtype=np.uint64))


def point_from_stream(state: StreamState, i: int = 0):
    """Convert one stream of a batch into scalar (OmegaState, x) form.

    The window digits plus the resumed buffer/generator reproduce the
    identical digit future, so the scalar point continues the exact same
    orbit the batched kernels would have produced.
    """
    from .circle import OmegaState
    from .fibre import SkewPoint

    tail = DigitStream.resume(
        int(state.sm[i]), int(state.buf[i]), int(state.nrem[i]))
    om = OmegaState(word_to_digits(int(state.win[i])), tail, K=32)
    return SkewPoint(om, float(state.x[i]))
