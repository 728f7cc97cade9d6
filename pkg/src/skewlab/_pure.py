"""Numpy fallback for the hot kernels.

Function-for-function mirror of skewlab._kernels; backend.py picks
whichever is available. Streams advance vectorized across samples, one
map step at a time. Digit/window arithmetic is pure integer work and
matches the compiled backend bitwise; libm vs numpy transcendentals may
differ by an ulp, which chaotic orbits amplify, so cross-backend tests on
long forward orbits compare distributions rather than trajectories.
"""

from __future__ import annotations

import math

import numpy as np

from .rngstream import splitmix64_next_np
from .streams import StreamState

U64 = np.uint64
TWO_PI = 2.0 * math.pi
TWO_NEG_53 = 2.0**-53
_SH11 = np.uint64(11)

COMPILED = False


def _om(win: np.ndarray) -> np.ndarray:
    # leading 53 bits of the window: exact in float64 and strictly < 1
    return (win >> _SH11).astype(np.float64) * TWO_NEG_53


def _alpha(om: np.ndarray, amin: float, eps: float, x0: float) -> np.ndarray:
    a = amin + eps * (1.0 + np.sin(TWO_PI * (om - x0 - 0.25)))
    return np.clip(a, amin, amin + 2.0 * eps)


def _fibre(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    left = x <= 0.5
    xl = np.where(left, x, 0.0)
    return np.where(left, xl * (1.0 + (2.0 * xl) ** a), 2.0 * x - 1.0)


def _advance_digits(win, buf, nrem, sm):
    """One digit shift for every stream; refills buffers in place."""
    digit = buf >> U64(62)
    with np.errstate(over="ignore"):
        buf = buf << U64(2)
        win = (win << U64(2)) | digit
    nrem = nrem - 1
    refill = nrem == 0
    if refill.any():
        sm_r, w = splitmix64_next_np(sm[refill])
        sm[refill] = sm_r
        buf[refill] = w
        nrem[refill] = 32
    return win, buf, nrem, sm


def skew_advance(state: StreamState, curve, nsteps: int) -> None:
    """nsteps of the skew product, nothing recorded (burn-in)."""
    amin, eps, x0 = curve.alpha_min, curve.epsilon, curve.x0
    win, buf, nrem, sm, x = state.win, state.buf, state.nrem, state.sm, state.x
    for _ in range(nsteps):
        om = _om(win)
        x = _fibre(x, _alpha(om, amin, eps, x0))
        win, buf, nrem, sm = _advance_digits(win, buf, nrem, sm)
    state.win, state.buf, state.nrem, state.sm, state.x = win, buf, nrem, sm, x


def skew_orbit_chunk(state: StreamState, curve, out_om: np.ndarray, out_x: np.ndarray) -> None:
    """Record (omega, x) before each of out.shape[1] steps; state advances."""
    amin, eps, x0 = curve.alpha_min, curve.epsilon, curve.x0
    win, buf, nrem, sm, x = state.win, state.buf, state.nrem, state.sm, state.x
    nsteps = out_om.shape[1]
    for j in range(nsteps):
        om = _om(win)
        out_om[:, j] = om
        out_x[:, j] = x
        x = _fibre(x, _alpha(om, amin, eps, x0))
        win, buf, nrem, sm = _advance_digits(win, buf, nrem, sm)
    state.win, state.buf, state.nrem, state.sm, state.x = win, buf, nrem, sm, x


def base_chunk(state: StreamState, out_om: np.ndarray) -> None:
    """Record the base orbit only; x coordinates are left untouched."""
    win, buf, nrem, sm = state.win, state.buf, state.nrem, state.sm
    for j in range(out_om.shape[1]):
        out_om[:, j] = _om(win)
        win, buf, nrem, sm = _advance_digits(win, buf, nrem, sm)
    state.win, state.buf, state.nrem, state.sm = win, buf, nrem, sm


def steps_to_enter(state: StreamState, curve, cap: int = 10**7) -> np.ndarray:
    """Advance each stream until x > 1/2; returns the step counts."""
    amin, eps, x0 = curve.alpha_min, curve.epsilon, curve.x0
    m = state.n
    counts = np.zeros(m, dtype=np.int64)
    orig = np.nonzero(state.x <= 0.5)[0]
    win = state.win[orig]
    buf = state.buf[orig]
    nrem = state.nrem[orig]
    sm = state.sm[orig]
    x = state.x[orig]
    taken = np.zeros(orig.size, dtype=np.int64)
    while orig.size:
        om = _om(win)
        x = _fibre(x, _alpha(om, amin, eps, x0))
        win, buf, nrem, sm = _advance_digits(win, buf, nrem, sm)
        taken += 1
        landed = x > 0.5
        if landed.any():
            rows = np.nonzero(landed)[0]
            oi = orig[rows]
            counts[oi] = taken[rows]
            state.win[oi] = win[rows]
            state.buf[oi] = buf[rows]
            state.nrem[oi] = nrem[rows]
            state.sm[oi] = sm[rows]
            state.x[oi] = x[rows]
            keep = ~landed
            orig, win, buf, nrem, sm, x, taken = (
                orig[keep], win[keep], buf[keep], nrem[keep],
                sm[keep], x[keep], taken[keep],
            )
        if taken.size and taken[0] >= cap:
            raise RuntimeError(f"{orig.size} streams failed to reach Y in {cap} steps")
    return counts


def run_excursions(state: StreamState, curve, n_exc: int, cap: int = 10**8):
    """n_exc successive return times per stream.

    Streams must start in Y (run steps_to_enter first). Returns
    (phi, truncated): phi is (m, n_exc) int64, truncated flags any stream
    whose excursion hit the cap (recorded at the cap, orbit left mid-flight).
    """
    amin, eps, x0 = curve.alpha_min, curve.epsilon, curve.x0
    m = state.n
    if np.any(state.x <= 0.5):
        raise ValueError("run_excursions requires every stream to start in Y")
    phi = np.zeros((m, n_exc), dtype=np.int64)
    truncated = np.zeros(m, dtype=bool)
    orig = np.arange(m)
    win = state.win.copy()
    buf = state.buf.copy()
    nrem = state.nrem.copy()
    sm = state.sm.copy()
    x = state.x.copy()
    count = np.zeros(m, dtype=np.int64)
    steps = np.zeros(m, dtype=np.int64)
    while orig.size:
        om = _om(win)
        x = _fibre(x, _alpha(om, amin, eps, x0))
        win, buf, nrem, sm = _advance_digits(win, buf, nrem, sm)
        steps += 1
        landed = x > 0.5
        rec = landed | (steps >= cap)
        if rec.any():
            rows = np.nonzero(rec)[0]
            oi = orig[rows]
            phi[oi, count[rows]] = steps[rows]
            truncated[oi] |= ~landed[rows]
            count[rows] += 1
            steps[rows] = 0
        done = count >= n_exc
        if done.any():
            rows = np.nonzero(done)[0]
            oi = orig[rows]
            state.win[oi] = win[rows]
            state.buf[oi] = buf[rows]
            state.nrem[oi] = nrem[rows]
            state.sm[oi] = sm[rows]
            state.x[oi] = x[rows]
            keep = ~done
            orig, win, buf, nrem, sm, x, count, steps = (
                orig[keep], win[keep], buf[keep], nrem[keep],
                sm[keep], x[keep], count[keep], steps[keep],
            )
    return phi, truncated


def _left_inv_chain(y: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Left-branch inverse, Newton started at y.

    The branch x -> x(1+(2x)^a) is increasing and convex, so Newton from
    the right of the root (y is always right of it) descends monotonically;
    no bracketing needed on this path.
    """
    x = y.copy()
    for _ in range(80):
        t = (2.0 * x) ** a
        dx = (x * (1.0 + t) - y) / (1.0 + (a + 1.0) * t)
        x -= dx
        if np.all(np.abs(dx) <= 1e-15 * x):
            break
    return x


def pullback_milestones(state: StreamState, curve, ks: np.ndarray) -> np.ndarray:
    """Backward-recursion values at the requested depths, batched.

    ks: strictly increasing int64 depths, each >= 1. Runs the forward base
    orbit to depth ks[-1]-1 (omega windows advance; x untouched), then the
    inverse-branch pullback from 1/2, recording the value at each requested
    depth. Memory is O(m * ks[-1]); callers block streams accordingly.
    """
    amin, eps, x0 = curve.alpha_min, curve.epsilon, curve.x0
    ks = np.asarray(ks, dtype=np.int64)
    m = state.n
    nmax = int(ks[-1])
    win, buf, nrem, sm = state.win, state.buf, state.nrem, state.sm
    alphas = np.empty((m, nmax - 1), dtype=np.float64) if nmax > 1 else None
    for j in range(nmax - 1):
        om = _om(win)
        alphas[:, j] = _alpha(om, amin, eps, x0)
        win, buf, nrem, sm = _advance_digits(win, buf, nrem, sm)
    state.win, state.buf, state.nrem, state.sm = win, buf, nrem, sm
    out = np.empty((m, ks.size), dtype=np.float64)
    v = np.full(m, 0.5)
    pos = 0
    if ks[0] == 1:
        out[:, 0] = v
        pos = 1
    for i in range(1, nmax):
        v = _left_inv_chain(v, alphas[:, nmax - 1 - i])
        if pos < ks.size and ks[pos] == i + 1:
            out[:, pos] = v
            pos += 1
    return out


def fibre_apply(x: float, a: float) -> float:
    """Scalar fibre map on this backend's arithmetic (for agreement tests)."""
    return float(_fibre(np.asarray([x]), np.asarray([a]))[0])


def alpha_value(om: float, amin: float, eps: float, x0: float) -> float:
    return float(_alpha(np.asarray([om]), amin, eps, x0)[0])


def left_inverse_chain(y: float, a: float) -> float:
    return float(_left_inv_chain(np.asarray([y]), np.asarray([a]))[0])
