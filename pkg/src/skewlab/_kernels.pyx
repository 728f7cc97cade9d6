# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for stream advance, orbit recording, excursion counting,
and the inverse-branch pullback. Mirrors skewlab._pure function-for-function;
integer digit arithmetic agrees bitwise, transcendentals to libm accuracy.
Heavy loops run without the GIL so thread pools scale."""

from libc.math cimport sin, pow, fabs, ldexp
from libc.stdint cimport uint64_t, int64_t

import numpy as np

COMPILED = True

cdef double TWO_PI = 6.283185307179586
# leading 53 bits of a window: exact in float64 and strictly < 1
cdef double TWO_NEG_53 = ldexp(1.0, -53)
cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double alpha_at(double om, double amin, double eps, double x0) noexcept nogil:
    cdef double a = amin + eps * (1.0 + sin(TWO_PI * (om - x0 - 0.25)))
    cdef double hi = amin + 2.0 * eps
    if a < amin:
        a = amin
    if a > hi:
        a = hi
    return a


cdef inline double fibre_c(double x, double a) noexcept nogil:
    if x <= 0.5:
        return x * (1.0 + pow(2.0 * x, a))
    return 2.0 * x - 1.0


cdef inline double left_inv_newton(double y, double a) noexcept nogil:
    # increasing convex branch: Newton from y descends monotonically to the root
    cdef double x = y, t, dx
    cdef int it
    for it in range(80):
        t = pow(2.0 * x, a)
        dx = (x * (1.0 + t) - y) / (1.0 + (a + 1.0) * t)
        x -= dx
        if fabs(dx) <= 1e-15 * x:
            break
    return x


def skew_advance(state, curve, Py_ssize_t nsteps):
    """nsteps of the skew product, nothing recorded (burn-in)."""
    cdef uint64_t[::1] win = state.win
    cdef uint64_t[::1] buf = state.buf
    cdef int64_t[::1] nrem = state.nrem
    cdef uint64_t[::1] sm = state.sm
    cdef double[::1] x = state.x
    cdef double amin = curve.alpha_min
    cdef double eps = curve.epsilon
    cdef double x0 = curve.x0
    cdef Py_ssize_t m = x.shape[0], i, j
    cdef uint64_t w, b, s
    cdef int64_t r
    cdef double xx
    with nogil:
        for i in range(m):
            w = win[i]; b = buf[i]; s = sm[i]; r = nrem[i]; xx = x[i]
            for j in range(nsteps):
                xx = fibre_c(xx, alpha_at(<double>(w >> 11) * TWO_NEG_53, amin, eps, x0))
                w = (w << 2) | (b >> 62)
                b = b << 2
                r -= 1
                if r == 0:
                    s = s + GOLDEN
                    b = mix64(s)
                    r = 32
            win[i] = w; buf[i] = b; sm[i] = s; nrem[i] = r; x[i] = xx


def skew_orbit_chunk(state, curve, double[:, ::1] out_om, double[:, ::1] out_x):
    """Record (omega, x) before each of out.shape[1] steps; state advances."""
    cdef uint64_t[::1] win = state.win
    cdef uint64_t[::1] buf = state.buf
    cdef int64_t[::1] nrem = state.nrem
    cdef uint64_t[::1] sm = state.sm
    cdef double[::1] x = state.x
    cdef double amin = curve.alpha_min
    cdef double eps = curve.epsilon
    cdef double x0 = curve.x0
    cdef Py_ssize_t m = x.shape[0], nsteps = out_om.shape[1], i, j
    cdef uint64_t w, b, s
    cdef int64_t r
    cdef double xx, om
    with nogil:
        for i in range(m):
            w = win[i]; b = buf[i]; s = sm[i]; r = nrem[i]; xx = x[i]
            for j in range(nsteps):
                om = <double>(w >> 11) * TWO_NEG_53
                out_om[i, j] = om
                out_x[i, j] = xx
                xx = fibre_c(xx, alpha_at(om, amin, eps, x0))
                w = (w << 2) | (b >> 62)
                b = b << 2
                r -= 1
                if r == 0:
                    s = s + GOLDEN
                    b = mix64(s)
                    r = 32
            win[i] = w; buf[i] = b; sm[i] = s; nrem[i] = r; x[i] = xx


def base_chunk(state, double[:, ::1] out_om):
    """Record the base orbit only; x coordinates are left untouched."""
    cdef uint64_t[::1] win = state.win
    cdef uint64_t[::1] buf = state.buf
    cdef int64_t[::1] nrem = state.nrem
    cdef uint64_t[::1] sm = state.sm
    cdef Py_ssize_t m = win.shape[0], nsteps = out_om.shape[1], i, j
    cdef uint64_t w, b, s
    cdef int64_t r
    with nogil:
        for i in range(m):
            w = win[i]; b = buf[i]; s = sm[i]; r = nrem[i]
            for j in range(nsteps):
                out_om[i, j] = <double>(w >> 11) * TWO_NEG_53
                w = (w << 2) | (b >> 62)
                b = b << 2
                r -= 1
                if r == 0:
                    s = s + GOLDEN
                    b = mix64(s)
                    r = 32
            win[i] = w; buf[i] = b; sm[i] = s; nrem[i] = r


def steps_to_enter(state, curve, int64_t cap=10000000):
    """Advance each stream until x > 1/2; returns the step counts."""
    cdef uint64_t[::1] win = state.win
    cdef uint64_t[::1] buf = state.buf
    cdef int64_t[::1] nrem = state.nrem
    cdef uint64_t[::1] sm = state.sm
    cdef double[::1] x = state.x
    cdef double amin = curve.alpha_min
    cdef double eps = curve.epsilon
    cdef double x0 = curve.x0
    cdef Py_ssize_t m = x.shape[0], i
    counts_arr = np.zeros(m, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef uint64_t w, b, s
    cdef int64_t r, k
    cdef double xx
    cdef bint stuck = 0
    with nogil:
        for i in range(m):
            w = win[i]; b = buf[i]; s = sm[i]; r = nrem[i]; xx = x[i]
            k = 0
            while xx <= 0.5:
                xx = fibre_c(xx, alpha_at(<double>(w >> 11) * TWO_NEG_53, amin, eps, x0))
                w = (w << 2) | (b >> 62)
                b = b << 2
                r -= 1
                if r == 0:
                    s = s + GOLDEN
                    b = mix64(s)
                    r = 32
                k += 1
                if k >= cap:
                    stuck = 1
                    break
            win[i] = w; buf[i] = b; sm[i] = s; nrem[i] = r; x[i] = xx
            counts[i] = k
            if stuck:
                break
    if stuck:
        raise RuntimeError(f"a stream failed to reach Y in {cap} steps")
    return counts_arr


def run_excursions(state, curve, Py_ssize_t n_exc, int64_t cap=100000000):
    """n_exc successive return times per stream; streams must start in Y."""
    if np.any(np.asarray(state.x) <= 0.5):
        raise ValueError("run_excursions requires every stream to start in Y")
    cdef uint64_t[::1] win = state.win
    cdef uint64_t[::1] buf = state.buf
    cdef int64_t[::1] nrem = state.nrem
    cdef uint64_t[::1] sm = state.sm
    cdef double[::1] x = state.x
    cdef double amin = curve.alpha_min
    cdef double eps = curve.epsilon
    cdef double x0 = curve.x0
    cdef Py_ssize_t m = x.shape[0], i, e
    phi_arr = np.zeros((m, n_exc), dtype=np.int64)
    trunc_arr = np.zeros(m, dtype=np.uint8)
    cdef int64_t[:, ::1] phi = phi_arr
    cdef unsigned char[::1] trunc = trunc_arr
    cdef uint64_t w, b, s
    cdef int64_t r, steps
    cdef double xx
    with nogil:
        for i in range(m):
            w = win[i]; b = buf[i]; s = sm[i]; r = nrem[i]; xx = x[i]
            for e in range(n_exc):
                steps = 0
                while True:
                    xx = fibre_c(xx, alpha_at(<double>(w >> 11) * TWO_NEG_53, amin, eps, x0))
                    w = (w << 2) | (b >> 62)
                    b = b << 2
                    r -= 1
                    if r == 0:
                        s = s + GOLDEN
                        b = mix64(s)
                        r = 32
                    steps += 1
                    if xx > 0.5:
                        break
                    if steps >= cap:
                        trunc[i] = 1
                        break
                phi[i, e] = steps
            win[i] = w; buf[i] = b; sm[i] = s; nrem[i] = r; x[i] = xx
    return phi_arr, trunc_arr.astype(bool)


def pullback_milestones(state, curve, ks_in):
    """Backward-recursion values at the requested depths, batched.

    Same contract as the numpy twin: ks strictly increasing, >= 1; omega
    windows advance ks[-1]-1 steps, x untouched.
    """
    ks = np.ascontiguousarray(ks_in, dtype=np.int64)
    cdef int64_t[::1] kv = ks
    cdef Py_ssize_t nk = kv.shape[0]
    cdef int64_t nmax = kv[nk - 1]
    cdef uint64_t[::1] win = state.win
    cdef uint64_t[::1] buf = state.buf
    cdef int64_t[::1] nrem = state.nrem
    cdef uint64_t[::1] sm = state.sm
    cdef double amin = curve.alpha_min
    cdef double eps = curve.epsilon
    cdef double x0 = curve.x0
    cdef Py_ssize_t m = win.shape[0], i, pos
    cdef int64_t j
    out_arr = np.empty((m, nk), dtype=np.float64)
    ab_arr = np.empty(max(nmax - 1, 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] ab = ab_arr
    cdef uint64_t w, b, s
    cdef int64_t r
    cdef double v
    with nogil:
        for i in range(m):
            w = win[i]; b = buf[i]; s = sm[i]; r = nrem[i]
            for j in range(nmax - 1):
                ab[j] = alpha_at(<double>(w >> 11) * TWO_NEG_53, amin, eps, x0)
                w = (w << 2) | (b >> 62)
                b = b << 2
                r -= 1
                if r == 0:
                    s = s + GOLDEN
                    b = mix64(s)
                    r = 32
            win[i] = w; buf[i] = b; sm[i] = s; nrem[i] = r
            v = 0.5
            pos = 0
            if kv[0] == 1:
                out[i, 0] = v
                pos = 1
            for j in range(1, nmax):
                v = left_inv_newton(v, ab[nmax - 1 - j])
                if pos < nk and kv[pos] == j + 1:
                    out[i, pos] = v
                    pos += 1
    return out_arr


def fibre_apply(double x, double a):
    """Scalar fibre map on this backend's arithmetic (for agreement tests)."""
    return fibre_c(x, a)


def alpha_value(double om, double amin, double eps, double x0):
    return alpha_at(om, amin, eps, x0)


def left_inverse_chain(double y, double a):
    return left_inv_newton(y, a)
