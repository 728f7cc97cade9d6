"""Fibre maps on [0,1], the skew product step, and orbit accumulators.

T_alpha(x) = x(1 + (2x)^alpha) on [0, 1/2], 2x - 1 on (1/2, 1]. The left
branch is closed at 1/2 so T_alpha(1/2) = 1. x = 0 is neutral (derivative 1),
everything else expands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circle import OmegaState, ParamCurve, alpha_eval


def lsv_map(x: float, alpha: float) -> float:
    """One fibre step. Left branch closed: lsv_map(0.5, a) == 1.0."""
    if x <= 0.5:
        return x * (1.0 + (2.0 * x) ** alpha)
    return 2.0 * x - 1.0


def lsv_deriv(x: float, alpha: float) -> float:
    """d/dx of the fibre map; 1 + (alpha+1)(2x)^alpha left, 2 right."""
    if x <= 0.5:
        return 1.0 + (alpha + 1.0) * (2.0 * x) ** alpha
    return 2.0


def lsv_map_np(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Vectorized fibre step (arrays broadcast)."""
    left = x <= 0.5
    out = 2.0 * x - 1.0
    xl = np.where(left, x, 0.0)
    out = np.where(left, xl * (1.0 + (2.0 * xl) ** alpha), out)
    return out


def lsv_deriv_np(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    left = x <= 0.5
    return np.where(left, 1.0 + (alpha + 1.0) * (2.0 * x) ** alpha, 2.0)


def lsv_left_inverse(y: float, alpha: float, rel_tol: float = 1e-14) -> float:
    """The unique x in [0, 1/2] with x(1+(2x)^alpha) = y.

    Safeguarded Newton: a step leaving the current bracket falls back to
    bisection, so termination never depends on the degenerating derivative
    near 0. Residual after polish is <= 1e-12 in map-back units.
    """
    if y <= 0.0 or y > 1.0:
        raise ValueError(f"left inverse needs 0 < y <= 1, got {y}")
    if y == 1.0:
        return 0.5
    # x <= y <= x(1+(2x)^alpha) <= 2x gives the bracket
    lo = 0.5 * y
    hi = min(y, 0.5)
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = x * (1.0 + (2.0 * x) ** alpha) - y
        if fx > 0.0:
            hi = x
        else:
            lo = x
        dfx = 1.0 + (alpha + 1.0) * (2.0 * x) ** alpha
        step = fx / dfx
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= rel_tol * xn:
            x = xn
            break
        x = xn
    return x


def lsv_left_inverse_np(y: np.ndarray, alpha: np.ndarray, rel_tol: float = 1e-14) -> np.ndarray:
    """Vectorized left-branch inverse, same safeguards as the scalar path."""
    y = np.asarray(y, dtype=float)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), y.shape).copy()
    if np.any((y <= 0.0) | (y > 1.0)):
        raise ValueError("left inverse needs 0 < y <= 1")
    lo = 0.5 * y
    hi = np.minimum(y, 0.5)
    x = 0.5 * (lo + hi)
    active = np.ones(y.shape, dtype=bool)
    for _ in range(200):
        if not active.any():
            break
        t = (2.0 * x) ** alpha
        fx = x * (1.0 + t) - y
        pos = fx > 0.0
        hi = np.where(active & pos, x, hi)
        lo = np.where(active & ~pos, x, lo)
        xn = x - fx / (1.0 + (alpha + 1.0) * t)
        bad = (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= rel_tol * xn
        x = np.where(active, xn, x)
        active &= ~done
    out = np.where(y == 1.0, 0.5, x)
    return out


@dataclass
class SkewPoint:
    """A point (omega, x) of the product space."""

    omega: OmegaState
    x: float

    def in_y(self) -> bool:
        return self.x > 0.5


def skew_step(p: SkewPoint, curve: ParamCurve) -> SkewPoint:
    """One step of the skew product, in place on the omega state."""
    a = alpha_eval(curve, p.omega.value)
    p.x = lsv_map(p.x, a)
    p.omega.advance()
    return p


class OrbitAccumulator:
    """Birkhoff sum, running max of |partial sums|, and time spent in Y."""

    __slots__ = ("n", "total", "max_abs", "visits_y")

    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.max_abs = 0.0
        self.visits_y = 0

    def update(self, value: float, in_y: bool):
        self.n += 1
        self.total += value
        if abs(self.total) > self.max_abs:
            self.max_abs = abs(self.total)
        if in_y:
            self.visits_y += 1


def iterate_orbit(p: SkewPoint, curve: ParamCurve, n: int, f=None) -> OrbitAccumulator:
    """Run n skew-product steps, accumulating f along the way.

    f is called as f(omega_value, x) on the point *before* each step; the
    time-in-Y counter likewise counts pre-step positions, so the result
    describes the orbit segment p, Tp, ..., T^{n-1}p.
    """
    acc = OrbitAccumulator()
    for _ in range(n):
        val = f(p.omega.value, p.x) if f is not None else 0.0
        acc.update(val, p.x > 0.5)
        skew_step(p, curve)
    return acc
