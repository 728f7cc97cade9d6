"""Base dynamics on the circle and the exponent curve alpha.

The base map is omega -> 4*omega mod 1, realized exactly as a base-4 digit
shift (see rngstream). The exponent curve is the canonical sine family

    alpha(omega) = alpha_min + epsilon * (1 + sin(2 pi (omega - x0 - 1/4))),

which has its unique minimum alpha_min at x0, maximum alpha_min + 2 epsilon
at the antipode, and curvature alpha''(x0) = 4 pi^2 epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rngstream import MASK64, DigitStream

TWO_PI = 2.0 * math.pi


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature misses its tolerance."""

    def __init__(self, achieved: float, requested: float):
        super().__init__(
            f"quadrature did not converge: achieved {achieved:.3e}, "
            f"requested {requested:.3e}"
        )
        self.achieved = achieved
        self.requested = requested


@dataclass(frozen=True)
class ParamCurve:
    """Exponent curve parameters.

    alpha_min and alpha_max = alpha_min + 2*epsilon must satisfy
    0 < alpha_min < alpha_max < 1 and alpha_max < 1.5*alpha_min
    (epsilon < alpha_min/4). Pass unsafe=True to skip the hypothesis
    checks (degenerate test curves, e.g. epsilon=0).
    """

    alpha_min: float
    epsilon: float
    x0: float = 0.0
    unsafe: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not self.unsafe:
            if not (0.0 < self.alpha_min < 1.0):
                raise ValueError(f"alpha_min must be in (0,1), got {self.alpha_min}")
            if self.epsilon <= 0.0:
                raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
            if self.alpha_max >= 1.0:
                raise ValueError(
                    f"alpha_max = alpha_min + 2*epsilon = {self.alpha_max} "
                    "must be < 1"
                )
            if self.alpha_max >= 1.5 * self.alpha_min:
                raise ValueError(
                    f"alpha_max = {self.alpha_max} must be < 1.5*alpha_min "
                    f"= {1.5 * self.alpha_min} (epsilon < alpha_min/4)"
                )
        else:
            if not (0.0 < self.alpha_min < 1.0):
                raise ValueError("alpha_min must be in (0,1) even when unsafe")
            if self.epsilon < 0.0:
                raise ValueError("epsilon must be >= 0")
        if not (0.0 <= self.x0 < 1.0):
            raise ValueError(f"x0 must be in [0,1), got {self.x0}")

    @property
    def alpha_max(self) -> float:
        return self.alpha_min + 2.0 * self.epsilon

    @property
    def second_deriv(self) -> float:
        """alpha''(x0) for the sine family."""
        return 4.0 * math.pi**2 * self.epsilon


def alpha_eval(curve: ParamCurve, omega):
    """alpha(omega); accepts scalars or numpy arrays of circle values."""
    s = np.sin(TWO_PI * (np.asarray(omega, dtype=float) - curve.x0 - 0.25))
    out = curve.alpha_min + curve.epsilon * (1.0 + s)
    # sin roundoff can poke a few ulp outside [min, max]; clip to the contract
    out = np.clip(out, curve.alpha_min, curve.alpha_max)
    return float(out) if np.isscalar(omega) or out.ndim == 0 else out


class OmegaState:
    """A circle point as a lazy base-4 digit expansion.

    Holds the next K digits explicitly (value window) plus a deterministic
    tail generator. advance() drops the leading digit: exactly the base map.
    Value extraction reads the leading digits truncated to float resolution
    (53 bits), so it is exact and strictly inside [0,1).
    """

    __slots__ = ("digits", "_tail", "K")

    def __init__(self, digits, tail: DigitStream, K: int = 32):
        self.K = int(K)
        self.digits = list(digits)
        self._tail = tail
        self._fill()

    def _fill(self):
        while len(self.digits) < self.K:
            self.digits.append(self._tail.next_digit())

    @property
    def value(self) -> float:
        acc = 0
        for d in self.digits[: self.K]:
            acc = (acc << 2) | d
        bits = 2 * self.K
        if bits > 53:
            # read only the leading 53 bits: exact in float64, strictly < 1
            # (rounding acc/2^bits can land *on* 1.0 for all-ones windows)
            return (acc >> (bits - 53)) * 2.0**-53
        return acc / float(1 << bits)

    def advance(self) -> "OmegaState":
        """Drop the leading digit (omega -> 4*omega mod 1). Returns self."""
        self.digits.pop(0)
        self._fill()
        return self

    def clone(self) -> "OmegaState":
        c = OmegaState.__new__(OmegaState)
        c.K = self.K
        c.digits = list(self.digits)
        c._tail = DigitStream(self._tail.seed)
        # replay consumed words so the clone's tail continues identically
        c._tail._state = self._tail._state
        c._tail._word = self._tail._word
        c._tail._left = self._tail._left
        return c

    def peek_digits(self, n: int) -> list[int]:
        while len(self.digits) < n:
            self.digits.append(self._tail.next_digit())
        return self.digits[:n]


def omega_from_seed(seed: int, K: int = 32) -> OmegaState:
    """Lebesgue sample of the circle keyed by seed (i.i.d. uniform digits)."""
    return OmegaState([], DigitStream(seed & MASK64), K=K)


def omega_from_digits(digits, tail_seed: int = 0, K: int = 32) -> OmegaState:
    """Circle point with a prescribed digit prefix and pseudorandom tail."""
    return OmegaState(list(digits), DigitStream(tail_seed & MASK64), K=K)


def omega_advance(state: OmegaState) -> OmegaState:
    return state.advance()


# --- Laplace moment -------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _laplace_quad(weps: float, order: int) -> float:
    """Integral of exp(-weps*(1-cos 2 pi u)) over u in [0,1].

    Composite Gauss-Legendre on dyadic panels shrinking toward u=0 (the
    integrand peak); the right edge of the innermost panel resolves the
    curvature scale 1/sqrt(weps).
    """
    depth = max(3, int(math.ceil(math.log2(math.pi * math.sqrt(weps + 1.0)))) + 2)
    depth = min(depth, 48)
    nodes, weights = _gl_nodes(order)
    edges = [0.0] + [2.0 ** (-j) for j in range(depth, 0, -1)]
    edges[-1] = 0.5  # [1/4, 1/2] is the outermost panel
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        u = mid + half * nodes
        total += half * float(np.sum(weights * np.exp(-weps * (1.0 - np.cos(TWO_PI * u)))))
    return 2.0 * total  # symmetry u <-> -u


def laplace_moment(curve: ParamCurve, w: float, abs_tol: float = 1e-10) -> float:
    """E(exp(-(alpha - alpha_min) w)) over Lebesgue omega.

    For the sine family the exponent is w*epsilon*(1 - cos 2 pi u) after
    centering at x0, so the moment is x0-independent. Two quadrature orders
    are compared to certify the tolerance.
    """
    if w < 0:
        raise ValueError("w must be >= 0")
    weps = w * curve.epsilon
    if weps == 0.0:
        return 1.0
    lo = _laplace_quad(weps, 24)
    hi = _laplace_quad(weps, 40)
    err = abs(hi - lo)
    if err > abs_tol:
        raise QuadratureError(err, abs_tol)
    return hi


def laplace_limit_constant(curve: ParamCurve) -> float:
    """lim_{w->inf} sqrt(w) * laplace_moment(curve, w).

    Two-sided Laplace evaluation at the quadratic minimum: the sublevel set
    {alpha - alpha_min < b} has measure ~ 2*sqrt(2b/alpha''), giving
    sqrt(2 pi / alpha''(x0)). (A one-sided evaluation would halve the
    moment; for the sine family the exact moment e^{-z} I0(z), z = w*eps,
    settles the normalization.)
    """
    return math.sqrt(2.0 * math.pi / curve.second_deriv)


