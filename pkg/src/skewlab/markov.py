"""Return-time combinatorics for the region Y = S^1 x (1/2, 1].

The backward recursion: X_0 = 1, X_1 = 1/2, and X_n(omega) is the
left-branch preimage of X_{n-1}(F omega) under T_{alpha(omega)}. The
interval (Y_{n+1}(omega), Y_n(omega)] of right-branch preimages collects
the points of Y that return to Y in exactly n steps; crossed with a base
cell of width 4^-q this is the partition element A_{s,n} on which the
induced map is a full expanding branch.

Expansion and distortion are checked on sampled pairs inside a common
A_{s,n}. Pair omega's share their first q+n base-4 digits, so the base
separation after k steps is exactly 4^k times the initial one (a digit
shift), which keeps the metric ratios exact far below float resolution
of the omega values themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from ._pure import _left_inv_chain
from .circle import OmegaState, ParamCurve, alpha_eval
from .fibre import SkewPoint, skew_step

_POW4 = 4.0 ** -np.arange(1, 33)


# --- geometry constants ---------------------------------------------------

@dataclass(frozen=True)
class GeometryConstants:
    """Numerical realizations of the slope/expansion bookkeeping constants.

    a is derived so that a*D + lam/4 = 1: the d' metric
    a|x1-x2| + |omega1-omega2| then contracts horizontal drift enough for
    the induced map to expand by lam.
    """

    D: float
    eps0: float
    q: int
    lam: float
    a: float
    inf_i1: float
    lam_raw: float
    lam_clamped: bool

    def as_dict(self) -> dict:
        return {
            "D": self.D,
            "eps0": self.eps0,
            "q": self.q,
            "lambda": self.lam,
            "a": self.a,
            "inf_I1": self.inf_i1,
            "lambda_raw": self.lam_raw,
            "lambda_clamped": self.lam_clamped,
        }


def geometry_constants(curve: ParamCurve, grid_size: int = 4096) -> GeometryConstants:
    """Slope bound D, horizontal scale eps0, partition depth q, expansion lam.

    D: 2 * max(4 * sup |x ln(2x) (2x)^alpha alpha'(omega)|, 1), the sup on a
    product grid (vertical drift of admissible curves per step, doubled for
    margin). eps0: min(1/16, 0.9 * inf|I_1| / D). q: least with 4^-q < eps0.
    lam: inf over omega of T'_{alpha(omega)} at X_3(omega) (the derivative
    is increasing in x, and [X_3, X_1] is where induced branches live),
    clamped to 1.9 so that a > 0.
    """
    oms = (np.arange(grid_size) + 0.5) / grid_size
    al = alpha_eval(curve, oms)
    dal = 2.0 * math.pi * curve.epsilon * np.cos(
        2.0 * math.pi * (oms - curve.x0 - 0.25)
    )
    xs = np.linspace(1e-9, 0.5, 2048)
    u = 2.0 * xs
    # sup over x of |x ln(2x)| (2x)^alpha, per grid alpha
    prof = np.abs(xs[None, :] * np.log(u)[None, :] * u[None, :] ** al[:, None])
    drift = np.max(prof.max(axis=1) * np.abs(dal))
    D = 2.0 * max(4.0 * drift, 1.0)

    # inf |I_1| = inf over omega of 1/2 - X_2(omega), X_2 = invL_alpha(1/2)
    x2 = _left_inv_chain(np.full(grid_size, 0.5), al)
    inf_i1 = float(np.min(0.5 - x2))
    eps0 = min(1.0 / 16.0, 0.9 * inf_i1 / D)
    q = 1
    while 4.0**-q >= eps0:
        q += 1

    # X_3 on the grid needs alpha along two base steps of each grid point
    om1 = (4.0 * oms) % 1.0
    al1 = alpha_eval(curve, om1)
    x2_shift = _left_inv_chain(np.full(grid_size, 0.5), al1)  # X_2(F omega)
    x3 = _left_inv_chain(x2_shift, al)
    lam_raw = float(np.min(1.0 + (al + 1.0) * (2.0 * x3) ** al))
    lam = min(lam_raw, 1.9)
    a = (1.0 - lam / 4.0) / D
    return GeometryConstants(
        D=float(D), eps0=float(eps0), q=q, lam=float(lam), a=float(a),
        inf_i1=inf_i1, lam_raw=lam_raw, lam_clamped=lam_raw > 1.9,
    )


# --- backward recursion ---------------------------------------------------

@dataclass
class XnSequence:
    """Backward-recursion values along one base orbit.

    values[k] is the depth-k pullback of 1 (values[0] = 1, values[1] = 1/2);
    depth k is anchored at F^(n-k) of the starting point, so the sequence is
    the ladder a single length-n pass produces, not n separate recursions.
    """

    omega0: float
    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values) - 1


def xn_sequence(om: OmegaState, curve: ParamCurve, n: int) -> XnSequence:
    """One backward pass of depth n from the orbit of om (om not mutated)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    om = om.clone()
    om0 = om.value
    vals = np.empty(n + 1)
    vals[0] = 1.0
    if n == 0:
        return XnSequence(om0, vals)
    vals[1] = 0.5
    alphas = np.empty(max(n - 1, 1))
    for j in range(n - 1):
        alphas[j] = alpha_eval(curve, om.value)
        om.advance()
    v = 0.5
    for k in range(2, n + 1):
        v = backend.left_inverse_chain(v, alphas[n - k])
        vals[k] = v
    return XnSequence(om0, vals)


def xn_sequence_from_seed(seed: int, curve: ParamCurve, n: int) -> XnSequence:
    from .circle import omega_from_seed

    return xn_sequence(omega_from_seed(seed), curve, n)


def yn_value(om: OmegaState, curve: ParamCurve, n: int) -> float:
    """Y_n(omega): the right-branch preimage ladder, (X_{n-1}(F omega)+1)/2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    shifted = om.clone().advance()
    xprev = xn_sequence(shifted, curve, n - 1).values[-1]
    return (xprev + 1.0) / 2.0


# --- excursions -----------------------------------------------------------

class ExcursionCapError(RuntimeError):
    """Return-time cap hit; carries the partial record."""

    def __init__(self, partial: "ReturnRecord"):
        super().__init__(
            f"no return to Y within {partial.phi} steps (cap); "
            "orbit is deep in the neutral regime"
        )
        self.partial = partial


@dataclass
class ReturnRecord:
    """One excursion from Y: entry point, return time, induced observable."""

    entry_omega: float
    entry_x: float
    phi: int
    f_sum: float
    f_max: float
    label: tuple[int, int] = field(default=(0, 0))


def return_time(
    p: SkewPoint,
    curve: ParamCurve,
    f=None,
    q: int = 3,
    cap: int = 10**8,
) -> ReturnRecord:
    """Iterate until x > 1/2 again; p is advanced through the excursion."""
    if p.x <= 0.5:
        raise ValueError("return_time needs a starting point in Y (x > 1/2)")
    entry_omega = p.omega.value
    entry_x = p.x
    s = int(entry_omega * 4**q)
    total = 0.0
    fmax = 0.0
    steps = 0
    while True:
        if f is not None:
            total += f(p.omega.value, p.x)
            fmax = max(fmax, abs(total))
        skew_step(p, curve)
        steps += 1
        if p.x > 0.5:
            break
        if steps >= cap:
            raise ExcursionCapError(
                ReturnRecord(entry_omega, entry_x, steps, total, fmax, (s, steps))
            )
    return ReturnRecord(entry_omega, entry_x, steps, total, fmax, (s, steps))


def induced_orbit(
    p: SkewPoint,
    curve: ParamCurve,
    n_returns: int,
    f=None,
    q: int = 3,
    cap: int = 10**8,
) -> list[ReturnRecord]:
    """n_returns consecutive excursions; concatenation is the full orbit."""
    return [return_time(p, curve, f=f, q=q, cap=cap) for _ in range(n_returns)]


# --- pair sampling inside one partition element ----------------------------

def _window_values(dig: np.ndarray, k: int) -> np.ndarray:
    return dig[:, k : k + 32].astype(np.float64) @ _POW4


def _alphas_along(dig: np.ndarray, curve: ParamCurve, shifts) -> np.ndarray:
    out = np.empty((dig.shape[0], len(shifts)))
    for c, k in enumerate(shifts):
        out[:, c] = alpha_eval(curve, _window_values(dig, k))
    return out


def _pullback_from_alphas(alphas: np.ndarray) -> np.ndarray:
    """Compose the left inverses over the columns (rightmost innermost)."""
    v = np.full(alphas.shape[0], 0.5)
    for c in range(alphas.shape[1] - 1, -1, -1):
        v = _left_inv_chain(v, alphas[:, c])
    return v


class PairBatch:
    """m sampled pairs in a common A_{s,n}, iterated through their return.

    Exposes start/end d'-distances, the n-step fibre derivative products,
    and the exact base separations (digit difference times a power of 4).
    """

    def __init__(self, curve: ParamCurve, consts: GeometryConstants, n: int,
                 m: int, rng: np.random.Generator):
        q = consts.q
        tail = 72
        L = q + n + tail + 32
        d1 = rng.integers(0, 4, size=(m, L), dtype=np.uint8)
        d2 = d1.copy()
        d2[:, q + n :] = rng.integers(0, 4, size=(m, L - q - n), dtype=np.uint8)
        # exact base separation: digits agree through position q+n
        diff = d2[:, q + n :].astype(np.float64) - d1[:, q + n :]
        scale = 4.0 ** -(np.arange(q + n + 1, L + 1, dtype=np.float64))
        delta0 = diff @ scale[: diff.shape[1]]
        self.delta0 = delta0
        self.n = n
        self.curve = curve
        self.consts = consts

        xs = []
        als = []
        for d in (d1, d2):
            al_fwd = _alphas_along(d, curve, range(n))  # alpha at shifts 0..n-1
            als.append(al_fwd)
            # strip (Y_{n+1}, Y_n]: Y_k(omega) = (X_{k-1}(F omega)+1)/2, so the
            # edges come from pullbacks over the shifted orbit, depths n and n-1
            al_shift = _alphas_along(d, curve, range(1, n))  # shifts 1..n-1
            if n == 1:
                y_hi = np.ones(m)  # Y_1 = (X_0+1)/2 = 1
            else:
                y_hi = (_pullback_from_alphas(al_shift[:, : n - 2]) + 1.0) / 2.0
            y_lo = (_pullback_from_alphas(al_shift) + 1.0) / 2.0
            t = rng.uniform(0.02, 0.98, size=m)
            xs.append(y_lo + t * (y_hi - y_lo))
        self.x_start = xs
        self.alphas = als

    def iterate(self):
        """Run both pair members through the n return steps."""
        n, m = self.n, self.delta0.shape[0]
        xs = [x.copy() for x in self.x_start]
        prods = [np.ones(m), np.ones(m)]
        for k in range(n):
            for side in (0, 1):
                a = self.alphas[side][:, k]
                x = xs[side]
                if k == 0:
                    assert np.all(x > 0.5), "pair batch must start in Y"
                    prods[side] *= 2.0
                    xs[side] = 2.0 * x - 1.0
                else:
                    assert np.all(x <= 0.5), "mid-excursion point left the branch"
                    t = (2.0 * x) ** a
                    prods[side] *= 1.0 + (a + 1.0) * t
                    xs[side] = x * (1.0 + t)
        assert np.all(xs[0] > 0.5) and np.all(xs[1] > 0.5), "missed the return"
        self.x_end = xs
        self.deriv_prod = prods
        self.delta_end = self.delta0 * 4.0**n
        aw = self.consts.a
        self.d_start = aw * np.abs(self.x_start[0] - self.x_start[1]) + np.abs(self.delta0)
        self.d_end = aw * np.abs(xs[0] - xs[1]) + np.abs(self.delta_end)
        return self


def expansion_check(
    curve: ParamCurve,
    consts: GeometryConstants | None = None,
    pairs_per_depth: int = 400,
    depth_max: int = 24,
    seed: int = 2024,
) -> dict:
    """Minimal observed d'(T^n a, T^n b) / d'(a, b) over in-cell pairs."""
    if consts is None:
        consts = geometry_constants(curve)
    rng = np.random.default_rng(seed)
    worst = math.inf
    worst_n = 0
    total = 0
    per_depth = {}
    for n in range(1, depth_max + 1):
        b = PairBatch(curve, consts, n, pairs_per_depth, rng).iterate()
        ratios = b.d_end / b.d_start
        mn = float(ratios.min())
        per_depth[n] = mn
        total += pairs_per_depth
        if mn < worst:
            worst, worst_n = mn, n
    return {
        "check": "expansion",
        "samples": total,
        "worst": worst,
        "worst_depth": worst_n,
        "threshold": consts.lam,
        "per_depth_min": per_depth,
        "passed": worst >= consts.lam * (1.0 - 1e-9),
    }


def distortion_check(
    curve: ParamCurve,
    consts: GeometryConstants | None = None,
    pairs_per_depth: int = 400,
    depth_max: int = 24,
    c_max: float = 50.0,
    seed: int = 2024,
) -> dict:
    """Sup of |det DT^n ratio - 1| / d'(T^n a, T^n b); bounded, not growing.

    det DT^n = 4^n (T^n)'(x), so the 4^n factors cancel in the ratio and
    only the fibre derivative products enter.
    """
    if consts is None:
        consts = geometry_constants(curve)
    rng = np.random.default_rng(seed)
    per_depth = {}
    total = 0
    for n in range(1, depth_max + 1):
        b = PairBatch(curve, consts, n, pairs_per_depth, rng).iterate()
        det_ratio = b.deriv_prod[0] / b.deriv_prod[1]
        quot = np.abs(det_ratio - 1.0) / b.d_end
        per_depth[n] = float(quot.max())
        total += pairs_per_depth
    sup_all = max(per_depth.values())
    depths = sorted(per_depth)
    half = len(depths) // 2
    early = max(per_depth[d] for d in depths[:half])
    late = max(per_depth[d] for d in depths[half:])
    no_growth = late <= 2.0 * early + 1e-9
    return {
        "check": "distortion",
        "samples": total,
        "worst": sup_all,
        "threshold": c_max,
        "per_depth_sup": per_depth,
        "no_growth": no_growth,
        "passed": bool(sup_all <= c_max and no_growth),
    }
