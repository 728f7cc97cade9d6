"""Distributional limits of Birkhoff sums and the induced-map reduction.

The four regimes, keyed by (alpha_min, c) where c is the integral of the
observable along the neutral line x = 0:

    alpha_min < 1/2              sqrt(n) CLT, any c
    alpha_min = 1/2, c != 0      normal law under sqrt(c^2 A / 4 n ln^2 n)
    alpha_min in (1/2,1), c != 0 stable law under n^alpha sqrt(alpha ln n)
    alpha_min >= 1/2, c = 0      sqrt(n) CLT again

Everything here is Monte Carlo: ensembles of independent streams produce
normalized sums, and empirical laws are compared to their targets by KS
and characteristic-function distance. Convergence is asymptotic, so the
checks are trends over n, never equalities at fixed n. The module also
probes the first-return reduction directly: full-orbit sums against
induced-orbit sums over matched starting points, and the tail/tightness
hypotheses that make the reduction work.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .backend import run_excursions, skew_advance, skew_orbit_chunk, steps_to_enter
from .circle import alpha_eval
from .fibre import lsv_map_np
from .rngstream import derive_seed, derive_seeds
from .stable import stable_cdf, stable_cf, theorem_params
from .streams import stream_init

# seed-derivation labels, continuing the measure module's register
_LBL_CENTER = 0x15
_LBL_ENSEMBLE = 0x16
_LBL_INDUCED = 0x17
_LBL_HYPOTH = 0x18
_LBL_MASS = 0x19
_LBL_BOOT = 0x1A


class RegimeWarning(UserWarning):
    """A regime call that rests on a borderline or unverifiable condition."""


class PlateauWarning(UserWarning):
    """Variance sequence still drifting where a plateau was expected."""


# --- observables -----------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """A centered observable of the skew product.

    The function actually summed is fn(omega, x) - mean - slope * x. One of
    the two corrections is always zero: constant centering (slope = 0)
    shifts the neutral-line integral c along with the mean, fibre centering
    (mean = 0) bends the correction to vanish at x = 0 so c survives
    exactly. c and c_err always describe the centered function. theta is
    the Holder exponent, which also bounds how fast f(omega, x) approaches
    f(omega, 0).
    """

    fn: object
    theta: float
    mean: float
    slope: float
    mean_stderr: float
    c: float
    c_err: float
    name: str = ""

    def __post_init__(self):
        if not (0.0 < self.theta <= 1.0):
            raise ValueError(f"theta must be in (0,1], got {self.theta}")
        if self.mean != 0.0 and self.slope != 0.0:
            raise ValueError("centering uses a constant or an x-multiple, not both")

    def __call__(self, om, x):
        out = np.asarray(self.fn(om, x), dtype=float) - self.mean
        if self.slope != 0.0:
            out = out - self.slope * np.asarray(x, dtype=float)
        return out


def _boundary_integral(fn) -> tuple[float, float]:
    """Integral of fn(omega, 0) over the circle, with the quadrature error."""
    val, err = quad(lambda w: float(np.asarray(fn(w, 0.0))), 0.0, 1.0, limit=200)
    return float(val), float(max(err, 1e-15))


def center_observable(curve, fn, theta: float, mode: str = "constant",
                      name: str = "", n_streams: int = 2048, window: int = 1024,
                      burn_in: int = 4096, seed: int = 0) -> Observable:
    """Estimate the invariant mean of fn and build the centered Observable.

    The mean is a time-and-ensemble average over n_streams burned-in
    streams observed for `window` steps; its stderr comes from the spread
    of the per-stream time averages, which are independent. The default
    window is long because a centering error eps resurfaces in normalized
    Birkhoff sums as eps * n / B_n, which grows like sqrt(n) in the CLT
    regimes; the defaults hold the displacement at n = 1e4 to a few
    percent of the limit law's width. mode="constant" subtracts the mean
    itself; mode="fibre" subtracts (mean_f/mean_x) * x, which has the same
    invariant mean but vanishes on x = 0, preserving a designed-in c = 0
    exactly. On the calibration ensemble the centered mean is zero by
    construction; on fresh samples it is zero to within the recorded
    stderr.
    """
    state = stream_init(derive_seeds(seed, _LBL_CENTER, n_streams))
    skew_advance(state, curve, burn_in)
    oo = np.empty((n_streams, window))
    xx = np.empty((n_streams, window))
    skew_orbit_chunk(state, curve, oo, xx)
    fv = np.asarray(fn(oo, xx), dtype=float)
    per_f = fv.mean(axis=1)
    mu_f = float(per_f.mean())
    if mode == "constant":
        mean, slope = mu_f, 0.0
        resid = per_f - mu_f
    elif mode == "fibre":
        per_x = xx.mean(axis=1)
        mu_x = float(per_x.mean())
        if abs(mu_x) < 1e-6:
            raise ValueError("fibre centering needs a nondegenerate mean of x")
        mean, slope = 0.0, mu_f / mu_x
        resid = per_f - slope * per_x
    else:
        raise ValueError(f"mode must be 'constant' or 'fibre', got {mode!r}")
    stderr = float(resid.std(ddof=1) / math.sqrt(n_streams))
    c_raw, c_err = _boundary_integral(fn)
    return Observable(fn=fn, theta=theta, mean=mean, slope=slope,
                      mean_stderr=stderr, c=c_raw - mean, c_err=c_err,
                      name=name)


def named_observable(curve, name: str, seed: int = 0, **kwargs) -> Observable:
    """Registry of stock observables, addressable from configs by name.

    height      f = x, constant-centered: Lipschitz with c = -mean(x) != 0,
                the stable-regime workhorse.
    mixed       f = x + 2 sin(2 pi omega): same c as height, but the base
                wave adds clean variance (its terms are uncorrelated along
                x4 orbits), so CLT-regime laws Gaussianize much sooner.
    ripple      f = sin(2 pi omega) * x, fibre-centered: vanishes on the
                neutral line, so c = 0 exactly.
    coboundary  f = g - g o T for g = x cos(2 pi omega): sums telescope, so
                every CLT should degenerate to sigma^2 = 0.
    """
    if name == "height":
        return center_observable(curve, lambda om, x: np.asarray(x, dtype=float) + 0.0 * np.asarray(om),
                                 theta=1.0, mode="constant", name=name,
                                 seed=seed, **kwargs)
    if name == "mixed":
        return center_observable(curve, lambda om, x: np.asarray(x, dtype=float) + 2.0 * np.sin(2.0 * math.pi * np.asarray(om)),
                                 theta=1.0, mode="constant", name=name,
                                 seed=seed, **kwargs)
    if name == "ripple":
        return center_observable(curve, lambda om, x: np.sin(2.0 * math.pi * np.asarray(om)) * np.asarray(x, dtype=float),
                                 theta=1.0, mode="fibre", name=name,
                                 seed=seed, **kwargs)
    if name == "coboundary":
        def g(om, x):
            return np.asarray(x, dtype=float) * np.cos(2.0 * math.pi * np.asarray(om))

        def fn(om, x):
            om = np.asarray(om, dtype=float)
            x = np.asarray(x, dtype=float)
            # one float step of the skew product; a few ulp off the exact
            # digit dynamics, which a telescoping sum never amplifies
            om2 = (4.0 * om) % 1.0
            x2 = lsv_map_np(x, alpha_eval(curve, om))
            return g(om, x) - g(om2, x2)

        return center_observable(curve, fn, theta=1.0, mode="constant",
                                 name=name, seed=seed, **kwargs)
    raise ValueError(f"unknown observable {name!r}")


# --- regimes and normalizers -----------------------------------------------


class Regime(Enum):
    CLT_SMALL_ALPHA = "clt_small_alpha"
    NONSTANDARD = "nonstandard"
    STABLE = "stable"
    CLT_C_ZERO = "clt_c_zero"


@dataclass
class RegimeSpec:
    """The regime tag plus every parameter its normalizer and target need.

    c is the effective value (zeroed when indistinguishable from zero),
    c_raw/c_err keep the measurement. a_constant and sigma2 are slots:
    the first must be supplied for the nonstandard normalizer and the
    stable target, the second is filled by variance estimation.
    """

    regime: Regime
    alpha_min: float
    c: float
    c_raw: float
    c_err: float
    a_constant: float | None = None
    sigma2: float | None = None
    ambiguous: bool = False

    def __post_init__(self):
        am, c = self.alpha_min, self.c
        ok = {
            Regime.CLT_SMALL_ALPHA: am < 0.5,
            Regime.NONSTANDARD: am == 0.5 and c != 0.0,
            Regime.STABLE: 0.5 < am < 1.0 and c != 0.0,
            Regime.CLT_C_ZERO: 0.5 <= am < 1.0 and c == 0.0,
        }[self.regime]
        if not ok:
            raise ValueError(
                f"{self.regime.name} inconsistent with alpha_min={am}, c={c}")

    def summary(self) -> dict:
        return {
            "regime": self.regime.value,
            "alpha_min": self.alpha_min,
            "c": self.c,
            "c_raw": self.c_raw,
            "c_err": self.c_err,
            "a_constant": self.a_constant,
            "sigma2": self.sigma2,
            "ambiguous": self.ambiguous,
        }


def classify_regime(curve, obs: Observable, a_constant: float | None = None) -> RegimeSpec:
    """Pick the limit regime from (alpha_min, c).

    c is treated as zero when it is within 3 quadrature errors of zero;
    misreading a tiny c as nonzero would select a divergently wrong
    normalizer, so the zero call is the conservative one. At the boundary
    alpha_min = 1/2 that call decides between two different laws, hence
    the ambiguity flag. A c = 0 regime additionally needs the observable
    to vanish fast enough at the neutral line; theta below the known
    threshold gets a warning, not an error, since theta is only an upper
    bound on the true vanishing rate.
    """
    am = curve.alpha_min
    c_eff = 0.0 if abs(obs.c) <= 3.0 * obs.c_err else obs.c
    if am < 0.5:
        return RegimeSpec(Regime.CLT_SMALL_ALPHA, am, c_eff, obs.c, obs.c_err,
                          a_constant=a_constant)
    if c_eff == 0.0:
        ambiguous = am == 0.5
        if ambiguous:
            warnings.warn(RegimeWarning(
                "alpha_min = 1/2 with c indistinguishable from 0: the "
                "nonstandard and CLT laws meet here"), stacklevel=2)
        gamma_floor = curve.alpha_max * (1.0 - 1.0 / (2.0 * am))
        if obs.theta <= gamma_floor:
            warnings.warn(RegimeWarning(
                f"c = 0 regime needs vanishing faster than x^{gamma_floor:.3f} "
                f"at the neutral line; theta = {obs.theta} does not certify it"),
                stacklevel=2)
        return RegimeSpec(Regime.CLT_C_ZERO, am, 0.0, obs.c, obs.c_err,
                          a_constant=a_constant, ambiguous=ambiguous)
    if am == 0.5:
        return RegimeSpec(Regime.NONSTANDARD, am, c_eff, obs.c, obs.c_err,
                          a_constant=a_constant)
    return RegimeSpec(Regime.STABLE, am, c_eff, obs.c, obs.c_err,
                      a_constant=a_constant)


def normalizer(spec: RegimeSpec, n):
    """The normalizing sequence B_n of the regime; scalar or array n.

    sqrt(n) for both CLT regimes, sqrt(c^2 A / 4 n ln^2 n) for the
    nonstandard one, n^alpha sqrt(alpha ln n) for the stable one.
    """
    arr = np.asarray(n, dtype=float)
    if np.any(arr < 2):
        raise ValueError("normalizer needs n >= 2")
    if spec.regime in (Regime.CLT_SMALL_ALPHA, Regime.CLT_C_ZERO):
        out = np.sqrt(arr)
    elif spec.regime == Regime.NONSTANDARD:
        if spec.c == 0.0:
            raise ValueError("nonstandard normalizer degenerates at c = 0")
        if spec.a_constant is None:
            raise ValueError("nonstandard normalizer needs the constant A")
        out = np.sqrt(0.25 * spec.c**2 * spec.a_constant * arr) * np.log(arr)
    else:
        am = spec.alpha_min
        out = arr**am * np.sqrt(am * np.log(arr))
    return float(out) if np.isscalar(n) or arr.ndim == 0 else out


# --- empirical laws and distances ------------------------------------------


@dataclass(frozen=True)
class EmpiricalLaw:
    """Sorted sample of normalized Birkhoff sums S_n f / B_n."""

    samples: np.ndarray
    n: int
    count: int
    ks: float | None = None
    cf: float | None = None

    def __post_init__(self):
        if self.samples.size != self.count:
            raise ValueError("count must match the sample vector length")
        if np.any(np.diff(self.samples) < 0):
            raise ValueError("samples must be sorted ascending")
        for d in (self.ks, self.cf):
            if d is not None and not d >= 0.0:
                raise ValueError("distances must be nonnegative")

    def with_distances(self, ks: float | None = None, cf: float | None = None) -> "EmpiricalLaw":
        return replace(self, ks=self.ks if ks is None else ks,
                       cf=self.cf if cf is None else cf)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "value"])
            for v in self.samples:
                w.writerow([self.n, repr(float(v))])


def _eval_monotone(fun, xs: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fun(xs), dtype=float)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fun(float(v))) for v in xs])


def ks_distance(law: EmpiricalLaw, target_cdf, eval_cap: int | None = None) -> float:
    """sup_x |empirical CDF - target CDF|, the sup running over samples.

    With eval_cap set, the target is evaluated on that many sample
    quantiles only and the result is a rigorous upper bound on the full
    statistic (monotone bracketing between evaluated points), at most
    count/eval_cap in sample mass above the true value. That path exists
    for targets that cost a quadrature per point.
    """
    if law.count < 100:
        raise ValueError(f"KS needs at least 100 samples, got {law.count}")
    xs = law.samples
    n = law.count
    if eval_cap is None or eval_cap >= n:
        f = _eval_monotone(target_cdf, xs)
        i = np.arange(1, n + 1)
        return float(np.maximum(i / n - f, f - (i - 1) / n).max())
    if eval_cap < 2:
        raise ValueError("eval_cap must be at least 2")
    idx = np.unique(np.round(np.linspace(0, n - 1, eval_cap)).astype(np.int64))
    f = _eval_monotone(target_cdf, xs[idx])
    if np.any(np.diff(f) < -1e-12):
        raise ValueError("target_cdf is not monotone over the sample range")
    # sup over i in (idx[k], idx[k+1]] of both one-sided gaps, bounded by
    # moving each term to the friendly end of the bracket
    up_hi = (idx[1:] + 1) / n - f[:-1]
    up_lo = f[1:] - idx[:-1] / n
    head = max((idx[0] + 1) / n - f[0], f[0] - idx[0] / n)
    return float(max(np.maximum(up_hi, up_lo).max(), head))


def _empirical_cf(samples: np.ndarray, t: np.ndarray, chunk: int = 32768) -> np.ndarray:
    acc = np.zeros(t.size, dtype=complex)
    for lo in range(0, samples.size, chunk):
        part = samples[lo:lo + chunk]
        acc += np.exp(1j * np.outer(t, part)).sum(axis=1)
    return acc / samples.size


def cf_distance(law: EmpiricalLaw, target_cf, t_grid, t_max: float = 10.0) -> float:
    """max over the grid of |empirical CF - target CF|.

    The grid must stay inside [-t_max, t_max]: beyond that the empirical
    CF of a heavy-tailed sample is pure phase noise and the distance
    stops meaning anything.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValueError("empty t_grid")
    if not np.all(np.isfinite(t)) or np.any(np.abs(t) > t_max):
        raise ValueError(f"t_grid must be finite and within |t| <= {t_max}")
    emp = _empirical_cf(law.samples, t)
    try:
        tgt = np.asarray(target_cf(t), dtype=complex)
        if tgt.shape != t.shape:
            raise ValueError
    except (TypeError, ValueError):
        tgt = np.array([complex(target_cf(float(v))) for v in t])
    return float(np.abs(emp - tgt).max())


def _ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """Exact two-sample KS statistic; both inputs sorted."""
    z = np.concatenate([a, b])
    fa = np.searchsorted(a, z, side="right") / a.size
    fb = np.searchsorted(b, z, side="right") / b.size
    return float(np.abs(fa - fb).max())


# --- ensembles --------------------------------------------------------------


def _milestone_sums(curve, obs, ns, n_samples: int, seed: int,
                    burn_in: int, stream_batch: int, chunk: int) -> np.ndarray:
    """S_n f for every n in ns (sorted), per sample; one orbit pass.

    Streams are keyed by absolute sample index, so the result is identical
    for any stream_batch and chunk, which is what lets workers split the
    sample range.
    """
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size == 0 or np.any(np.diff(ns) <= 0) or ns[0] < 1:
        raise ValueError("ns must be strictly increasing positive milestones")
    n_max = int(ns[-1])
    out = np.empty((ns.size, n_samples))
    done = 0
    while done < n_samples:
        b = min(stream_batch, n_samples - done)
        state = stream_init(derive_seeds(seed, _LBL_ENSEMBLE, b, start=done))
        skew_advance(state, curve, burn_in)
        oo = np.empty((b, chunk))
        xx = np.empty((b, chunk))
        cum = np.zeros(b)
        t = 0
        k = 0
        while t < n_max:
            step = min(chunk, n_max - t)
            if step == chunk:
                ob, xb = oo, xx
            else:
                ob, xb = np.empty((b, step)), np.empty((b, step))
            skew_orbit_chunk(state, curve, ob, xb)
            vals = obs(ob, xb)
            if k < ns.size and ns[k] <= t + step:
                cs = np.cumsum(vals, axis=1)
                while k < ns.size and ns[k] <= t + step:
                    out[k, done:done + b] = cum + cs[:, ns[k] - t - 1]
                    k += 1
                cum += cs[:, -1]
            else:
                cum += vals.sum(axis=1)
            t += step
        done += b
    return out


def birkhoff_ensemble(curve, obs: Observable, n: int, n_samples: int,
                      seed: int = 0, spec: RegimeSpec | None = None,
                      burn_in: int = 4096, stream_batch: int = 1024,
                      chunk: int = 2048) -> EmpiricalLaw:
    """n_samples independent draws of S_n f / B_n as an EmpiricalLaw.

    Starting points are burned-in (approximately invariant); the limit
    laws hold for any absolutely continuous start, the burn-in just
    removes the transient. Deterministic in the master seed alone.
    """
    if spec is None:
        spec = classify_regime(curve, obs)
    sums = _milestone_sums(curve, obs, [n], n_samples, seed,
                           burn_in, stream_batch, chunk)[0]
    b_n = normalizer(spec, n)
    return EmpiricalLaw(np.sort(sums / b_n), n=int(n), count=n_samples)


def ensemble_grid(curve, obs: Observable, ns, n_samples: int, seed: int = 0,
                  spec: RegimeSpec | None = None, burn_in: int = 4096,
                  stream_batch: int = 1024, chunk: int = 2048) -> list[EmpiricalLaw]:
    """EmpiricalLaw at every milestone n of one orbit pass (shared samples)."""
    if spec is None:
        spec = classify_regime(curve, obs)
    ns = np.asarray(ns, dtype=np.int64)
    sums = _milestone_sums(curve, obs, ns, n_samples, seed,
                           burn_in, stream_batch, chunk)
    return [EmpiricalLaw(np.sort(sums[i] / normalizer(spec, int(n))),
                         n=int(n), count=n_samples)
            for i, n in enumerate(ns)]


# --- induced-orbit machinery -------------------------------------------------


def _mass_fraction(curve, seed: int, n_streams: int = 4096, window: int = 32,
                   burn_in: int = 10**4) -> float:
    """Stationary time fraction spent in Y; light-tailed, unlike 1/mean(phi)."""
    state = stream_init(derive_seeds(seed, _LBL_MASS, n_streams))
    skew_advance(state, curve, burn_in)
    oo = np.empty((n_streams, window))
    xx = np.empty((n_streams, window))
    skew_orbit_chunk(state, curve, oo, xx)
    return float((xx > 0.5).mean())


def _y_batch(curve, b: int, seed: int, label: int, start: int,
             burn_in: int, induced_burn: int):
    """b streams distributed approximately as the induced invariant measure."""
    state = stream_init(derive_seeds(seed, label, b, start=start))
    skew_advance(state, curve, burn_in)
    steps_to_enter(state, curve)
    if induced_burn:
        run_excursions(state, curve, induced_burn)
    return state


@dataclass
class ReductionReport:
    """Full-orbit sums vs induced-orbit sums over matched starts."""

    n: int
    k_induced: int
    mass_y: float
    ks: float
    bound: float
    passed: bool
    law_full: EmpiricalLaw
    law_induced: EmpiricalLaw
    return_times: np.ndarray

    def summary(self) -> dict:
        return {"n": self.n, "k_induced": self.k_induced, "mass_y": self.mass_y,
                "ks": self.ks, "bound": self.bound, "passed": self.passed,
                "n_samples": self.law_full.count}


def induced_reduction_check(curve, obs: Observable, n: int, n_samples: int,
                            seed: int = 0, bound: float = 0.05,
                            mass_y: float | None = None,
                            spec: RegimeSpec | None = None,
                            burn_in: int = 4096, induced_burn: int = 8,
                            stream_batch: int = 512, chunk: int = 4096,
                            cap_factor: int = 4096) -> ReductionReport:
    """Compare S_n f / B_n with S^Y_k f_Y / B_n, k = floor(n mass(Y)).

    One excursion of the induced map costs about 1/mass(Y) steps of the
    full map, so the two ensembles cover comparable orbit stretches; the
    induced sum is read off the same orbit as the full sum (the induced
    Birkhoff sum over k excursions telescopes to the plain sum up to the
    k-th return), so every pair shares its starting point and its noise.
    Starts are conditioned on Y, which is absolutely continuous, so the
    limit is the same.
    """
    if spec is None:
        spec = classify_regime(curve, obs)
    if mass_y is None:
        mass_y = _mass_fraction(curve, seed)
    k = int(n * mass_y)
    if k < 1:
        raise ValueError(f"n = {n} gives no induced steps at mass_y = {mass_y:.3f}")
    s_full = np.empty(n_samples)
    s_ind = np.empty(n_samples)
    r_k = np.zeros(n_samples, dtype=np.int64)
    done = 0
    while done < n_samples:
        b = min(stream_batch, n_samples - done)
        state = _y_batch(curve, b, seed, _LBL_INDUCED, done, burn_in, induced_burn)
        rows = np.arange(done, done + b)
        cum = np.zeros(b)
        rets = np.zeros(b, dtype=np.int64)
        t = 0
        first = True
        while rows.size:
            oo = np.empty((rows.size, chunk))
            xx = np.empty((rows.size, chunk))
            skew_orbit_chunk(state, curve, oo, xx)
            vals = obs(oo, xx)
            cs = np.cumsum(vals, axis=1)
            if t < n <= t + chunk:
                s_full[rows] = cum + cs[:, n - t - 1]
            mask = xx > 0.5
            if first:
                # column 0 is the start point itself, not a return
                mask[:, 0] = False
                first = False
            cnt = mask.sum(axis=1)
            hit = np.nonzero((rets < k) & (rets + cnt >= k))[0]
            for r in hit:
                j = int(np.nonzero(mask[r])[0][k - rets[r] - 1])
                r_k[rows[r]] = t + j
                s_ind[rows[r]] = cum[r] + (cs[r, j - 1] if j else 0.0)
            rets += cnt
            cum += cs[:, -1]
            t += chunk
            if t > cap_factor * n:
                # return times have a finite mean, so this fires only on a
                # broken stream, not on an honest heavy-tail straggler
                raise RuntimeError(
                    f"{int((rets < k).sum())} streams short of {k} returns "
                    f"after {t} steps")
            live = (t < n) | (rets < k)
            if not live.any():
                break
            if live.sum() <= rows.size // 2:
                idx = np.nonzero(live)[0]
                state = state.select(idx)
                rows, cum, rets = rows[idx], cum[idx], rets[idx]
        done += b
    b_n = normalizer(spec, n)
    law_full = EmpiricalLaw(np.sort(s_full / b_n), n=int(n), count=n_samples)
    law_ind = EmpiricalLaw(np.sort(s_ind / b_n), n=k, count=n_samples)
    ks = _ks_two_sample(law_full.samples, law_ind.samples)
    return ReductionReport(n=int(n), k_induced=k, mass_y=mass_y, ks=ks,
                           bound=bound, passed=ks <= bound,
                           law_full=law_full, law_induced=law_ind,
                           return_times=r_k)


def _segment_stats(cs: np.ndarray, mask_row: np.ndarray, carry_sum: float,
                   carry_max: float, carry_len: int, t: int):
    """Per-excursion (phi, f_Y, M) completed inside one chunk row.

    cs is the row's local cumulative sum, mask_row marks returns to Y.
    Returns the completed triples plus the carry state of the excursion
    left in flight at the chunk edge.
    """
    p = np.nonzero(mask_row)[0]
    c = cs.shape[0]
    if p.size == 0:
        m = max(carry_max, float(np.abs(carry_sum + cs).max()))
        return None, carry_sum + float(cs[-1]), m, carry_len + c
    padded = np.concatenate(([0.0], cs))
    phi = np.empty(p.size, dtype=np.int64)
    f_y = np.empty(p.size)
    m_y = np.empty(p.size)
    phi[0] = carry_len + p[0]
    f_y[0] = carry_sum + padded[p[0]]
    m0 = carry_max
    if p[0] > 0:
        m0 = max(m0, float(np.abs(carry_sum + cs[:p[0]]).max()))
    m_y[0] = m0
    if p.size > 1:
        starts = p[:-1]
        phi[1:] = np.diff(p)
        f_y[1:] = padded[p[1:]] - padded[starts]
        seg = np.abs(cs[p[0]:p[-1]] - np.repeat(padded[starts], phi[1:]))
        m_y[1:] = np.maximum.reduceat(seg, starts - p[0])
    last = p[-1]
    new_sum = float(cs[-1] - padded[last])
    new_max = float(np.abs(cs[last:] - padded[last]).max())
    return (phi, f_y, m_y), new_sum, new_max, c - last


@dataclass
class HypothesisReport:
    """Empirical state of the reduction hypotheses at one curve/observable.

    tail_table holds n * m(M >= eps B_n) in invariant-measure units (rows
    eps, columns n_grid); its sup per eps is the boundedness claim, and
    tail_counts carries the raw exceedance counts so sparse cells are
    visibly noisy rather than silently authoritative. phi_quantiles are
    the (5, 50, 95)% quantiles of (S_n^Y phi - n E_phi) / B_n. a3_value
    is the pooled induced Birkhoff average of f_Y over a3_n excursions,
    and kac_ratio = mean(phi) * mass_y should sit near 1.
    """

    n_grid: np.ndarray
    eps: tuple
    tail_table: np.ndarray
    tail_counts: np.ndarray
    tail_sup: dict
    phi_quantiles: np.ndarray
    phi_abs_q95: np.ndarray
    phi_tight_bound: float
    a3_value: float
    a3_n: int
    a3_tol: float
    a3_pass: bool
    birkhoff_phi: float
    kac_ratio: float
    mass_y: float
    n_samples: int
    n_excursions: int

    def summary(self) -> dict:
        return {
            "n_grid": [int(v) for v in self.n_grid],
            "eps": list(self.eps),
            "tail_sup": {str(e): float(v) for e, v in self.tail_sup.items()},
            "tail_table": self.tail_table.tolist(),
            "tail_counts": self.tail_counts.tolist(),
            "phi_abs_q95": self.phi_abs_q95.tolist(),
            "phi_tight_bound": self.phi_tight_bound,
            "a3_value": self.a3_value,
            "a3_n": self.a3_n,
            "a3_tol": self.a3_tol,
            "a3_pass": self.a3_pass,
            "birkhoff_phi": self.birkhoff_phi,
            "kac_ratio": self.kac_ratio,
            "mass_y": self.mass_y,
            "n_samples": self.n_samples,
            "n_excursions": self.n_excursions,
        }


def hypothesis_suite(curve, obs: Observable, n_grid, n_samples: int = 512,
                     seed: int = 0, eps: tuple = (0.5, 1.0, 2.0),
                     mass_y: float | None = None,
                     spec: RegimeSpec | None = None, a3_tol: float = 0.5,
                     burn_in: int = 4096, induced_burn: int = 8,
                     stream_batch: int = 512, chunk: int = 4096,
                     cap_factor: int = 4096) -> HypothesisReport:
    """Probe the three checkable reduction hypotheses on one ensemble.

    Every stream starts on Y (burned in along the induced map) and runs
    max(n_grid) excursions. Per excursion the walk records the return time
    phi, the observable's excursion sum f_Y, and the running maximum M of
    its partial sums; pooled, these give the tail table for M and the
    pooled Birkhoff averages, while per-stream return-time sums snapshot
    at the n_grid milestones give the tightness quantiles. The excursion
    walk shares its dynamics with the plain kernels, so a run with f = 1
    reproduces the return-time sequence of run_excursions exactly.
    """
    n_grid = np.asarray(sorted(int(v) for v in n_grid), dtype=np.int64)
    if n_grid.size == 0 or n_grid[0] < 1 or np.any(np.diff(n_grid) == 0):
        raise ValueError("n_grid must be distinct positive excursion counts")
    quota = int(n_grid[-1])
    if spec is None:
        spec = classify_regime(curve, obs)
    if mass_y is None:
        mass_y = _mass_fraction(curve, seed)
    b_grid = normalizer(spec, n_grid)
    thresholds = np.asarray(eps, dtype=float)[:, None] * b_grid[None, :]
    exceed = np.zeros(thresholds.shape, dtype=np.int64)
    phi_at = np.zeros((n_grid.size, n_samples), dtype=np.int64)
    total_f = 0.0
    total_phi = 0
    total_exc = 0
    done = 0
    while done < n_samples:
        b = min(stream_batch, n_samples - done)
        state = _y_batch(curve, b, seed, _LBL_HYPOTH, done, burn_in, induced_burn)
        rows = np.arange(done, done + b)
        carry_sum = np.zeros(b)
        carry_max = np.zeros(b)
        carry_len = np.zeros(b, dtype=np.int64)
        counts = np.zeros(b, dtype=np.int64)
        phi_sum = np.zeros(b, dtype=np.int64)
        t = 0
        first = True
        while rows.size:
            oo = np.empty((rows.size, chunk))
            xx = np.empty((rows.size, chunk))
            skew_orbit_chunk(state, curve, oo, xx)
            vals = obs(oo, xx)
            mask = xx > 0.5
            if first:
                mask[:, 0] = False
                first = False
            for r in range(rows.size):
                if counts[r] >= quota:
                    continue
                trip, carry_sum[r], carry_max[r], carry_len[r] = _segment_stats(
                    np.cumsum(vals[r]), mask[r],
                    float(carry_sum[r]), float(carry_max[r]), int(carry_len[r]), t)
                if trip is None:
                    continue
                phi, f_y, m_y = trip
                room = quota - counts[r]
                if phi.size > room:
                    phi, f_y, m_y = phi[:room], f_y[:room], m_y[:room]
                exceed += (m_y[None, None, :] >= thresholds[:, :, None]).sum(axis=2)
                total_f += float(f_y.sum())
                total_phi += int(phi.sum())
                total_exc += phi.size
                old = counts[r]
                counts[r] += phi.size
                csum = int(phi_sum[r])
                cphi = np.cumsum(phi)
                for gi in np.nonzero((n_grid > old) & (n_grid <= counts[r]))[0]:
                    phi_at[gi, rows[r]] = csum + int(cphi[n_grid[gi] - old - 1])
                phi_sum[r] = csum + int(cphi[-1])
            t += chunk
            if t > cap_factor * quota:
                raise RuntimeError(
                    f"{int((counts < quota).sum())} streams short of {quota} "
                    f"excursions after {t} steps")
            live = counts < quota
            if not live.any():
                break
            if live.sum() <= rows.size // 2:
                idx = np.nonzero(live)[0]
                state = state.select(idx)
                rows, counts, phi_sum = rows[idx], counts[idx], phi_sum[idx]
                carry_sum, carry_max, carry_len = (
                    carry_sum[idx], carry_max[idx], carry_len[idx])
        done += b
    e_phi = total_phi / total_exc
    stat = (phi_at - n_grid[:, None] * e_phi) / b_grid[:, None]
    phi_quantiles = np.quantile(stat, [0.05, 0.5, 0.95], axis=1).T
    phi_abs_q95 = np.quantile(np.abs(stat), 0.95, axis=1)
    table = n_grid[None, :] * mass_y * exceed / total_exc
    a3_value = total_f / total_exc
    return HypothesisReport(
        n_grid=n_grid, eps=tuple(float(e) for e in eps),
        tail_table=table, tail_counts=exceed,
        tail_sup={float(e): float(table[i].max()) for i, e in enumerate(eps)},
        phi_quantiles=phi_quantiles, phi_abs_q95=phi_abs_q95,
        phi_tight_bound=float(phi_abs_q95.max()),
        a3_value=float(a3_value), a3_n=total_exc, a3_tol=a3_tol,
        a3_pass=bool(abs(a3_value) <= a3_tol),
        birkhoff_phi=float(e_phi), kac_ratio=float(e_phi * mass_y),
        mass_y=mass_y, n_samples=n_samples, n_excursions=total_exc)


# --- variance ----------------------------------------------------------------


@dataclass
class VarianceReport:
    """Var(S_n f)/n over a grid, with the plateau read off the top."""

    ns: np.ndarray
    variances: np.ndarray
    stderrs: np.ndarray
    sigma2: float
    drift: float
    plateau: bool

    def summary(self) -> dict:
        return {"ns": [int(v) for v in self.ns],
                "variances": self.variances.tolist(),
                "stderrs": self.stderrs.tolist(),
                "sigma2": self.sigma2, "drift": self.drift,
                "plateau": self.plateau}


def variance_estimate(curve, obs: Observable, n_grid, n_samples: int,
                      seed: int = 0, spec: RegimeSpec | None = None,
                      n_boot: int = 200, drift_tol: float = 0.2,
                      burn_in: int = 4096, stream_batch: int = 1024,
                      chunk: int = 2048) -> VarianceReport:
    """Monte Carlo Var(S_n f)/n with bootstrap bars; CLT regimes only.

    sigma^2 has no closed form here, so the estimate at the largest n is
    reported as the plateau value, and a relative drift above drift_tol
    between the top of the grid and the point one octave below flags a
    sequence still in flight (PlateauWarning). In a stable or nonstandard
    regime the statistic diverges, so those are refused.
    """
    if spec is None:
        spec = classify_regime(curve, obs)
    if spec.regime not in (Regime.CLT_SMALL_ALPHA, Regime.CLT_C_ZERO):
        raise ValueError(f"variance plateau undefined in regime {spec.regime.name}")
    ns = np.asarray(sorted(int(v) for v in n_grid), dtype=np.int64)
    sums = _milestone_sums(curve, obs, ns, n_samples, seed,
                           burn_in, stream_batch, chunk)
    variances = sums.var(axis=1, ddof=1) / ns
    rng = np.random.default_rng(derive_seed(seed, _LBL_BOOT))
    idx = rng.integers(0, n_samples, size=(n_boot, n_samples))
    stderrs = np.array([
        (sums[i][idx].var(axis=1, ddof=1) / ns[i]).std(ddof=1)
        for i in range(ns.size)])
    half = np.nonzero(ns <= ns[-1] // 2)[0]
    lo = int(half[-1]) if half.size else ns.size - 2
    v_hi, v_lo = float(variances[-1]), float(variances[lo])
    scale = max(abs(v_hi), abs(v_lo))
    drift = abs(v_hi - v_lo) / scale if scale > 0 else 0.0
    plateau = drift <= drift_tol
    if not plateau:
        warnings.warn(PlateauWarning(
            f"Var(S_n f)/n moved {drift:.1%} between n={ns[lo]} and n={ns[-1]}"),
            stacklevel=2)
    return VarianceReport(ns=ns, variances=variances, stderrs=stderrs,
                          sigma2=v_hi, drift=float(drift), plateau=plateau)


# --- the assembled experiment -------------------------------------------------


@dataclass
class LimitReport:
    """Distances to the regime target across an n grid."""

    spec: RegimeSpec
    laws: list
    ks: np.ndarray
    cf: np.ndarray
    target: dict
    ks_trend: bool
    cf_trend: bool

    def summary(self) -> dict:
        return {
            "regime": self.spec.summary(),
            "ns": [law.n for law in self.laws],
            "n_samples": self.laws[0].count if self.laws else 0,
            "ks": self.ks.tolist(),
            "cf": self.cf.tolist(),
            "target": self.target,
            "ks_trend": self.ks_trend,
            "cf_trend": self.cf_trend,
        }


def limit_experiment(curve, obs: Observable, ns, n_samples: int,
                     seed: int = 0, a_constant: float | None = None,
                     t_grid=None, burn_in: int = 4096,
                     eval_cap: int | None = 4096,
                     stream_batch: int = 1024, chunk: int = 2048) -> LimitReport:
    """Run the regime's full comparison: ensembles, target, KS and CF.

    The target law is the stable law of theorem_params in the stable
    regime (a_constant required there), the standard normal in the
    nonstandard regime (its normalizer absorbs c and A), and N(0, sigma^2)
    with sigma^2 self-estimated at the largest n in the CLT regimes. KS
    and CF are co-primary on heavy tails, where KS alone converges slowly.
    """
    spec = classify_regime(curve, obs, a_constant=a_constant)
    laws = ensemble_grid(curve, obs, ns, n_samples, seed=seed, spec=spec,
                         burn_in=burn_in, stream_batch=stream_batch, chunk=chunk)
    if t_grid is None:
        t_grid = np.linspace(-8.0, 8.0, 41)
    if spec.regime == Regime.STABLE:
        if a_constant is None:
            raise ValueError("stable-regime target needs the constant A")
        law = theorem_params(curve, a_constant, spec.c)
        target_cdf = lambda x: stable_cdf(law, x)
        target_cf = lambda t: stable_cf(law, t)
        target = {"kind": "stable", "p": law.p, "scale": law.c, "beta": law.beta}
        cap = eval_cap
    elif spec.regime == Regime.NONSTANDARD:
        target_cdf = ndtr
        target_cf = lambda t: np.exp(-0.5 * np.asarray(t) ** 2) + 0j
        target = {"kind": "normal", "sigma2": 1.0}
        cap = None
    else:
        sigma2 = float(laws[-1].samples.var(ddof=1))
        spec.sigma2 = sigma2
        sigma = math.sqrt(sigma2) if sigma2 > 0 else 0.0
        if sigma == 0.0:
            target_cdf = lambda x: np.where(np.asarray(x) >= 0.0, 1.0, 0.0)
            target_cf = lambda t: np.ones_like(np.asarray(t, dtype=float)) + 0j
        else:
            target_cdf = lambda x: ndtr(np.asarray(x) / sigma)
            target_cf = lambda t: np.exp(-0.5 * sigma2 * np.asarray(t) ** 2) + 0j
        target = {"kind": "normal", "sigma2": sigma2}
        cap = None
    ks = np.array([ks_distance(law, target_cdf, eval_cap=cap) for law in laws])
    cf = np.array([cf_distance(law, target_cf, t_grid) for law in laws])
    laws = [law.with_distances(ks=float(k), cf=float(c))
            for law, k, c in zip(laws, ks, cf)]
    return LimitReport(spec=spec, laws=laws, ks=ks, cf=cf, target=target,
                       ks_trend=bool(np.all(np.diff(ks) <= 0)),
                       cf_trend=bool(np.all(np.diff(cf) <= 0)))
