"""Cross-backend agreement.

Digit/window arithmetic is integer work and must match bitwise. Float maps
may differ by an ulp between libm and numpy's vector routines, which chaos
amplifies along forward orbits, so trajectory comparisons stay short; the
backward pullback contracts, so it must agree tightly at any depth.
"""

import numpy as np
import pytest

from skewlab.backend import get_backend
from skewlab.circle import ParamCurve
from skewlab.rngstream import derive_seeds, splitmix64_next, word_to_digits
from skewlab.streams import stream_init, stream_single

try:
    COMP = get_backend("compiled")
except ImportError:  # pragma: no cover - build without the extension
    COMP = None

pytestmark = pytest.mark.skipif(COMP is None, reason="compiled backend missing")

CURVE = ParamCurve(0.75, 0.1, x0=0.3)
PURE = get_backend("pure")


def _pair(seeds):
    return stream_init(seeds), stream_init(seeds)


def test_windows_agree_bitwise():
    seeds = derive_seeds(1, 1, 128)
    sa, sb = _pair(seeds)
    PURE.skew_advance(sa, CURVE, 997)
    COMP.skew_advance(sb, CURVE, 997)
    assert np.array_equal(sa.win, sb.win)
    assert np.array_equal(sa.buf, sb.buf)
    assert np.array_equal(sa.sm, sb.sm)
    assert np.array_equal(sa.nrem, sb.nrem)


def test_scalar_maps_agree_to_ulps():
    rng = np.random.default_rng(2)
    for _ in range(5000):
        om, x = rng.random(), rng.random()
        y = rng.uniform(1e-9, 1.0)
        a = rng.uniform(0.05, 0.99)
        assert PURE.alpha_value(om, 0.75, 0.1, 0.3) == pytest.approx(
            COMP.alpha_value(om, 0.75, 0.1, 0.3), rel=1e-15
        )
        assert PURE.fibre_apply(x, a) == pytest.approx(
            COMP.fibre_apply(x, a), rel=1e-14, abs=1e-300
        )
        assert PURE.left_inverse_chain(y, a) == pytest.approx(
            COMP.left_inverse_chain(y, a), rel=1e-13
        )


def test_short_orbits_agree():
    seeds = derive_seeds(7, 3, 64)
    sa, sb = _pair(seeds)
    oa = np.empty((64, 10)); xa = np.empty((64, 10))
    ob = np.empty((64, 10)); xb = np.empty((64, 10))
    PURE.skew_orbit_chunk(sa, CURVE, oa, xa)
    COMP.skew_orbit_chunk(sb, CURVE, ob, xb)
    np.testing.assert_array_equal(oa, ob)  # omega comes from integers: exact
    np.testing.assert_allclose(xa, xb, atol=1e-13)


def test_base_chunk_agrees_exactly():
    seeds = derive_seeds(11, 4, 32)
    sa, sb = _pair(seeds)
    oa = np.empty((32, 2000))
    ob = np.empty((32, 2000))
    PURE.base_chunk(sa, oa)
    COMP.base_chunk(sb, ob)
    np.testing.assert_array_equal(oa, ob)
    assert np.array_equal(sa.x, sb.x)  # untouched


def test_pullback_agrees_at_depth():
    seeds = derive_seeds(13, 5, 48)
    ks = np.array([10, 100, 1000, 3000], dtype=np.int64)
    sa, sb = _pair(seeds)
    pa = PURE.pullback_milestones(sa, CURVE, ks)
    pb = COMP.pullback_milestones(sb, CURVE, ks)
    np.testing.assert_allclose(pa, pb, rtol=1e-12)
    assert np.array_equal(sa.win, sb.win)  # same digit consumption


def test_excursions_agree_distributionally():
    seeds = derive_seeds(17, 6, 256)
    sa, sb = _pair(seeds)
    PURE.steps_to_enter(sa, CURVE)
    COMP.steps_to_enter(sb, CURVE)
    assert np.array_equal(sa.win, sb.win)
    pa, ta = PURE.run_excursions(sa, CURVE, 100)
    pb, tb = COMP.run_excursions(sb, CURVE, 100)
    assert not ta.any() and not tb.any()
    # the first excursion sits inside the exact-agreement horizon; later ones
    # decorrelate (ulp drift + chaos), leaving only the law to compare, and
    # heavy tails make means fluctuate at N^(-1/4)
    assert (pa[:, 0] == pb[:, 0]).mean() > 0.95
    for t in (1, 2, 5, 20):
        assert abs((pa <= t).mean() - (pb <= t).mean()) < 0.02
    assert pa.mean() == pytest.approx(pb.mean(), rel=0.2)


def test_stream_matches_scalar_omega_path():
    # the batched stream and the scalar OmegaState consume the same digits
    from skewlab.circle import omega_from_digits

    seed = 424242
    st = stream_single(seed)
    s, _wx = splitmix64_next(seed)   # x draw
    s, w1 = splitmix64_next(s)       # window
    digits = word_to_digits(w1)
    for _ in range(8):               # buffer + spares
        s, w = splitmix64_next(s)
        digits += word_to_digits(w)
    om = omega_from_digits(digits)
    out = np.empty((1, 200))
    PURE.base_chunk(st, out)
    vals = []
    for _ in range(200):
        vals.append(om.value)
        om.advance()
    np.testing.assert_array_equal(out[0], vals)


def test_steps_to_enter_counts():
    seeds = derive_seeds(23, 8, 512)
    st = stream_init(seeds)
    before = st.x.copy()
    counts = COMP.steps_to_enter(st, CURVE)
    assert np.all(st.x > 0.5)
    assert np.all(counts[before > 0.5] == 0)
    assert np.all(counts[before <= 0.5] >= 1)


def test_run_excursions_requires_y():
    st = stream_init(derive_seeds(29, 9, 8))
    st.x[:] = 0.3
    for B in (PURE, COMP):
        with pytest.raises(ValueError):
            B.run_excursions(st, CURVE, 5)
