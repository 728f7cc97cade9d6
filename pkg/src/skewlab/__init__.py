"""Quenched intermittent skew products: simulation and limit-theorem lab.

A random composition of Pomeau-Manneville style interval maps driven by
x4 mod 1 on the circle, with the exponent varying smoothly along the base
orbit. The package simulates the system exactly (digit-stream base
arithmetic), measures its invariant density, return-time and tail
statistics, and tests the distributional limits of Birkhoff sums against
hand-rolled stable-law machinery.
"""

from .backend import BACKEND_NAME, COMPILED
from .circle import (
    OmegaState,
    ParamCurve,
    QuadratureError,
    alpha_eval,
    laplace_limit_constant,
    laplace_moment,
    omega_advance,
    omega_from_digits,
    omega_from_seed,
)
from .density import (
    DensityGrid,
    StarvedBinsWarning,
    TailFit,
    TailRangeWarning,
    constant_A,
    estimate_density,
    invariant_ensemble,
    sample_invariant,
    slice_extrapolation,
    slice_integral,
    tail_fit,
    transport_residual,
    xn_asymptotic_constant,
    xn_limit_constant,
)
from .fibre import (
    OrbitAccumulator,
    SkewPoint,
    iterate_orbit,
    lsv_deriv,
    lsv_left_inverse,
    lsv_map,
    skew_step,
)
from .limits import (
    EmpiricalLaw,
    HypothesisReport,
    LimitReport,
    Observable,
    PlateauWarning,
    ReductionReport,
    Regime,
    RegimeSpec,
    RegimeWarning,
    VarianceReport,
    birkhoff_ensemble,
    center_observable,
    cf_distance,
    classify_regime,
    ensemble_grid,
    hypothesis_suite,
    induced_reduction_check,
    ks_distance,
    limit_experiment,
    named_observable,
    normalizer,
    variance_estimate,
)
from .rngstream import derive_seed, derive_seeds
from .stable import StableLaw, stable_cdf, stable_cf, stable_sample, theorem_params
from .streams import StreamState, stream_init, stream_single

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "COMPILED",
    "DensityGrid",
    "EmpiricalLaw",
    "HypothesisReport",
    "LimitReport",
    "Observable",
    "OmegaState",
    "OrbitAccumulator",
    "ParamCurve",
    "PlateauWarning",
    "QuadratureError",
    "ReductionReport",
    "Regime",
    "RegimeSpec",
    "RegimeWarning",
    "SkewPoint",
    "StableLaw",
    "StarvedBinsWarning",
    "StreamState",
    "TailFit",
    "TailRangeWarning",
    "VarianceReport",
    "alpha_eval",
    "birkhoff_ensemble",
    "center_observable",
    "cf_distance",
    "classify_regime",
    "constant_A",
    "derive_seed",
    "derive_seeds",
    "ensemble_grid",
    "estimate_density",
    "hypothesis_suite",
    "induced_reduction_check",
    "invariant_ensemble",
    "iterate_orbit",
    "ks_distance",
    "laplace_limit_constant",
    "laplace_moment",
    "limit_experiment",
    "lsv_deriv",
    "lsv_left_inverse",
    "lsv_map",
    "named_observable",
    "normalizer",
    "omega_advance",
    "omega_from_digits",
    "omega_from_seed",
    "sample_invariant",
    "skew_step",
    "slice_extrapolation",
    "slice_integral",
    "stable_cdf",
    "stable_cf",
    "stable_sample",
    "stream_init",
    "stream_single",
    "tail_fit",
    "theorem_params",
    "transport_residual",
    "variance_estimate",
    "xn_asymptotic_constant",
    "xn_limit_constant",
    "__version__",
]
