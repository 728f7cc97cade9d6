"""Kernel backend selection.

The compiled extension is preferred when importable; SKEWLAB_BACKEND=pure
or SKEWLAB_BACKEND=compiled forces the choice (the latter raises if the
extension is missing, rather than silently degrading).
"""

from __future__ import annotations

import os

_choice = os.environ.get("SKEWLAB_BACKEND", "").strip().lower()

if _choice == "pure":
    from . import _pure as impl
elif _choice == "compiled":
    from . import _kernels as impl  # type: ignore[no-redef]
elif _choice in ("", "auto"):
    try:
        from . import _kernels as impl  # type: ignore[no-redef]
    except ImportError:
        from . import _pure as impl
else:
    raise RuntimeError(
        f"SKEWLAB_BACKEND={_choice!r} not recognized (use pure/compiled/auto)"
    )

COMPILED = bool(impl.COMPILED)
BACKEND_NAME = "compiled" if COMPILED else "pure"

skew_advance = impl.skew_advance
skew_orbit_chunk = impl.skew_orbit_chunk
base_chunk = impl.base_chunk
steps_to_enter = impl.steps_to_enter
run_excursions = impl.run_excursions
pullback_milestones = impl.pullback_milestones
fibre_apply = impl.fibre_apply
alpha_value = impl.alpha_value
left_inverse_chain = impl.left_inverse_chain


def get_backend(name: str):
    """Explicit backend module by name, for side-by-side comparisons."""
    if name == "pure":
        from . import _pure
        return _pure
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
