"""Numeric kernel backends for the hot per-axis loops.

A compiled extension (`_native`, Cython) is preferred when present; the
pure-numpy module `_numpy` provides the same API and semantics otherwise.
Set LRFBENCH_KERNELS=numpy or =native to force a backend; forcing `native`
raises if the extension was not built.
"""
import os

from . import _numpy

_requested = os.environ.get("LRFBENCH_KERNELS", "").strip().lower()

if _requested == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        _impl = _numpy
        BACKEND = "numpy"

eigh3 = _impl.eigh3
point_covariance = _impl.point_covariance
mesh_covariance = _impl.mesh_covariance
projected_direction_sum = _impl.projected_direction_sum
max_height_border_index = _impl.max_height_border_index
min_normal_dot_border_index = _impl.min_normal_dot_border_index
radial_weights = _impl.radial_weights

__all__ = [
    "BACKEND",
    "eigh3",
    "point_covariance",
    "mesh_covariance",
    "projected_direction_sum",
    "max_height_border_index",
    "min_normal_dot_border_index",
    "radial_weights",
]
