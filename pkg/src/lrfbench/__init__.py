"""lrfbench: local reference frame axis construction and benchmarking.

The package factors LRF construction into direction estimators, weighting
schemes and disambiguation rules, and ships the evaluation harness that
measures their repeatability and robustness over scan pairs.
"""

from .axes import (
    AxisDiagnostics,
    AxisMethodSpec,
    Frame,
    assemble_frame,
    build_frame,
    compute_axis,
)
from .errors import LrfError
from .evaluate import (
    RepeatabilityReport,
    ScenePair,
    angle_error,
    pose_errors,
    repeatability_run,
    transform_from_frames,
)
from .geometry import (
    PointCloud,
    RigidTransform,
    SpatialIndex,
    Surface,
    TriangleMesh,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .registry import METHOD_NAMES, make_spec, resolve_methods

__version__ = "0.1.0"

__all__ = [
    "AxisDiagnostics",
    "AxisMethodSpec",
    "Frame",
    "KERNEL_BACKEND",
    "LrfError",
    "METHOD_NAMES",
    "PointCloud",
    "RepeatabilityReport",
    "RigidTransform",
    "ScenePair",
    "SpatialIndex",
    "Surface",
    "TriangleMesh",
    "angle_error",
    "assemble_frame",
    "build_frame",
    "compute_axis",
    "make_spec",
    "pose_errors",
    "repeatability_run",
    "resolve_methods",
    "transform_from_frames",
]
