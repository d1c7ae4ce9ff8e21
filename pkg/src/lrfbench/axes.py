"""Axis construction for local reference frames.

Each axis recipe is a direction method (point/mesh/projected covariance or a
geometric attribute), an optional neighbor weighting, and for covariance
methods a sign disambiguation rule. Frames combine a z-axis and an x-axis;
y completes the right-handed triple.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    AllZeroWeights,
    DegenerateAxis,
    DegenerateHeights,
    DegenerateSpectrum,
    EmptyRegion,
    MissingNormals,
    NoBorderPoints,
    ParallelAxes,
    ZeroTotalArea,
)
from .geometry import Surface, TriangleMesh, _lexicographic_sign

BORDER_FRACTION = 0.85  # border annulus for salient-point x-axis methods
EIGENGAP_TOL = 1e-9

W0, WR, WA, WH, WR_WA, WR_WH = "w0", "wr", "wa", "wh", "wr*wa", "wr*wh"

POINT_DIRECTIONS = frozenset({"CA-P-k", "CA-P-b", "CA-sP-k", "CA-sP-b"})
SMALL_DIRECTIONS = frozenset({"CA-sP-k", "CA-sP-b"})
MESH_DIRECTIONS = frozenset({"CA-M-k", "CA-M-b"})
GA_DIRECTIONS = frozenset({"GA-mpP", "GA-mA", "GA-mH"})
Z_DEPENDENT_DIRECTIONS = frozenset({"CA-pP-k", "GA-mpP", "GA-mA", "GA-mH"})
ALL_DIRECTIONS = POINT_DIRECTIONS | MESH_DIRECTIONS | GA_DIRECTIONS | {"CA-pP-k"}

ADMISSIBLE_WEIGHTS = {
    "CA-P-k": (W0, WR),
    "CA-P-b": (W0, WR),
    "CA-sP-k": (W0, WR),
    "CA-sP-b": (W0, WR),
    "CA-M-k": (W0, WR, WA, WR_WA),
    "CA-M-b": (W0, WR, WA, WR_WA),
    "CA-pP-k": (W0, WR, WH, WR_WH),
    "GA-mpP": (W0, WR, WH, WR_WH),
    "GA-mA": (W0,),
    "GA-mH": (W0,),
}


@dataclass(frozen=True)
class AxisMethodSpec:
    """One named axis recipe: direction method x weight x disambiguation x
    support radius (in mesh-resolution multiples). Methods that orient an
    x-axis relative to an existing z-axis carry the z recipe as a dependency.
    """

    direction: str
    axis_kind: str
    weight: str = W0
    disambiguation: str = "normal-mean"
    support_radius_mr: float = 20.0
    z_dependency: "AxisMethodSpec | None" = None

    def __post_init__(self):
        if self.direction not in ALL_DIRECTIONS:
            raise ValueError(f"unknown direction method {self.direction!r}")
        if self.axis_kind not in ("z", "x"):
            raise ValueError(f"axis_kind must be 'z' or 'x', got {self.axis_kind!r}")
        if self.direction in SMALL_DIRECTIONS and self.axis_kind != "z":
            raise ValueError(f"{self.direction} only constructs a z-axis")
        if self.direction in Z_DEPENDENT_DIRECTIONS or self.direction == "CA-pP-k":
            if self.axis_kind != "x":
                raise ValueError(f"{self.direction} only constructs an x-axis")
        if self.weight not in ADMISSIBLE_WEIGHTS[self.direction]:
            raise ValueError(
                f"weight {self.weight!r} not admissible for {self.direction}"
            )
        if self.direction in GA_DIRECTIONS:
            if self.disambiguation != "none":
                raise ValueError("geometric-attribute methods take no disambiguation")
        else:
            if self.disambiguation not in ("points-mean", "normal-mean"):
                raise ValueError(
                    f"covariance methods need points-mean or normal-mean, "
                    f"got {self.disambiguation!r}"
                )
        needs_z = self.direction in Z_DEPENDENT_DIRECTIONS
        if needs_z and self.z_dependency is None:
            raise ValueError(f"{self.direction} requires a z_dependency")
        if not needs_z and self.z_dependency is not None:
            raise ValueError(f"{self.direction} takes no z_dependency")
        if self.z_dependency is not None and self.z_dependency.axis_kind != "z":
            raise ValueError("z_dependency must be a z-axis recipe")
        if self.support_radius_mr <= 0:
            raise ValueError("support_radius_mr must be positive")

    @property
    def name(self) -> str:
        return f"{self.direction}({self.axis_kind})"


@dataclass
class AxisDiagnostics:
    """Per-axis evaluation metadata so failures can be attributed."""

    neighbor_count: int
    eigengap: float | None = None
    triangle_count: int | None = None
    weight_fallback: bool = False
    z_dependency: "AxisDiagnostics | None" = None


@dataclass
class CovarianceAccumulator:
    """A 3x3 weighted second-moment matrix plus the total weight behind it."""

    matrix: np.ndarray
    total_weight: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise ValueError("covariance matrix must be symmetric")
        self.matrix = m


@dataclass
class Frame:
    """A local reference frame: origin plus a right-handed orthonormal triple."""

    origin: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        for name in ("x", "y", "z"):
            v = np.asarray(getattr(self, name), dtype=np.float64).reshape(3)
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError(f"{name} axis must be unit length")
            setattr(self, name, v)
        if (
            abs(self.x @ self.y) > 1e-9
            or abs(self.y @ self.z) > 1e-9
            or abs(self.x @ self.z) > 1e-9
        ):
            raise ValueError("axes must be pairwise orthogonal")
        if np.abs(self.y - np.cross(self.z, self.x)).max() > 1e-9:
            raise ValueError("y must equal z cross x")

    def basis(self) -> np.ndarray:
        """Axes as columns [x y z]; a proper rotation matrix."""
        return np.column_stack([self.x, self.y, self.z])


@dataclass
class Neighborhood:
    """Pre-gathered support region, used to time axis construction separately
    from the shared spatial query."""

    indices: np.ndarray
    points: np.ndarray
    normals: np.ndarray | None = None


# ---------------------------------------------------------------------------
# weights

def weight_radial(neighbor, keypoint, radius: float) -> float:
    """Radial falloff (R - distance)^2; zero exactly at the support boundary."""
    d = float(np.linalg.norm(np.asarray(neighbor, float) - np.asarray(keypoint, float)))
    return max(radius - d, 0.0) ** 2


def area_weights(local_mesh: TriangleMesh) -> np.ndarray:
    """Per-triangle area fractions; they sum to one."""
    v = local_mesh.vertices[local_mesh.triangles]
    cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    areas = np.linalg.norm(cross, axis=1)
    total = areas.sum()
    if total <= 0.0:
        raise ZeroTotalArea("all triangles in the local mesh are degenerate")
    return areas / total


def weight_area(triangle, local_mesh: TriangleMesh) -> float:
    """Area of one triangle (given as 3 vertices) over the local mesh total."""
    tri = np.asarray(triangle, dtype=np.float64).reshape(3, 3)
    area = np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    v = local_mesh.vertices[local_mesh.triangles]
    total = np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1).sum()
    if total <= 0.0:
        raise ZeroTotalArea("all triangles in the local mesh are degenerate")
    return float(area / total)


def height_weights(heights) -> np.ndarray:
    """Gaussian emphasis on the highest neighbors: exp(-(max(H)-h)^2/(2 d^2))
    with d = max(H)/9. Undefined when no neighbor rises above the keypoint."""
    h = np.asarray(heights, dtype=np.float64)
    if h.size == 0:
        raise ValueError("heights must be non-empty")
    hmax = float(h.max())
    if hmax <= 1e-12:
        raise DegenerateHeights("max height is not positive; scale undefined")
    delta = hmax / 9.0
    return np.exp(-((hmax - h) ** 2) / (2.0 * delta * delta))


def weight_height(heights, i: int) -> float:
    return float(height_weights(heights)[i])


# ---------------------------------------------------------------------------
# covariance builders

def barycenter(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("barycenter of an empty point set")
    return pts.mean(axis=0)


def _check_weights(weights, n: int) -> np.ndarray | None:
    if weights is None:
        return None
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if not np.any(w > 0):
        raise AllZeroWeights("every weight is zero")
    return w


def covariance_of_points(points, center, weights=None) -> CovarianceAccumulator:
    """(1/n) * sum_i w_i (p_i - c)(p_i - c)^T."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("covariance of an empty point set")
    center = np.asarray(center, dtype=np.float64).reshape(3)
    w = _check_weights(weights, len(pts))
    m = kernels.point_covariance(pts, center, w)
    total = float(len(pts)) if w is None else float(w.sum())
    return CovarianceAccumulator(m, total)


def triangle_covariance(vertices, center) -> np.ndarray:
    """Second moment of one triangle's surface about `center`, area-normalized:
    (1/12) * (sum_mn v_m v_n^T + sum_m v_m v_m^T) with v_m relative vertices."""
    verts = np.asarray(vertices, dtype=np.float64).reshape(3, 3)
    center = np.asarray(center, dtype=np.float64).reshape(3)
    tris = np.array([[0, 1, 2]], dtype=np.int64)
    return kernels.mesh_covariance(verts, tris, center, None)


def mesh_covariance(local_mesh: TriangleMesh, center, weights=None) -> CovarianceAccumulator:
    """Weighted sum of per-triangle surface second moments about `center`."""
    if len(local_mesh.triangles) == 0:
        raise ValueError("mesh covariance needs at least one triangle")
    center = np.asarray(center, dtype=np.float64).reshape(3)
    w = _check_weights(weights, len(local_mesh.triangles))
    m = kernels.mesh_covariance(local_mesh.vertices, local_mesh.triangles, center, w)
    total = float(len(local_mesh.triangles)) if w is None else float(w.sum())
    return CovarianceAccumulator(m, total)


def project_to_plane(points, keypoint, z) -> np.ndarray:
    """Orthogonal projection onto the plane through `keypoint` normal to `z`."""
    z = np.asarray(z, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(z) - 1.0) > 1e-9:
        raise ValueError("z must be a unit vector")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    kp = np.asarray(keypoint, dtype=np.float64).reshape(3)
    h = (pts - kp) @ z
    return pts - h[:, None] * z


# ---------------------------------------------------------------------------
# eigenvectors and disambiguation

def _as_matrix(c) -> np.ndarray:
    if isinstance(c, CovarianceAccumulator):
        return c.matrix
    return np.asarray(c, dtype=np.float64)


def _extremal_eigvec(m: np.ndarray, which: str) -> tuple[np.ndarray, float]:
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > 1e-9 * scale:
        raise ValueError("matrix must be symmetric")
    w, v = kernels.eigh3(m)
    trace = float(w.sum())
    if which == "min":
        lam, adj, vec = w[0], w[1], v[:, 0]
    else:
        lam, adj, vec = w[2], w[1], v[:, 2]
    gap = abs(float(lam - adj)) / max(trace, 1e-300)
    if gap < EIGENGAP_TOL:
        raise DegenerateSpectrum(
            f"{which} eigenvalue separated from its neighbor by only {gap:.3e}"
        )
    return vec, gap


def min_eigvec(c) -> tuple[np.ndarray, float]:
    """Unit eigenvector of the smallest eigenvalue plus its relative eigengap.
    Sign is unspecified; disambiguation decides it."""
    return _extremal_eigvec(_as_matrix(c), "min")


def max_eigvec(c) -> tuple[np.ndarray, float]:
    """Unit eigenvector of the largest eigenvalue plus its relative eigengap."""
    return _extremal_eigvec(_as_matrix(c), "max")


def disambiguate_points_mean(v, keypoint, neighbors) -> np.ndarray:
    """Orient v toward the side holding the mean of the neighbors."""
    v = np.asarray(v, dtype=np.float64).reshape(3)
    kp = np.asarray(keypoint, dtype=np.float64).reshape(3)
    pts = np.asarray(neighbors, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("neighbors must be non-empty")
    d = float(v @ (pts - kp).sum(axis=0))
    if d > 0:
        return v
    if d < 0:
        return -v
    return _lexicographic_sign(v)


def disambiguate_normal_mean(v, neighbor_normals) -> np.ndarray:
    """Orient v toward the mean direction of the neighbor normals."""
    v = np.asarray(v, dtype=np.float64).reshape(3)
    normals = np.asarray(neighbor_normals, dtype=np.float64).reshape(-1, 3)
    if len(normals) == 0:
        raise ValueError("normals must be non-empty")
    d = float((normals @ v).sum())
    if d > 0:
        return v
    if d < 0:
        return -v
    return _lexicographic_sign(v)


# ---------------------------------------------------------------------------
# geometric-attribute x-axes

def ga_mpp_axis(projected, keypoint, weights=None, radius: float = 1.0) -> np.ndarray:
    """Normalized weighted mean of the projected neighbor offsets.

    `radius` only scales the degeneracy threshold (1e-9 * radius)."""
    pts = np.asarray(projected, dtype=np.float64).reshape(-1, 3)
    kp = np.asarray(keypoint, dtype=np.float64).reshape(3)
    w = _check_weights(weights, len(pts))
    d = pts - kp
    s = d.sum(axis=0) if w is None else (d * w[:, None]).sum(axis=0)
    n = np.linalg.norm(s)
    if n < 1e-9 * radius:
        raise DegenerateAxis("projected neighbors cancel out")
    return s / n


def _salient_to_axis(salient, keypoint, z, radius: float) -> np.ndarray:
    d = np.asarray(salient, float) - keypoint
    proj = d - (d @ z) * z
    n = np.linalg.norm(proj)
    if n < 1e-9 * radius:
        raise DegenerateAxis("salient point projects onto the keypoint")
    return proj / n


def ga_ma_axis(neighbors, neighbor_normals, keypoint, keypoint_normal, z, radius: float) -> np.ndarray:
    """X-axis toward the border neighbor whose normal deviates most from the
    keypoint normal, projected into the plane orthogonal to z."""
    pts = np.asarray(neighbors, dtype=np.float64).reshape(-1, 3)
    normals = np.asarray(neighbor_normals, dtype=np.float64).reshape(-1, 3)
    kp = np.asarray(keypoint, dtype=np.float64).reshape(3)
    kn = np.asarray(keypoint_normal, dtype=np.float64).reshape(3)
    z = np.asarray(z, dtype=np.float64).reshape(3)
    i = kernels.min_normal_dot_border_index(pts, normals, kp, kn, BORDER_FRACTION * radius)
    if i < 0:
        raise NoBorderPoints("no neighbor beyond the border fraction")
    return _salient_to_axis(pts[i], kp, z, radius)


def ga_mh_axis(neighbors, keypoint, z, radius: float) -> np.ndarray:
    """X-axis toward the border neighbor with the greatest height along z."""
    pts = np.asarray(neighbors, dtype=np.float64).reshape(-1, 3)
    kp = np.asarray(keypoint, dtype=np.float64).reshape(3)
    z = np.asarray(z, dtype=np.float64).reshape(3)
    i = kernels.max_height_border_index(pts, kp, z, BORDER_FRACTION * radius)
    if i < 0:
        raise NoBorderPoints("no neighbor beyond the border fraction")
    return _salient_to_axis(pts[i], kp, z, radius)


# ---------------------------------------------------------------------------
# dispatch

def _point_weights(spec: AxisMethodSpec, pts, kp, radius, z) -> tuple[np.ndarray | None, bool]:
    """Weights for a point-set accumulation; returns (weights, fallback_flag).

    Height weights that are undefined (no neighbor above the keypoint plane)
    fall back to uniform, keeping only the radial factor if one was combined.
    """
    if spec.weight == W0:
        return None, False
    if spec.weight == WR:
        w = kernels.radial_weights(pts, kp, radius)
        if not np.any(w > 0):
            raise AllZeroWeights("all radial weights vanish")
        return w, False
    heights = (pts - kp) @ z
    try:
        wh = height_weights(heights)
    except DegenerateHeights:
        wh = None
    if spec.weight == WH:
        return (wh, False) if wh is not None else (None, True)
    # wr*wh
    wr = kernels.radial_weights(pts, kp, radius)
    w = wr if wh is None else wr * wh
    if not np.any(w > 0):
        raise AllZeroWeights("all combined weights vanish")
    return w, wh is None


def _mesh_weights(spec: AxisMethodSpec, lm: TriangleMesh, kp, radius) -> np.ndarray | None:
    if spec.weight == W0:
        return None
    if spec.weight == WA:
        return area_weights(lm)
    centroids = lm.vertices[lm.triangles].mean(axis=1)
    wr = kernels.radial_weights(centroids, kp, radius)
    if spec.weight == WR:
        w = wr
    else:  # wr*wa
        w = wr * area_weights(lm)
    if not np.any(w > 0):
        raise AllZeroWeights("all mesh weights vanish")
    return w


def _local_mesh_from_indices(surface: Surface, idx, keypoint_index) -> TriangleMesh:
    """Local mesh from an already-gathered vertex index set. The keypoint's
    own vertex belongs to the region even though it is not its own neighbor."""
    if surface.mesh is None:
        raise ValueError("mesh-based method needs a surface with a mesh")
    if keypoint_index is not None:
        idx = np.union1d(idx, [keypoint_index])
    if len(idx) == 0:
        raise EmptyRegion("no vertex inside the region")
    starts, tri_ids = surface._incidence
    chunks = [tri_ids[starts[i] : starts[i + 1]] for i in idx]
    candidates = np.unique(np.concatenate(chunks))
    inside = np.zeros(len(surface.mesh.vertices), dtype=bool)
    inside[idx] = True
    tris = surface.mesh.triangles[candidates]
    keep = inside[tris].all(axis=1)
    if not keep.any():
        raise EmptyRegion("no triangle lies fully inside the region")
    tris = tris[keep]
    kept, inverse = np.unique(tris, return_inverse=True)
    normals = (
        surface.mesh.vertex_normals[kept]
        if surface.mesh.vertex_normals is not None
        else None
    )
    return TriangleMesh(surface.mesh.vertices[kept], inverse.reshape(-1, 3), normals)


def _keypoint_normal(surface: Surface, kp, keypoint_index) -> np.ndarray:
    if surface.cloud.normals is None:
        raise MissingNormals("method needs per-point normals")
    if keypoint_index is not None:
        return surface.cloud.normals[keypoint_index]
    _, i = surface.index.nearest(kp)
    return surface.cloud.normals[int(i)]


def compute_axis(
    spec: AxisMethodSpec,
    surface: Surface,
    keypoint,
    mr: float,
    *,
    keypoint_index: int | None = None,
    z_axis=None,
    neighborhood: Neighborhood | None = None,
) -> tuple[np.ndarray, AxisDiagnostics]:
    """Evaluate one axis recipe at a keypoint.

    `keypoint_index` identifies the keypoint among the surface's cloud points
    (used for its normal and for mesh-region membership). A pre-gathered
    `neighborhood` skips the spatial query; small-region methods then select
    their subset from it. A precomputed `z_axis` overrides the recipe's
    z-dependency.
    """
    kp = np.asarray(keypoint, dtype=np.float64).reshape(3)
    radius = spec.support_radius_mr * mr

    z_diag = None
    if spec.direction in Z_DEPENDENT_DIRECTIONS and z_axis is None:
        z_axis, z_diag = compute_axis(
            spec.z_dependency, surface, kp, mr, keypoint_index=keypoint_index
        )
    if z_axis is not None:
        z_axis = np.asarray(z_axis, dtype=np.float64).reshape(3)

    gather_radius = radius / 3.0 if spec.direction in SMALL_DIRECTIONS else radius
    if neighborhood is None:
        idx = surface.index.radius_neighbors(kp, gather_radius)
        pts = surface.cloud.points[idx]
        nrm = surface.cloud.normals[idx] if surface.cloud.normals is not None else None
    else:
        idx, pts, nrm = neighborhood.indices, neighborhood.points, neighborhood.normals
        if spec.direction in SMALL_DIRECTIONS:
            d = pts - kp
            mask = np.einsum("ij,ij->i", d, d) <= gather_radius * gather_radius
            idx, pts = idx[mask], pts[mask]
            nrm = nrm[mask] if nrm is not None else None

    if len(pts) == 0:
        raise EmptyRegion("no neighbors inside the support region")

    diag = AxisDiagnostics(neighbor_count=len(pts), z_dependency=z_diag)
    which = "min" if spec.axis_kind == "z" else "max"

    if spec.direction in POINT_DIRECTIONS:
        center = kp if spec.direction.endswith("-k") else pts.mean(axis=0)
        w, diag.weight_fallback = _point_weights(spec, pts, kp, gather_radius, z_axis)
        cov = kernels.point_covariance(pts, center, w)
        v, diag.eigengap = _extremal_eigvec(cov, which)
    elif spec.direction == "CA-pP-k":
        w, diag.weight_fallback = _point_weights(spec, pts, kp, radius, z_axis)
        h = (pts - kp) @ z_axis
        proj = pts - h[:, None] * z_axis
        cov = kernels.point_covariance(proj, kp, w)
        v, diag.eigengap = _extremal_eigvec(cov, "max")
    elif spec.direction in MESH_DIRECTIONS:
        lm = _local_mesh_from_indices(surface, idx, keypoint_index)
        diag.triangle_count = len(lm.triangles)
        center = kp if spec.direction.endswith("-k") else pts.mean(axis=0)
        w = _mesh_weights(spec, lm, kp, radius)
        cov = kernels.mesh_covariance(lm.vertices, lm.triangles, center, w)
        v, diag.eigengap = _extremal_eigvec(cov, which)
    elif spec.direction == "GA-mpP":
        w, diag.weight_fallback = _point_weights(spec, pts, kp, radius, z_axis)
        s = kernels.projected_direction_sum(pts, kp, z_axis, w)
        n = np.linalg.norm(s)
        if n < 1e-9 * radius:
            raise DegenerateAxis("projected neighbors cancel out")
        return s / n, diag
    elif spec.direction == "GA-mA":
        if nrm is None:
            raise MissingNormals("GA-mA needs per-point normals")
        kn = _keypoint_normal(surface, kp, keypoint_index)
        i = kernels.min_normal_dot_border_index(
            pts, nrm, kp, kn, BORDER_FRACTION * radius
        )
        if i < 0:
            raise NoBorderPoints("no neighbor beyond the border fraction")
        return _salient_to_axis(pts[i], kp, z_axis, radius), diag
    else:  # GA-mH
        i = kernels.max_height_border_index(pts, kp, z_axis, BORDER_FRACTION * radius)
        if i < 0:
            raise NoBorderPoints("no neighbor beyond the border fraction")
        return _salient_to_axis(pts[i], kp, z_axis, radius), diag

    if spec.disambiguation == "points-mean":
        v = disambiguate_points_mean(v, kp, pts)
    else:
        if nrm is None:
            raise MissingNormals("normal-mean disambiguation needs normals")
        v = disambiguate_normal_mean(v, nrm)
    return v, diag


def assemble_frame(keypoint, z, x_raw) -> Frame:
    """Right-handed frame from a z-axis and a raw x direction.

    x is re-orthogonalized against z (minimal perturbation) because full-3D
    covariance x-axes are generally not exactly orthogonal to an independent z.
    """
    kp = np.asarray(keypoint, dtype=np.float64).reshape(3)
    z = np.asarray(z, dtype=np.float64).reshape(3)
    x_raw = np.asarray(x_raw, dtype=np.float64).reshape(3)
    for name, v in (("z", z), ("x_raw", x_raw)):
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError(f"{name} must be a unit vector")
    c = float(z @ x_raw)
    if abs(c) >= 1.0 - 1e-9:
        raise ParallelAxes("x direction is parallel to z")
    x = x_raw - c * z
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    y = y / np.linalg.norm(y)
    return Frame(kp, x, y, z)


def build_frame(
    z_spec: AxisMethodSpec,
    x_spec: AxisMethodSpec,
    surface: Surface,
    keypoint,
    mr: float,
    *,
    keypoint_index: int | None = None,
) -> tuple[Frame, AxisDiagnostics, AxisDiagnostics]:
    """Full frame: the z recipe first, then the x recipe reusing that z."""
    z, zd = compute_axis(z_spec, surface, keypoint, mr, keypoint_index=keypoint_index)
    x, xd = compute_axis(
        x_spec, surface, keypoint, mr, keypoint_index=keypoint_index, z_axis=z
    )
    return assemble_frame(keypoint, z, x), zd, xd
