"""Geometric primitives: point clouds, triangle meshes, rigid transforms,
spatial queries, normal estimation and mesh resolution.

All types are immutable after construction (arrays are marked read-only) and
all operations are pure functions, so they are safe to call concurrently.
Lengths are stored in model units; conversions from mesh-resolution multiples
happen at the harness level, never inside these kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateNeighborhood,
    EmptyRegion,
    NotARigidTransform,
    TooFewPoints,
)

_UNIT_TOL = 1e-6


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _as_points(a, name: str = "points") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {a.shape}")
    return a


@dataclass
class PointCloud:
    """An ordered set of 3D points with optional unit normals."""

    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pts = _as_points(self.points)
        if len(pts) == 0:
            raise ValueError("point cloud must be non-empty")
        self.points = _freeze(pts)
        if self.normals is not None:
            nrm = _as_points(self.normals, "normals")
            if len(nrm) != len(pts):
                raise ValueError("normals must match points in length")
            lengths = np.linalg.norm(nrm, axis=1)
            if np.any(np.abs(lengths - 1.0) > _UNIT_TOL):
                raise ValueError("normals must be unit length")
            self.normals = _freeze(nrm)

    def __len__(self) -> int:
        return len(self.points)

    def with_normals(self, normals: np.ndarray) -> "PointCloud":
        return PointCloud(self.points, normals)


@dataclass
class TriangleMesh:
    """Indexed triangle mesh with optional per-vertex unit normals."""

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_normals: np.ndarray | None = None

    def __post_init__(self):
        verts = _as_points(self.vertices, "vertices")
        tris = np.asarray(self.triangles, dtype=np.int64)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError(f"triangles must have shape (t, 3), got {tris.shape}")
        if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
            raise ValueError("triangle index out of range")
        if len(tris):
            a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
            if np.any((a == b) | (b == c) | (a == c)):
                raise ValueError("triangle repeats a vertex index")
        self.vertices = _freeze(verts)
        self.triangles = _freeze(tris)
        if self.vertex_normals is not None:
            nrm = _as_points(self.vertex_normals, "vertex_normals")
            if len(nrm) != len(verts):
                raise ValueError("vertex_normals must match vertices in length")
            self.vertex_normals = _freeze(nrm)

    def unique_edges(self) -> np.ndarray:
        """All undirected edges, each listed once, as (e, 2) index pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [0, 2]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def as_cloud(self) -> PointCloud:
        return PointCloud(self.vertices, self.vertex_normals)


@dataclass
class RigidTransform:
    """Rotation plus translation; rotation is checked to be a proper rotation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise NotARigidTransform(f"rotation must be 3x3, got {r.shape}")
        drift = np.abs(r.T @ r - np.eye(3)).max()
        if drift > 1e-9:
            raise NotARigidTransform(f"rotation not orthonormal (drift {drift:.2e})")
        det = np.linalg.det(r)
        if abs(det - 1.0) > 1e-9:
            raise NotARigidTransform(f"rotation determinant {det} != +1")
        self.rotation = _freeze(r)
        self.translation = _freeze(t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        if m.shape == (4, 4):
            bottom = m[3]
            if np.abs(bottom - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-6:
                raise NotARigidTransform("last row of 4x4 matrix must be [0 0 0 1]")
            m = m[:3]
        if m.shape != (3, 4):
            raise NotARigidTransform(f"expected 3x4 or 4x4 matrix, got {m.shape}")
        return cls(m[:, :3], m[:, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self @ other)(p) = self(other(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts) @ self.rotation.T + self.translation

    def apply_vectors(self, vecs: np.ndarray) -> np.ndarray:
        return np.asarray(vecs) @ self.rotation.T


def random_transform(rng: np.random.Generator, max_translation: float = 1.0) -> RigidTransform:
    """Uniform random rotation (quaternion method) plus bounded translation."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    r = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    # Re-project to guard against rounding drift in the orthonormality check.
    u, _, vt = np.linalg.svd(r)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    t = rng.uniform(-max_translation, max_translation, size=3)
    return RigidTransform(r, t)


class SpatialIndex:
    """Balanced kd-tree over a cloud's points for exact radius queries."""

    def __init__(self, cloud: PointCloud):
        self._points = cloud.points
        self._tree = cKDTree(self._points)

    @property
    def points(self) -> np.ndarray:
        return self._points

    def radius_neighbors(self, center, radius: float) -> np.ndarray:
        """Indices of all points within `radius` of `center`, ascending.

        Points exactly coincident with the center are excluded: a keypoint
        is not its own neighbor.
        """
        if radius <= 0:
            raise ValueError("radius must be positive")
        center = np.asarray(center, dtype=np.float64).reshape(3)
        idx = self._tree.query_ball_point(center, radius)
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        if len(idx):
            dup = np.all(self._points[idx] == center, axis=1)
            if dup.any():
                idx = idx[~dup]
        return idx

    def nearest(self, query, k: int = 1):
        """(distances, indices) of the k nearest points to each query point."""
        return self._tree.query(np.asarray(query, dtype=np.float64), k=k)


def radius_neighbors(index: SpatialIndex, center, radius: float) -> np.ndarray:
    return index.radius_neighbors(center, radius)


def local_mesh(mesh: TriangleMesh, center, radius: float) -> TriangleMesh:
    """Submesh of triangles whose three vertices all lie within `radius`.

    Vertices are re-indexed compactly; triangle order follows the input mesh.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=np.float64).reshape(3)
    d2 = np.einsum("ij,ij->i", mesh.vertices - center, mesh.vertices - center)
    inside = d2 <= radius * radius
    return _submesh(mesh, inside)


def _submesh(mesh: TriangleMesh, vertex_mask: np.ndarray) -> TriangleMesh:
    tri_mask = vertex_mask[mesh.triangles].all(axis=1)
    if not tri_mask.any():
        raise EmptyRegion("no triangle lies fully inside the region")
    tris = mesh.triangles[tri_mask]
    kept, inverse = np.unique(tris, return_inverse=True)
    normals = mesh.vertex_normals[kept] if mesh.vertex_normals is not None else None
    return TriangleMesh(mesh.vertices[kept], inverse.reshape(-1, 3), normals)


def normal_from_points(neighbors: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit normal of a neighborhood: smallest eigenvector of its covariance.

    Returns (normal, gap) where gap is the spread between the two smallest
    eigenvalues. Raises DegenerateNeighborhood when that spread is below
    1e-12 (relative to max(1, trace)), i.e. the direction is ill-defined.
    """
    pts = _as_points(neighbors, "neighbors")
    d = pts - pts.mean(axis=0)
    cov = d.T @ d / len(pts)
    w, v = np.linalg.eigh(cov)
    gap = w[1] - w[0]
    if gap <= 1e-12 * max(1.0, w.sum()):
        raise DegenerateNeighborhood("two smallest eigenvalues coincide")
    return v[:, 0], gap


def _lexicographic_sign(v: np.ndarray) -> np.ndarray:
    """Representative of {v, -v} whose first nonzero component is positive."""
    for c in v:
        if c > 0:
            return v
        if c < 0:
            return -v
    return v


def estimate_normals(
    cloud: PointCloud, k: int = 10, viewpoint=None
) -> tuple[PointCloud, np.ndarray]:
    """Per-point normals from k-NN covariance.

    Orientation: toward `viewpoint` when given, otherwise away from the local
    neighborhood centroid. Points whose two smallest covariance eigenvalues
    coincide (direction ill-defined) are reported in the returned index array;
    they keep the solver's eigenvector so the output normals stay unit length.
    """
    if k < 3:
        raise ValueError("k must be at least 3")
    pts = cloud.points
    if len(pts) < k + 1:
        raise TooFewPoints(f"need at least {k + 1} points, have {len(pts)}")
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=k + 1)
    # Drop each point from its own neighbor list (first column after sorting
    # by distance; guard against duplicate coordinates).
    neigh = np.empty((len(pts), k), dtype=np.int64)
    for i in range(len(pts)):
        row = idx[i]
        row = row[row != i][:k]
        if len(row) < k:
            row = np.concatenate([row, idx[i][: k - len(row)]])
        neigh[i] = row

    nbr = pts[neigh]  # (n, k, 3)
    centered = nbr - nbr.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    w, v = np.linalg.eigh(cov)
    normals = v[:, :, 0].copy()
    gaps = w[:, 1] - w[:, 0]
    degenerate = np.flatnonzero(gaps <= 1e-12 * np.maximum(1.0, w.sum(axis=1)))

    if viewpoint is not None:
        viewpoint = np.asarray(viewpoint, dtype=np.float64).reshape(3)
        toward = viewpoint - pts
        flip = np.einsum("ij,ij->i", normals, toward) < 0
        normals[flip] = -normals[flip]
    else:
        away = pts - nbr.mean(axis=1)
        dots = np.einsum("ij,ij->i", normals, away)
        flip = dots < 0
        normals[flip] = -normals[flip]
        for i in np.flatnonzero(dots == 0):
            normals[i] = _lexicographic_sign(normals[i])

    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / lengths
    return cloud.with_normals(normals), degenerate


def mesh_vertex_normals(mesh: TriangleMesh) -> np.ndarray:
    """Area-weighted vertex normals from triangle winding.

    Orientation comes from the mesh's consistent winding, so there is no sign
    ambiguity. Vertices with no non-degenerate incident triangle fall back to
    +z.
    """
    v = mesh.vertices[mesh.triangles]
    face = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    acc = np.zeros_like(mesh.vertices)
    for c in range(3):
        np.add.at(acc, mesh.triangles[:, c], face)
    lengths = np.linalg.norm(acc, axis=1)
    bad = lengths < 1e-300
    acc[bad] = (0.0, 0.0, 1.0)
    lengths[bad] = 1.0
    return acc / lengths[:, None]


def mesh_resolution(geometry) -> float:
    """Average resolution: mean unique-edge length for meshes, mean
    nearest-neighbor distance for bare clouds."""
    if isinstance(geometry, TriangleMesh):
        edges = geometry.unique_edges()
        if len(edges) == 0:
            raise ValueError("mesh has no edges")
        seg = geometry.vertices[edges[:, 0]] - geometry.vertices[edges[:, 1]]
        return float(np.linalg.norm(seg, axis=1).mean())
    if isinstance(geometry, PointCloud):
        if len(geometry) < 2:
            raise TooFewPoints("cloud resolution needs at least 2 points")
        tree = cKDTree(geometry.points)
        d, _ = tree.query(geometry.points, k=2)
        return float(d[:, 1].mean())
    raise TypeError(f"unsupported geometry type {type(geometry)!r}")


def apply_transform(geometry, transform: RigidTransform):
    """Rigidly move a cloud or mesh; normals rotate, connectivity is kept."""
    if isinstance(geometry, PointCloud):
        normals = (
            transform.apply_vectors(geometry.normals)
            if geometry.normals is not None
            else None
        )
        return PointCloud(transform.apply_points(geometry.points), normals)
    if isinstance(geometry, TriangleMesh):
        normals = (
            transform.apply_vectors(geometry.vertex_normals)
            if geometry.vertex_normals is not None
            else None
        )
        return TriangleMesh(
            transform.apply_points(geometry.vertices), geometry.triangles, normals
        )
    raise TypeError(f"unsupported geometry type {type(geometry)!r}")


@dataclass
class Surface:
    """A scan with both representations: a point cloud and, when available,
    the triangle mesh it came from. Caches the spatial index, resolution and
    vertex-to-triangle incidence used by the axis methods."""

    cloud: PointCloud
    mesh: TriangleMesh | None = None

    @classmethod
    def from_mesh(cls, mesh: TriangleMesh) -> "Surface":
        return cls(mesh.as_cloud(), mesh)

    @cached_property
    def index(self) -> SpatialIndex:
        return SpatialIndex(self.cloud)

    @cached_property
    def mr(self) -> float:
        return mesh_resolution(self.mesh if self.mesh is not None else self.cloud)

    @cached_property
    def _incidence(self):
        """CSR-style vertex -> incident triangle lists."""
        tris = self.mesh.triangles
        flat = tris.ravel()
        order = np.argsort(flat, kind="stable")
        tri_ids = np.repeat(np.arange(len(tris), dtype=np.int64), 3)[order]
        counts = np.bincount(flat, minlength=len(self.mesh.vertices))
        starts = np.concatenate([[0], np.cumsum(counts)])
        return starts, tri_ids

    def local_mesh(self, center, radius: float) -> TriangleMesh:
        """Same result as geometry.local_mesh but using cached incidence,
        so cost scales with the neighborhood instead of the whole mesh."""
        if self.mesh is None:
            raise ValueError("surface has no mesh")
        idx = self.index.radius_neighbors(center, radius)
        center = np.asarray(center, dtype=np.float64).reshape(3)
        # radius_neighbors excludes an exact-duplicate keypoint; for region
        # membership the center vertex itself counts.
        exact = np.flatnonzero(np.all(self.cloud.points == center, axis=1))
        if len(exact):
            idx = np.union1d(idx, exact)
        if len(idx) == 0:
            raise EmptyRegion("no vertex inside the region")
        starts, tri_ids = self._incidence
        chunks = [tri_ids[starts[i] : starts[i + 1]] for i in idx]
        candidates = np.unique(np.concatenate(chunks)) if chunks else np.empty(0, np.int64)
        inside = np.zeros(len(self.mesh.vertices), dtype=bool)
        inside[idx] = True
        tris = self.mesh.triangles[candidates]
        keep = inside[tris].all(axis=1)
        if not keep.any():
            raise EmptyRegion("no triangle lies fully inside the region")
        tris = tris[keep]
        kept, inverse = np.unique(tris, return_inverse=True)
        normals = (
            self.mesh.vertex_normals[kept]
            if self.mesh.vertex_normals is not None
            else None
        )
        return TriangleMesh(self.mesh.vertices[kept], inverse.reshape(-1, 3), normals)

    def transformed(self, transform: RigidTransform) -> "Surface":
        mesh = apply_transform(self.mesh, transform) if self.mesh is not None else None
        return Surface(apply_transform(self.cloud, transform), mesh)
