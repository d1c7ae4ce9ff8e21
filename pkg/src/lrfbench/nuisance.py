"""Seeded nuisance generators and scene-composition metrics.

Every generator is a deterministic function of (input, config, seed). Noise
magnitudes are expressed in the units conventional for each kind: Gaussian
sigma in mesh-resolution multiples, decimation as a vertex-count fraction,
shot noise as an outlier ratio with a fixed displacement amplitude, keypoint
error as an absolute length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import MissingNormals, TooFewVertices
from .geometry import (
    PointCloud,
    RigidTransform,
    Surface,
    TriangleMesh,
    estimate_normals,
    mesh_vertex_normals,
)

NUISANCE_KINDS = (
    "gaussian-noise",
    "mesh-decimation",
    "shot-noise",
    "keypoint-error",
    "boundary-binning",
    "occlusion-binning",
    "clutter-binning",
    "overlap-binning",
)

# Generated (synthesized) kinds take a level; binning kinds group measured data.
SYNTHESIZED_KINDS = NUISANCE_KINDS[:4]
BINNING_KINDS = NUISANCE_KINDS[4:]


@dataclass(frozen=True)
class NuisanceConfig:
    kind: str
    level: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NUISANCE_KINDS:
            raise ValueError(f"unknown nuisance kind {self.kind!r}")
        if self.kind == "mesh-decimation" and not (0.0 < self.level <= 1.0):
            raise ValueError("decimation fraction must be in (0, 1]")
        if self.kind == "shot-noise" and not (0.0 <= self.level <= 1.0):
            raise ValueError("shot-noise ratio must be in [0, 1]")
        if self.kind in ("gaussian-noise", "keypoint-error") and self.level < 0:
            raise ValueError("level must be non-negative")


@dataclass(frozen=True)
class SceneComposition:
    """Occlusion / clutter / overlap fractions of a model-scene pair.
    Area-based fields are None when no mesh is available to measure them."""

    occlusion: float | None
    clutter: float | None
    overlap: float

    def __post_init__(self):
        for name in ("occlusion", "clutter", "overlap"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def _normal_estimation_k(cloud: PointCloud) -> int:
    return min(10, len(cloud) - 1)


def _recomputed_cloud_normals(points: np.ndarray, reference: np.ndarray | None) -> np.ndarray:
    """k-NN normals, sign-matched to the pre-nuisance normals when available
    so the cloud keeps a consistent global orientation."""
    cloud = PointCloud(points)
    est, _ = estimate_normals(cloud, k=_normal_estimation_k(cloud))
    normals = np.array(est.normals)
    if reference is not None and len(reference) == len(normals):
        flip = np.einsum("ij,ij->i", normals, reference) < 0
        normals[flip] = -normals[flip]
    return normals


def add_gaussian_noise(cloud: PointCloud, sigma_mr: float, mr: float, seed: int) -> PointCloud:
    """Isotropic per-coordinate Gaussian jitter with sigma = sigma_mr * mr.
    Normals are re-estimated afterwards (a zero sigma returns the input)."""
    if sigma_mr < 0:
        raise ValueError("sigma_mr must be non-negative")
    if sigma_mr == 0:
        return cloud
    rng = np.random.default_rng(seed)
    pts = cloud.points + rng.normal(0.0, sigma_mr * mr, size=cloud.points.shape)
    return PointCloud(pts, _recomputed_cloud_normals(pts, cloud.normals))


def decimate_mesh(mesh: TriangleMesh, fraction: float) -> TriangleMesh:
    """Vertex-clustering decimation targeting fraction * N vertices (within
    ten percent); cluster cells are found by bisecting the grid size."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return mesh
    verts = mesh.vertices
    n = len(verts)
    target = fraction * n
    if target < 4:
        raise TooFewVertices(f"decimation to {target:.0f} vertices is below 4")
    lo_pt = verts.min(axis=0)
    extent = float((verts.max(axis=0) - lo_pt).max())
    if extent == 0.0:
        raise TooFewVertices("mesh is a single point; cannot decimate")

    def cluster_count(cell: float) -> tuple[int, np.ndarray]:
        keys = np.floor((verts - lo_pt) / cell).astype(np.int64)
        _, labels = np.unique(keys, axis=0, return_inverse=True)
        return int(labels.max()) + 1, labels

    lo, hi = extent * 1e-4, extent
    best = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        count, labels = cluster_count(mid)
        if best is None or abs(count - target) < abs(best[0] - target):
            best = (count, labels, mid)
        if count > target:
            lo = mid
        else:
            hi = mid
        if abs(count - target) <= 0.02 * target:
            break
    count, labels, _ = best
    if count < 4:
        raise TooFewVertices(f"decimation collapsed the mesh to {count} vertices")

    new_verts = np.zeros((count, 3))
    np.add.at(new_verts, labels, verts)
    sizes = np.bincount(labels, minlength=count)
    new_verts /= sizes[:, None]

    tri_labels = labels[mesh.triangles]
    a, b, c = tri_labels[:, 0], tri_labels[:, 1], tri_labels[:, 2]
    keep = (a != b) & (b != c) & (a != c)
    tris = tri_labels[keep]
    if len(tris) == 0:
        raise TooFewVertices("decimation left no valid triangles")
    # Collapse duplicates that map to the same cluster triple.
    canon = np.sort(tris, axis=1)
    _, first = np.unique(canon, axis=0, return_index=True)
    tris = tris[np.sort(first)]
    out = TriangleMesh(new_verts, tris)
    return TriangleMesh(new_verts, tris, mesh_vertex_normals(out))


def add_shot_noise(cloud: PointCloud, ratio: float, amplitude: float, seed: int) -> PointCloud:
    """Displace exactly round(ratio * N) uniformly chosen points by
    `amplitude` along their pre-noise normals; normals are then re-estimated."""
    if not (0.0 <= ratio <= 1.0):
        raise ValueError("ratio must be in [0, 1]")
    if cloud.normals is None:
        raise MissingNormals("shot noise displaces points along normals")
    count = int(round(ratio * len(cloud)))
    if count == 0:
        return cloud
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(cloud), size=count, replace=False)
    pts = cloud.points.copy()
    pts[chosen] += amplitude * cloud.normals[chosen]
    return PointCloud(pts, _recomputed_cloud_normals(pts, cloud.normals))


def perturb_keypoints(keypoints, cloud: PointCloud, magnitude: float, seed: int) -> np.ndarray:
    """Offset each keypoint by `magnitude` in a uniformly random direction,
    then snap back to the nearest cloud point so keypoints stay on-surface."""
    if magnitude < 0:
        raise ValueError("magnitude must be non-negative")
    kps = np.asarray(keypoints, dtype=np.float64).reshape(-1, 3)
    if magnitude == 0:
        return kps.copy()
    rng = np.random.default_rng(seed)
    u = rng.normal(size=kps.shape)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    moved = kps + magnitude * u
    tree = cKDTree(cloud.points)
    _, idx = tree.query(moved)
    return cloud.points[idx].copy()


def boundary_edges(mesh: TriangleMesh) -> np.ndarray:
    """Edges with exactly one incident triangle, as (e, 2) vertex pairs."""
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [0, 2]]])
    e = np.sort(e, axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return uniq[counts == 1]


def _point_segment_distances(point: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray) -> np.ndarray:
    d = seg_b - seg_a
    length2 = np.einsum("ij,ij->i", d, d)
    length2 = np.where(length2 == 0.0, 1.0, length2)
    t = np.einsum("ij,ij->i", point - seg_a, d) / length2
    t = np.clip(t, 0.0, 1.0)
    closest = seg_a + t[:, None] * d
    return np.linalg.norm(point - closest, axis=1)


def distance_to_boundary(mesh: TriangleMesh, point) -> float:
    """Euclidean distance from `point` to the nearest boundary edge segment;
    +inf for a closed mesh."""
    edges = boundary_edges(mesh)
    if len(edges) == 0:
        return float("inf")
    p = np.asarray(point, dtype=np.float64).reshape(3)
    d = _point_segment_distances(p, mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]])
    return float(d.min())


def _visible_model_area(
    model: TriangleMesh, scene_points: np.ndarray, gt: RigidTransform, mr: float
) -> tuple[float, float]:
    """(visible area, total area): a model triangle is visible when its
    gt-transformed centroid has a scene point within 2 * mr."""
    centroids = model.vertices[model.triangles].mean(axis=1)
    moved = gt.apply_points(centroids)
    areas = model.triangle_areas()
    tree = cKDTree(scene_points)
    d, _ = tree.query(moved)
    visible = float(areas[d <= 2.0 * mr].sum())
    return visible, float(areas.sum())


def occlusion(model: TriangleMesh, scene, gt: RigidTransform, mr: float) -> float:
    """Fraction of model surface area missing from the scene."""
    scene_points = scene.vertices if isinstance(scene, TriangleMesh) else scene.points
    visible, total = _visible_model_area(model, scene_points, gt, mr)
    if total == 0.0:
        return 0.0
    return float(np.clip(1.0 - visible / total, 0.0, 1.0))


def clutter(model: TriangleMesh, scene: TriangleMesh, gt: RigidTransform, mr: float) -> float:
    """Fraction of scene surface area not explained by the model."""
    visible, _ = _visible_model_area(model, scene.vertices, gt, mr)
    scene_total = float(scene.triangle_areas().sum())
    if scene_total == 0.0:
        return 0.0
    return float(np.clip(1.0 - visible / scene_total, 0.0, 1.0))


def overlap(model: PointCloud, scene: PointCloud, gt: RigidTransform, mr: float) -> float:
    """Shared-surface fraction: points with a counterpart within 2 * mr on
    the other side, counted symmetrically, over min(#model, #scene)."""
    moved = gt.apply_points(model.points)
    model_tree = cKDTree(moved)
    scene_tree = cKDTree(scene.points)
    d_model, _ = scene_tree.query(moved)
    d_scene, _ = model_tree.query(scene.points)
    thresh = 2.0 * mr
    in_overlap = 0.5 * (float((d_model <= thresh).sum()) + float((d_scene <= thresh).sum()))
    denom = min(len(model), len(scene))
    return float(np.clip(in_overlap / denom, 0.0, 1.0))


def composition_of(
    model: Surface, scene: Surface, gt: RigidTransform, mr: float
) -> SceneComposition:
    occ = clu = None
    if model.mesh is not None:
        occ = occlusion(model.mesh, scene.mesh if scene.mesh is not None else scene.cloud, gt, mr)
        if scene.mesh is not None:
            clu = clutter(model.mesh, scene.mesh, gt, mr)
    return SceneComposition(occ, clu, overlap(model.cloud, scene.cloud, gt, mr))


def apply_nuisance(surface: Surface, config: NuisanceConfig, mr: float) -> Surface:
    """Nuisanced copy of a surface. Mesh-backed surfaces keep their mesh in
    sync and re-derive vertex normals from triangle winding; bare clouds
    re-estimate normals from neighborhoods."""
    if config.kind == "gaussian-noise":
        if config.level == 0:
            return surface
        rng = np.random.default_rng(config.seed)
        pts = surface.cloud.points + rng.normal(
            0.0, config.level * mr, size=surface.cloud.points.shape
        )
        return _rebuild(surface, pts)
    if config.kind == "mesh-decimation":
        if surface.mesh is None:
            raise ValueError("mesh decimation needs a mesh-backed surface")
        return Surface.from_mesh(decimate_mesh(surface.mesh, config.level))
    if config.kind == "shot-noise":
        if surface.cloud.normals is None:
            raise MissingNormals("shot noise displaces points along normals")
        count = int(round(config.level * len(surface.cloud)))
        if count == 0:
            return surface
        rng = np.random.default_rng(config.seed)
        chosen = rng.choice(len(surface.cloud), size=count, replace=False)
        pts = surface.cloud.points.copy()
        pts[chosen] += (20.0 * mr) * surface.cloud.normals[chosen]
        return _rebuild(surface, pts)
    if config.kind == "keypoint-error":
        # Handled at the harness level (perturbs keypoints, not geometry).
        return surface
    raise ValueError(f"{config.kind} is a binning nuisance, not a generator")


def _rebuild(surface: Surface, new_points: np.ndarray) -> Surface:
    if surface.mesh is not None:
        mesh = TriangleMesh(new_points, surface.mesh.triangles)
        mesh = TriangleMesh(new_points, surface.mesh.triangles, mesh_vertex_normals(mesh))
        return Surface.from_mesh(mesh)
    normals = _recomputed_cloud_normals(new_points, surface.cloud.normals)
    return Surface(PointCloud(new_points, normals))
