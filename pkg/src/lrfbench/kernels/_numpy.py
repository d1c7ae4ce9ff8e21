"""Pure-numpy implementations of the per-axis numeric kernels.

Semantics match the compiled backend; this module is the import-time fallback
and the reference for parity tests.
"""
from __future__ import annotations

import math

import numpy as np

_TIE_TOL = 1e-12


def _eigvec_for(c: np.ndarray, lam: float) -> np.ndarray:
    """Unit eigenvector of symmetric 3x3 `c` for eigenvalue `lam` via row
    cross products, with fallbacks for rank-deficient shifts."""
    m = c - lam * np.eye(3)
    r0, r1, r2 = m
    cands = (np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2))
    norms = [float(np.linalg.norm(v)) for v in cands]
    k = int(np.argmax(norms))
    if norms[k] > 1e-300:
        return cands[k] / norms[k]
    # Shifted matrix has rank <= 1: any vector orthogonal to its largest row.
    rows = (r0, r1, r2)
    rnorms = [float(np.linalg.norm(r)) for r in rows]
    j = int(np.argmax(rnorms))
    if rnorms[j] > 1e-300:
        u = rows[j] / rnorms[j]
        t = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        v = np.cross(u, t)
        return v / np.linalg.norm(v)
    return np.array([1.0, 0.0, 0.0])


def _residual(c: np.ndarray, lam: float, v: np.ndarray) -> float:
    return float(np.linalg.norm(c @ v - lam * v))


def eigh3(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (trigonometric) symmetric 3x3 eigendecomposition.

    Returns eigenvalues ascending and eigenvectors as matching columns.
    Eigenvector signs are unspecified. One Rayleigh-quotient refinement pass
    is applied to the extremal eigenvectors.
    """
    c = np.asarray(c, dtype=np.float64)
    a00, a11, a22 = c[0, 0], c[1, 1], c[2, 2]
    a01, a02, a12 = c[0, 1], c[0, 2], c[1, 2]
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    q = (a00 + a11 + a22) / 3.0
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    if p2 <= 0.0:
        return np.array([q, q, q]), np.eye(3)
    p = math.sqrt(p2 / 6.0)
    b = (c - q * np.eye(3)) / p
    r = np.linalg.det(b) / 2.0
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    w_hi = q + 2.0 * p * math.cos(phi)
    w_lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    w_mid = 3.0 * q - w_hi - w_lo
    w = np.array([w_lo, w_mid, w_hi])

    def _refined(lam: float) -> tuple[float, np.ndarray]:
        v = _eigvec_for(c, lam)
        lam2 = float(v @ c @ v)
        v2 = _eigvec_for(c, lam2)
        if _residual(c, lam2, v2) < _residual(c, lam, v):
            return lam2, v2
        return lam, v

    w0, v0 = _refined(w_lo)
    w2, v2 = _refined(w_hi)
    v1 = np.cross(v2, v0)
    n1 = np.linalg.norm(v1)
    if n1 > 1e-300:
        v1 = v1 / n1
    else:
        v1 = _eigvec_for(c, w_mid)
    w[0], w[2] = w0, w2
    vecs = np.column_stack([v0, v1, v2])
    return w, vecs


def point_covariance(pts: np.ndarray, center: np.ndarray, weights=None) -> np.ndarray:
    """(1/k) * sum_i w_i (p_i - c)(p_i - c)^T; w_i = 1 when weights is None."""
    d = pts - center
    if weights is None:
        return d.T @ d / len(pts)
    dw = d * weights[:, None]
    return dw.T @ d / len(pts)


def mesh_covariance(
    verts: np.ndarray, tris: np.ndarray, center: np.ndarray, weights=None
) -> np.ndarray:
    """Weighted sum of per-triangle second moments about `center`.

    Each triangle contributes (1/12) * (s s^T + sum_m v_m v_m^T) with
    v_m the vertices relative to the center and s their sum, which equals the
    triangle's area-normalized surface second moment.
    """
    v = verts[tris] - center  # (t, 3, 3)
    s = v.sum(axis=1)  # (t, 3)
    if weights is None:
        ws, wv = s, v
    else:
        ws = s * weights[:, None]
        wv = v * weights[:, None, None]
    acc = np.einsum("ti,tj->ij", ws, s) + np.einsum("tmi,tmj->ij", wv, v)
    return acc / 12.0


def projected_direction_sum(
    pts: np.ndarray, keypoint: np.ndarray, z: np.ndarray, weights=None
) -> np.ndarray:
    """sum_i w_i * ((p_i - kp) projected onto the plane orthogonal to z)."""
    d = pts - keypoint
    h = d @ z
    proj = d - h[:, None] * z
    if weights is None:
        return proj.sum(axis=0)
    return (proj * weights[:, None]).sum(axis=0)


def max_height_border_index(
    pts: np.ndarray, keypoint: np.ndarray, z: np.ndarray, border_min_dist: float
) -> int:
    """Index of the border point (distance > border_min_dist) with maximum
    height along z; ties within 1e-12 go to the smallest index. -1 if the
    border annulus is empty."""
    d = pts - keypoint
    dist2 = np.einsum("ij,ij->i", d, d)
    mask = dist2 > border_min_dist * border_min_dist
    if not mask.any():
        return -1
    h = np.where(mask, d @ z, -np.inf)
    hmax = h.max()
    return int(np.flatnonzero(h >= hmax - _TIE_TOL)[0])


def min_normal_dot_border_index(
    pts: np.ndarray,
    normals: np.ndarray,
    keypoint: np.ndarray,
    keypoint_normal: np.ndarray,
    border_min_dist: float,
) -> int:
    """Index of the border point whose normal deviates most from the keypoint
    normal (smallest dot product = largest angle); ties within 1e-12 go to the
    smallest index. -1 if the border annulus is empty."""
    d = pts - keypoint
    dist2 = np.einsum("ij,ij->i", d, d)
    mask = dist2 > border_min_dist * border_min_dist
    if not mask.any():
        return -1
    dots = np.where(mask, normals @ keypoint_normal, np.inf)
    dmin = dots.min()
    return int(np.flatnonzero(dots <= dmin + _TIE_TOL)[0])


def radial_weights(pts: np.ndarray, keypoint: np.ndarray, radius: float) -> np.ndarray:
    """(R - ||p_i - kp||)^2, clamped at zero for boundary rounding."""
    d = pts - keypoint
    dist = np.sqrt(np.einsum("ij,ij->i", d, d))
    w = radius - dist
    np.maximum(w, 0.0, out=w)
    return w * w
