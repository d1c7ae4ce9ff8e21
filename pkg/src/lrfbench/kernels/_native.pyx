# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot per-axis loops.

Same API and semantics as `_numpy`; accumulation is a plain serial loop so
results are deterministic for a fixed build.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, acos, cos, fabs, pi, sqrt

cnp.import_array()

cdef double TIE_TOL = 1e-12


cdef inline void _cross3(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _norm3(const double* a) noexcept nogil:
    return sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


cdef void _eigvec_for(const double* c, double lam, double* out) noexcept nogil:
    cdef double m[9]
    cdef double cand[9]
    cdef double norms[3]
    cdef double rnorms[3]
    cdef double t[3]
    cdef double n
    cdef int i, k, j
    for i in range(9):
        m[i] = c[i]
    m[0] -= lam
    m[4] -= lam
    m[8] -= lam
    _cross3(&m[0], &m[3], &cand[0])
    _cross3(&m[0], &m[6], &cand[3])
    _cross3(&m[3], &m[6], &cand[6])
    for i in range(3):
        norms[i] = _norm3(&cand[3 * i])
    k = 0
    if norms[1] > norms[k]:
        k = 1
    if norms[2] > norms[k]:
        k = 2
    if norms[k] > 1e-300:
        for i in range(3):
            out[i] = cand[3 * k + i] / norms[k]
        return
    # Shifted matrix has rank <= 1: any vector orthogonal to its largest row.
    for i in range(3):
        rnorms[i] = _norm3(&m[3 * i])
    j = 0
    if rnorms[1] > rnorms[j]:
        j = 1
    if rnorms[2] > rnorms[j]:
        j = 2
    if rnorms[j] > 1e-300:
        t[0] = 0.0
        t[1] = 0.0
        t[2] = 0.0
        if fabs(m[3 * j] / rnorms[j]) < 0.9:
            t[0] = 1.0
        else:
            t[1] = 1.0
        _cross3(&m[3 * j], t, out)
        n = _norm3(out)
        out[0] /= n
        out[1] /= n
        out[2] /= n
        return
    out[0] = 1.0
    out[1] = 0.0
    out[2] = 0.0


cdef double _residual(const double* c, double lam, const double* v) noexcept nogil:
    cdef double r[3]
    cdef int i
    for i in range(3):
        r[i] = c[3 * i] * v[0] + c[3 * i + 1] * v[1] + c[3 * i + 2] * v[2] - lam * v[i]
    return _norm3(r)


cdef double _rayleigh(const double* c, const double* v) noexcept nogil:
    cdef double r[3]
    cdef int i
    for i in range(3):
        r[i] = c[3 * i] * v[0] + c[3 * i + 1] * v[1] + c[3 * i + 2] * v[2]
    return r[0] * v[0] + r[1] * v[1] + r[2] * v[2]


cdef double _refined(const double* c, double lam, double* v) noexcept nogil:
    cdef double v2[3]
    cdef double lam2
    cdef int i
    _eigvec_for(c, lam, v)
    lam2 = _rayleigh(c, v)
    _eigvec_for(c, lam2, v2)
    if _residual(c, lam2, v2) < _residual(c, lam, v):
        for i in range(3):
            v[i] = v2[i]
        return lam2
    return lam


def eigh3(c_in):
    """Closed-form symmetric 3x3 eigendecomposition; eigenvalues ascending,
    eigenvectors as columns, signs unspecified."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef double cm[9]
    cdef double b[9]
    cdef double v0[3]
    cdef double v1[3]
    cdef double v2[3]
    cdef int i, j
    for i in range(3):
        for j in range(3):
            cm[3 * i + j] = c[i, j]
    cdef double p1 = cm[1] * cm[1] + cm[2] * cm[2] + cm[5] * cm[5]
    cdef double q = (cm[0] + cm[4] + cm[8]) / 3.0
    cdef double p2 = (cm[0] - q) ** 2 + (cm[4] - q) ** 2 + (cm[8] - q) ** 2 + 2.0 * p1
    w = np.empty(3, dtype=np.float64)
    vecs = np.empty((3, 3), dtype=np.float64)
    if p2 <= 0.0:
        w[:] = q
        vecs[:] = np.eye(3)
        return w, vecs
    cdef double p = sqrt(p2 / 6.0)
    for i in range(9):
        b[i] = cm[i]
    b[0] -= q
    b[4] -= q
    b[8] -= q
    for i in range(9):
        b[i] /= p
    cdef double detb = (
        b[0] * (b[4] * b[8] - b[5] * b[7])
        - b[1] * (b[3] * b[8] - b[5] * b[6])
        + b[2] * (b[3] * b[7] - b[4] * b[6])
    )
    cdef double r = detb / 2.0
    if r < -1.0:
        r = -1.0
    if r > 1.0:
        r = 1.0
    cdef double phi = acos(r) / 3.0
    cdef double w_hi = q + 2.0 * p * cos(phi)
    cdef double w_lo = q + 2.0 * p * cos(phi + 2.0 * pi / 3.0)
    cdef double w_mid = 3.0 * q - w_hi - w_lo
    cdef double w0 = _refined(cm, w_lo, v0)
    cdef double w2 = _refined(cm, w_hi, v2)
    _cross3(v2, v0, v1)
    cdef double n1 = _norm3(v1)
    if n1 > 1e-300:
        for i in range(3):
            v1[i] /= n1
    else:
        _eigvec_for(cm, w_mid, v1)
    w[0] = w0
    w[1] = w_mid
    w[2] = w2
    for i in range(3):
        vecs[i, 0] = v0[i]
        vecs[i, 1] = v1[i]
        vecs[i, 2] = v2[i]
    return w, vecs


def point_covariance(pts_in, center_in, weights=None):
    """(1/k) * sum_i w_i (p_i - c)(p_i - c)^T; w_i = 1 when weights is None."""
    cdef double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef double[::1] center = np.ascontiguousarray(center_in, dtype=np.float64)
    cdef double[::1] w
    cdef bint weighted = weights is not None
    if weighted:
        w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t k = pts.shape[0]
    cdef Py_ssize_t i
    cdef double dx, dy, dz, wi
    cdef double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0
    with nogil:
        for i in range(k):
            dx = pts[i, 0] - center[0]
            dy = pts[i, 1] - center[1]
            dz = pts[i, 2] - center[2]
            wi = w[i] if weighted else 1.0
            xx += wi * dx * dx
            xy += wi * dx * dy
            xz += wi * dx * dz
            yy += wi * dy * dy
            yz += wi * dy * dz
            zz += wi * dz * dz
    out = np.empty((3, 3), dtype=np.float64)
    cdef double inv = 1.0 / k
    out[0, 0] = xx * inv
    out[0, 1] = xy * inv
    out[0, 2] = xz * inv
    out[1, 0] = xy * inv
    out[1, 1] = yy * inv
    out[1, 2] = yz * inv
    out[2, 0] = xz * inv
    out[2, 1] = yz * inv
    out[2, 2] = zz * inv
    return out


def mesh_covariance(verts_in, tris_in, center_in, weights=None):
    """Weighted sum of per-triangle second moments about `center` using the
    12-term vertex formula (exact area-normalized surface moment)."""
    cdef double[:, ::1] verts = np.ascontiguousarray(verts_in, dtype=np.float64)
    cdef long long[:, ::1] tris = np.ascontiguousarray(tris_in, dtype=np.int64)
    cdef double[::1] center = np.ascontiguousarray(center_in, dtype=np.float64)
    cdef double[::1] w
    cdef bint weighted = weights is not None
    if weighted:
        w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t t = tris.shape[0]
    cdef Py_ssize_t i, m
    cdef long long vi
    cdef double vx[3]
    cdef double vy[3]
    cdef double vz[3]
    cdef double sx, sy, sz, wi
    cdef double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0
    with nogil:
        for i in range(t):
            sx = 0
            sy = 0
            sz = 0
            for m in range(3):
                vi = tris[i, m]
                vx[m] = verts[vi, 0] - center[0]
                vy[m] = verts[vi, 1] - center[1]
                vz[m] = verts[vi, 2] - center[2]
                sx += vx[m]
                sy += vy[m]
                sz += vz[m]
            wi = w[i] if weighted else 1.0
            xx += wi * (sx * sx + vx[0] * vx[0] + vx[1] * vx[1] + vx[2] * vx[2])
            xy += wi * (sx * sy + vx[0] * vy[0] + vx[1] * vy[1] + vx[2] * vy[2])
            xz += wi * (sx * sz + vx[0] * vz[0] + vx[1] * vz[1] + vx[2] * vz[2])
            yy += wi * (sy * sy + vy[0] * vy[0] + vy[1] * vy[1] + vy[2] * vy[2])
            yz += wi * (sy * sz + vy[0] * vz[0] + vy[1] * vz[1] + vy[2] * vz[2])
            zz += wi * (sz * sz + vz[0] * vz[0] + vz[1] * vz[1] + vz[2] * vz[2])
    out = np.empty((3, 3), dtype=np.float64)
    out[0, 0] = xx / 12.0
    out[0, 1] = xy / 12.0
    out[0, 2] = xz / 12.0
    out[1, 0] = xy / 12.0
    out[1, 1] = yy / 12.0
    out[1, 2] = yz / 12.0
    out[2, 0] = xz / 12.0
    out[2, 1] = yz / 12.0
    out[2, 2] = zz / 12.0
    return out


def projected_direction_sum(pts_in, keypoint_in, z_in, weights=None):
    """sum_i w_i * ((p_i - kp) projected onto the plane orthogonal to z)."""
    cdef double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef double[::1] kp = np.ascontiguousarray(keypoint_in, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(z_in, dtype=np.float64)
    cdef double[::1] w
    cdef bint weighted = weights is not None
    if weighted:
        w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t k = pts.shape[0]
    cdef Py_ssize_t i
    cdef double dx, dy, dz, h, wi
    cdef double sx = 0, sy = 0, sz = 0
    with nogil:
        for i in range(k):
            dx = pts[i, 0] - kp[0]
            dy = pts[i, 1] - kp[1]
            dz = pts[i, 2] - kp[2]
            h = dx * z[0] + dy * z[1] + dz * z[2]
            wi = w[i] if weighted else 1.0
            sx += wi * (dx - h * z[0])
            sy += wi * (dy - h * z[1])
            sz += wi * (dz - h * z[2])
    return np.array([sx, sy, sz])


def max_height_border_index(pts_in, keypoint_in, z_in, double border_min_dist):
    """First index attaining the maximum height along z among points farther
    than border_min_dist from the keypoint (ties within 1e-12); -1 if none."""
    cdef double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef double[::1] kp = np.ascontiguousarray(keypoint_in, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(z_in, dtype=np.float64)
    cdef Py_ssize_t k = pts.shape[0]
    cdef Py_ssize_t i
    cdef double dx, dy, dz, d2, h
    cdef double lim = border_min_dist * border_min_dist
    cdef double hmax = -INFINITY
    cdef Py_ssize_t best = -1
    with nogil:
        for i in range(k):
            dx = pts[i, 0] - kp[0]
            dy = pts[i, 1] - kp[1]
            dz = pts[i, 2] - kp[2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 <= lim:
                continue
            h = dx * z[0] + dy * z[1] + dz * z[2]
            if h > hmax:
                hmax = h
        if hmax > -INFINITY:
            for i in range(k):
                dx = pts[i, 0] - kp[0]
                dy = pts[i, 1] - kp[1]
                dz = pts[i, 2] - kp[2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 <= lim:
                    continue
                h = dx * z[0] + dy * z[1] + dz * z[2]
                if h >= hmax - TIE_TOL:
                    best = i
                    break
    return int(best)


def min_normal_dot_border_index(
    pts_in, normals_in, keypoint_in, keypoint_normal_in, double border_min_dist
):
    """First index minimizing normal dot (= maximum deviation angle) among
    border points (ties within 1e-12); -1 if the annulus is empty."""
    cdef double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef double[:, ::1] normals = np.ascontiguousarray(normals_in, dtype=np.float64)
    cdef double[::1] kp = np.ascontiguousarray(keypoint_in, dtype=np.float64)
    cdef double[::1] kn = np.ascontiguousarray(keypoint_normal_in, dtype=np.float64)
    cdef Py_ssize_t k = pts.shape[0]
    cdef Py_ssize_t i
    cdef double dx, dy, dz, d2, dot
    cdef double lim = border_min_dist * border_min_dist
    cdef double dmin = INFINITY
    cdef Py_ssize_t best = -1
    with nogil:
        for i in range(k):
            dx = pts[i, 0] - kp[0]
            dy = pts[i, 1] - kp[1]
            dz = pts[i, 2] - kp[2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 <= lim:
                continue
            dot = normals[i, 0] * kn[0] + normals[i, 1] * kn[1] + normals[i, 2] * kn[2]
            if dot < dmin:
                dmin = dot
        if dmin < INFINITY:
            for i in range(k):
                dx = pts[i, 0] - kp[0]
                dy = pts[i, 1] - kp[1]
                dz = pts[i, 2] - kp[2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 <= lim:
                    continue
                dot = normals[i, 0] * kn[0] + normals[i, 1] * kn[1] + normals[i, 2] * kn[2]
                if dot <= dmin + TIE_TOL:
                    best = i
                    break
    return int(best)


def radial_weights(pts_in, keypoint_in, double radius):
    """(R - ||p_i - kp||)^2, clamped at zero for boundary rounding."""
    cdef double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef double[::1] kp = np.ascontiguousarray(keypoint_in, dtype=np.float64)
    cdef Py_ssize_t k = pts.shape[0]
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] ow = out
    cdef Py_ssize_t i
    cdef double dx, dy, dz, d, wv
    with nogil:
        for i in range(k):
            dx = pts[i, 0] - kp[0]
            dy = pts[i, 1] - kp[1]
            dz = pts[i, 2] - kp[2]
            d = sqrt(dx * dx + dy * dy + dz * dz)
            wv = radius - d
            if wv < 0.0:
                wv = 0.0
            ow[i] = wv * wv
    return out
