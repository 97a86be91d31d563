# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: nearest-codeword search and oriented-box signed distance.

Must match collage._kernels._py bit-for-bit on indices and to float64
round-off on distances (both accumulate in float64).
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

ctypedef fused floating:
    cnp.float32_t
    cnp.float64_t


@cython.boundscheck(False)
@cython.wraparound(False)
def nearest_codes(floating[:, ::1] x, floating[:, ::1] codebook):
    """Index of the nearest codebook row for each row of ``x``.

    Squared Euclidean distance accumulated in float64; ties resolve to the
    lowest index (strict < with ascending scan).
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t k = codebook.shape[0]
    if codebook.shape[1] != d:
        raise ValueError(f"dim mismatch: x has {d}, codebook has {codebook.shape[1]}")
    if k == 0:
        raise ValueError("empty codebook")
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out_v = out
    cdef Py_ssize_t i, j, c, best_c
    cdef double best, dist, diff
    for i in range(n):
        best = -1.0
        best_c = 0
        for c in range(k):
            dist = 0.0
            for j in range(d):
                diff = (<double> x[i, j]) - (<double> codebook[c, j])
                dist += diff * diff
            if best < 0.0 or dist < best:
                best = dist
                best_c = c
        out_v[i] = best_c
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
def box_signed_distance(
    cnp.float64_t[:, ::1] points,
    cnp.float64_t[::1] center,
    cnp.float64_t[:, ::1] rotation,
    cnp.float64_t[::1] half_extents,
):
    """Exact signed distance from points to an oriented box surface.

    Negative inside, zero on the surface. ``rotation`` columns are the box
    axes in world coordinates.
    """
    cdef Py_ssize_t n = points.shape[0]
    if points.shape[1] != 3 or rotation.shape[0] != 3 or rotation.shape[1] != 3:
        raise ValueError("points must be [N, 3], rotation [3, 3]")
    cdef Py_ssize_t a
    for a in range(3):
        if half_extents[a] <= 0.0:
            raise ValueError("half extents must be positive")
    out = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out_v = out
    cdef Py_ssize_t i, b
    cdef double rel0, rel1, rel2, loc, q, qmax, acc
    for i in range(n):
        rel0 = points[i, 0] - center[0]
        rel1 = points[i, 1] - center[1]
        rel2 = points[i, 2] - center[2]
        acc = 0.0
        qmax = -1e300
        for a in range(3):
            loc = rel0 * rotation[0, a] + rel1 * rotation[1, a] + rel2 * rotation[2, a]
            q = fabs(loc) - half_extents[a]
            if q > qmax:
                qmax = q
            if q > 0.0:
                acc += q * q
        out_v[i] = sqrt(acc) + (qmax if qmax < 0.0 else 0.0)
    return out
