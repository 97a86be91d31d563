"""Pure-numpy kernel implementations.

Semantics here are the reference; the compiled module in _native.pyx must
match them exactly (same dtypes, same tie-breaking).
"""

from __future__ import annotations

import numpy as np


def nearest_codes(x: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """Index of the nearest codebook row for each row of ``x``.

    Squared Euclidean distance accumulated in float64; ties resolve to the
    lowest index. ``x``: [N, D], ``codebook``: [K, D]; returns int64 [N].
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    cb = np.ascontiguousarray(codebook, dtype=np.float64)
    if x.ndim != 2 or cb.ndim != 2:
        raise ValueError("nearest_codes expects 2-d arrays")
    if x.shape[1] != cb.shape[1]:
        raise ValueError(f"dim mismatch: x has {x.shape[1]}, codebook has {cb.shape[1]}")
    if cb.shape[0] == 0:
        raise ValueError("empty codebook")
    # ||x - c||^2 = ||x||^2 + ||c||^2 - 2 x.c ; the ||x||^2 term is constant
    # per row but kept so constructed exact ties stay exact in float64.
    d2 = (x * x).sum(axis=1)[:, None] + (cb * cb).sum(axis=1)[None, :] - 2.0 * (x @ cb.T)
    return np.argmin(d2, axis=1).astype(np.int64)


def box_signed_distance(
    points: np.ndarray,
    center: np.ndarray,
    rotation: np.ndarray,
    half_extents: np.ndarray,
) -> np.ndarray:
    """Exact signed distance from points to an oriented box surface.

    Negative inside, zero on the surface, positive outside. ``points``:
    [N, 3]; ``rotation`` columns are the box axes in world coordinates.
    Returns float64 [N].
    """
    p = np.ascontiguousarray(points, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64).reshape(3)
    r = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
    h = np.asarray(half_extents, dtype=np.float64).reshape(3)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValueError("points must be [N, 3]")
    if np.any(h <= 0):
        raise ValueError("half extents must be positive")
    local = (p - c) @ r  # R^T (p - c), row-vector form
    q = np.abs(local) - h
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(np.max(q, axis=1), 0.0)
    return outside + inside
