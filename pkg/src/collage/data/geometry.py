"""Oriented-box geometry: pose fitting, signed distances, contact ramps.

Numpy paths are exact and validated (used by the generator, labels, and
metrics); torch paths mirror them differentiably for loss terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .. import _kernels
from ..errors import GeometryError
from .entities import CORNER_SIGNS

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class BoxPose:
    """center [3], rotation [3, 3] (columns are box axes), half_extents [3]."""

    center: np.ndarray
    rotation: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(
            self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        )
        object.__setattr__(
            self, "half_extents", np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        )
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise GeometryError(f"rotation is not orthonormal (max deviation {err:.2e})")
        if np.any(self.half_extents <= 0):
            raise GeometryError(f"half extents must be positive, got {self.half_extents}")

    def corners(self) -> np.ndarray:
        """World-frame corner positions [8, 3] in the canonical sign order."""
        local = CORNER_SIGNS * self.half_extents[None, :]
        return self.center[None, :] + local @ self.rotation.T


def box_pose_from_corners(corners: np.ndarray) -> BoxPose:
    """Recover a box pose from its 8 corners (canonical sign order).

    Exact for corners of a true oriented box; nearly-degenerate inputs raise.
    """
    c = np.asarray(corners, dtype=np.float64)
    if c.shape != (8, 3):
        raise GeometryError(f"corners must be [8, 3], got {c.shape}")
    center = c.mean(axis=0)
    axes = np.empty((3, 3))
    extents = np.empty(3)
    for a, bit in enumerate((4, 2, 1)):
        pos = np.array([bool(i & bit) for i in range(8)])
        # mean(+face) - mean(-face) = 2 h_a * axis_a; other axes cancel
        vec = (c[pos].mean(axis=0) - c[~pos].mean(axis=0)) / 2.0
        norm = np.linalg.norm(vec)
        if norm < 1e-9:
            raise GeometryError(f"degenerate box: axis {a} collapsed")
        axes[:, a] = vec / norm
        extents[a] = norm
    # Gram-Schmidt for robustness on imperfect corners; exact boxes unchanged.
    u0 = axes[:, 0]
    u1 = axes[:, 1] - (axes[:, 1] @ u0) * u0
    n1 = np.linalg.norm(u1)
    if n1 < 1e-9:
        raise GeometryError("degenerate box: first two axes are parallel")
    u1 = u1 / n1
    u2 = np.cross(u0, u1)
    rotation = np.stack([u0, u1, u2], axis=1)
    extents[1] = extents[1] * n1  # project raw y vector onto the orthonormal axis
    extents[2] = abs(axes[:, 2] @ u2) * extents[2]
    if np.any(extents <= 1e-9):
        raise GeometryError("degenerate box: zero extent")
    return BoxPose(center=center, rotation=rotation, half_extents=extents)


def signed_distance(points: np.ndarray, pose: BoxPose) -> np.ndarray:
    """Exact signed distance (m) to the box surface; negative inside.

    Accepts [..., 3]; returns matching leading shape, float64.
    """
    p = np.asarray(points, dtype=np.float64)
    lead = p.shape[:-1]
    if p.shape[-1] != 3:
        raise GeometryError(f"points must end in xyz, got shape {p.shape}")
    flat = np.ascontiguousarray(p.reshape(-1, 3))
    d = _kernels.box_signed_distance(flat, pose.center, pose.rotation, pose.half_extents)
    return np.asarray(d).reshape(lead)


def contact_ramp(distance: np.ndarray, threshold: float) -> np.ndarray:
    """Soft contact value in [0, 1]: 1 on the surface, 0 beyond threshold."""
    if threshold <= 0:
        raise GeometryError("contact threshold must be positive")
    return np.clip(1.0 - np.asarray(distance) / float(threshold), 0.0, 1.0)


# ---------------------------------------------------------------- torch side


def box_pose_from_corners_t(corners: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Differentiable pose fit from corner tensors [..., 8, 3].

    Returns (center [..., 3], rotation [..., 3, 3], half_extents [..., 3]).
    Half extents are clamped away from zero so downstream distances stay
    finite on degenerate reconstructions.
    """
    if corners.shape[-2:] != (8, 3):
        raise GeometryError(f"corners must be [..., 8, 3], got {tuple(corners.shape)}")
    center = corners.mean(dim=-2)
    axes = []
    raw_extents = []
    for bit in (4, 2, 1):
        pos = [bool(i & bit) for i in range(8)]
        neg = [not p for p in pos]
        vec = (corners[..., pos, :].mean(dim=-2) - corners[..., neg, :].mean(dim=-2)) / 2.0
        raw_extents.append(torch.linalg.vector_norm(vec, dim=-1))
        axes.append(vec)
    eps = 1e-8
    u0 = axes[0] / (raw_extents[0].unsqueeze(-1) + eps)
    v1 = axes[1] - (axes[1] * u0).sum(-1, keepdim=True) * u0
    n1 = torch.linalg.vector_norm(v1, dim=-1, keepdim=True)
    u1 = v1 / (n1 + eps)
    u2 = torch.cross(u0, u1, dim=-1)
    rotation = torch.stack([u0, u1, u2], dim=-1)
    h0 = raw_extents[0]
    h1 = n1.squeeze(-1)
    h2 = (axes[2] * u2).sum(-1).abs()
    half_extents = torch.stack([h0, h1, h2], dim=-1).clamp_min(1e-4)
    return center, rotation, half_extents


def box_signed_distance_t(
    points: torch.Tensor,
    center: torch.Tensor,
    rotation: torch.Tensor,
    half_extents: torch.Tensor,
) -> torch.Tensor:
    """Differentiable box signed distance.

    points [..., P, 3]; center [..., 3]; rotation [..., 3, 3]; half_extents
    [..., 3]. Returns [..., P].
    """
    rel = points - center.unsqueeze(-2)
    local = torch.einsum("...pi,...ij->...pj", rel, rotation)
    q = local.abs() - half_extents.unsqueeze(-2)
    outside = torch.linalg.vector_norm(q.clamp_min(0.0), dim=-1)
    inside = q.max(dim=-1).values.clamp_max(0.0)
    return outside + inside


def contact_ramp_t(distance: torch.Tensor, threshold: float) -> torch.Tensor:
    if threshold <= 0:
        raise GeometryError("contact threshold must be positive")
    return (1.0 - distance / threshold).clamp(0.0, 1.0)
