"""Feature flattening and z-score normalization.

Feature layout: an entity's frame [P, 3] flattens row-major to [3P], i.e.
feature index 3*p + axis. Stats are computed per entity kind over the
training split, in float64, with a std floor so constant features normalize
to exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .entities import InteractionSample, MotionSequence

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature mean/std for one entity kind."""

    kind: str
    mean: np.ndarray  # float64 [F]
    std: np.ndarray  # float64 [F], floored
    feature_layout: str = "frames[K,P,3] -> row-major [K,3P], feature 3*p+axis"

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64).reshape(-1))
        if self.mean.shape != self.std.shape:
            raise ConfigurationError("mean/std shape mismatch")
        if np.any(self.std <= 0):
            raise ConfigurationError("std must be positive (floor applies upstream)")

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "feature_layout": self.feature_layout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(
            kind=d["kind"],
            mean=np.asarray(d["mean"]),
            std=np.asarray(d["std"]),
            feature_layout=d.get("feature_layout", cls.feature_layout),
        )


def flatten_features(seq: MotionSequence) -> np.ndarray:
    """[K, P, 3] -> float32 [K, 3P]."""
    k = seq.frames.shape[0]
    return seq.frames.reshape(k, -1)


def unflatten_features(flat: np.ndarray, num_keypoints: int) -> np.ndarray:
    """float [K, 3P] -> [K, P, 3]."""
    flat = np.asarray(flat)
    if flat.ndim != 2 or flat.shape[1] != 3 * num_keypoints:
        raise ConfigurationError(
            f"expected [K, {3 * num_keypoints}] features, got {flat.shape}"
        )
    return flat.reshape(flat.shape[0], num_keypoints, 3)


def compute_normalization_stats(
    samples: list[InteractionSample], kind: str
) -> NormalizationStats:
    """Stats over every entity of ``kind`` across ``samples`` (float64)."""
    if kind not in ("agent", "object"):
        raise ConfigurationError(f"kind must be agent|object, got {kind!r}")
    rows = []
    for s in samples:
        group = s.humans if kind == "agent" else s.objects
        for seq in group:
            rows.append(flatten_features(seq).astype(np.float64))
    if not rows:
        raise ConfigurationError(f"no entities of kind {kind!r} to compute stats from")
    dims = {r.shape[1] for r in rows}
    if len(dims) != 1:
        raise ConfigurationError(f"inconsistent feature dims for kind {kind!r}: {sorted(dims)}")
    stacked = np.concatenate(rows, axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), STD_FLOOR)
    return NormalizationStats(kind=kind, mean=mean, std=std)


def normalize_features(flat: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """z-score in float64, returned as float32."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape[-1] != stats.dim:
        raise ConfigurationError(f"feature dim {flat.shape[-1]} != stats dim {stats.dim}")
    return ((flat - stats.mean) / stats.std).astype(np.float32)


def denormalize_features(normed: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    normed = np.asarray(normed, dtype=np.float64)
    if normed.shape[-1] != stats.dim:
        raise ConfigurationError(f"feature dim {normed.shape[-1]} != stats dim {stats.dim}")
    return (normed * stats.std + stats.mean).astype(np.float32)
