"""Entity and sample containers.

Conventions used everywhere downstream:
  * world frame is right-handed, z up, meters;
  * motion arrays are float32 [K, P, 3] (frames, keypoints, xyz);
  * humans are 22-joint skeletons with the pelvis as keypoint 0;
  * boxes carry 9 keypoints: the root (center) followed by 8 corners ordered
    by the sign pattern (-/+x, -/+y, -/+z) with z fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, GeometryError

HUMAN_JOINT_NAMES: tuple[str, ...] = (
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
)

# Hands are the designated object-contact keypoints.
CONTACT_JOINT_NAMES: tuple[str, ...] = ("left_wrist", "right_wrist")
CONTACT_JOINT_INDICES: tuple[int, ...] = tuple(
    HUMAN_JOINT_NAMES.index(n) for n in CONTACT_JOINT_NAMES
)

# Corner index c encodes the axis signs: bit 2 -> x, bit 1 -> y, bit 0 -> z.
CORNER_SIGNS: np.ndarray = np.array(
    [[1.0 if c & 4 else -1.0, 1.0 if c & 2 else -1.0, 1.0 if c & 1 else -1.0] for c in range(8)]
)

OBJECT_KEYPOINT_NAMES: tuple[str, ...] = ("root",) + tuple(
    "corner_" + "".join("p" if s > 0 else "m" for s in signs) for signs in CORNER_SIGNS
)


@dataclass(frozen=True)
class EntitySpec:
    """Static description of one entity (an agent skeleton or a box)."""

    kind: str  # "agent" | "object"
    keypoint_names: tuple[str, ...]
    half_extents: tuple[float, float, float] | None = None  # objects only, meters

    def __post_init__(self) -> None:
        if self.kind not in ("agent", "object"):
            raise ConfigurationError(f"entity kind must be agent|object, got {self.kind!r}")
        if len(self.keypoint_names) < 1:
            raise ConfigurationError("entity needs at least one keypoint")
        if len(set(self.keypoint_names)) != len(self.keypoint_names):
            raise ConfigurationError("duplicate keypoint names")
        if self.kind == "object":
            if self.half_extents is None:
                raise ConfigurationError("object entities need half_extents")
            if any(h <= 0 for h in self.half_extents):
                raise GeometryError(f"half extents must be positive, got {self.half_extents}")
        elif self.half_extents is not None:
            raise ConfigurationError("agents do not take half_extents")

    @property
    def num_keypoints(self) -> int:
        return len(self.keypoint_names)

    @property
    def feature_dim(self) -> int:
        return 3 * self.num_keypoints


def human_spec() -> EntitySpec:
    return EntitySpec(kind="agent", keypoint_names=HUMAN_JOINT_NAMES)


def box_spec(half_extents: tuple[float, float, float]) -> EntitySpec:
    return EntitySpec(
        kind="object",
        keypoint_names=OBJECT_KEYPOINT_NAMES,
        half_extents=tuple(float(h) for h in half_extents),
    )


@dataclass
class MotionSequence:
    """One entity's trajectory: float32 [K, P, 3] world-frame keypoints."""

    entity: EntitySpec
    frames: np.ndarray
    fps: float = 30.0

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise ConfigurationError(f"frames must be [K, P, 3], got {self.frames.shape}")
        if self.frames.shape[0] < 2:
            raise ConfigurationError("a motion needs at least 2 frames")
        if self.frames.shape[1] != self.entity.num_keypoints:
            raise ConfigurationError(
                f"entity has {self.entity.num_keypoints} keypoints, frames have "
                f"{self.frames.shape[1]}"
            )
        if not np.isfinite(self.frames).all():
            raise ConfigurationError("non-finite values in motion frames")
        if self.fps <= 0:
            raise ConfigurationError("fps must be positive")

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


@dataclass
class InteractionSample:
    """A full multi-entity clip with text, contact labels, and factor values.

    contacts_gt is bool [K, n_humans, 2] over (left_wrist, right_wrist);
    factors_gt maps factor name to a float (discrete factors use small ints).
    """

    humans: list[MotionSequence]
    objects: list[MotionSequence]
    text: str
    contacts_gt: np.ndarray
    factors_gt: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.humans) < 1 or len(self.objects) < 1:
            raise ConfigurationError("a sample needs at least one human and one object")
        lengths = {m.num_frames for m in self.humans + self.objects}
        if len(lengths) != 1:
            raise ConfigurationError(f"entities disagree on frame count: {sorted(lengths)}")
        fps = {float(m.fps) for m in self.humans + self.objects}
        if len(fps) != 1:
            raise ConfigurationError("entities disagree on fps")
        for m in self.humans:
            if m.entity.kind != "agent":
                raise ConfigurationError("humans list contains a non-agent entity")
        for m in self.objects:
            if m.entity.kind != "object":
                raise ConfigurationError("objects list contains a non-object entity")
        self.contacts_gt = np.asarray(self.contacts_gt, dtype=bool)
        expected = (self.num_frames, len(self.humans), len(CONTACT_JOINT_NAMES))
        if self.contacts_gt.shape != expected:
            raise ConfigurationError(
                f"contacts_gt must be {expected}, got {self.contacts_gt.shape}"
            )
        if not self.text:
            raise ConfigurationError("sample text must be non-empty")
        self.factors_gt = {str(k): float(v) for k, v in self.factors_gt.items()}

    @property
    def num_frames(self) -> int:
        return self.humans[0].num_frames

    @property
    def fps(self) -> float:
        return float(self.humans[0].fps)
