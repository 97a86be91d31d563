"""Synthetic two-agent box-carrying clips.

Every sample is produced by closed-form kinematics driven by five labeled
factors (carry_height, speed, heading, grasp_side, object_size) plus a
trajectory family. Both agents grip the box on opposite faces with both
hands; grip points are fixed in the box frame, so while contact is labeled
the hand keypoints sit exactly on the box surface and the object's motion is
kinematically consistent with the hands.

Determinism: one numpy Generator per sample, seeded from (run seed, index),
with a fixed draw order; overriding a factor does not perturb the draws of
the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..seeding import derive_seed
from .geometry import box_pose_from_corners, signed_distance
from .entities import (
    CONTACT_JOINT_INDICES,
    CORNER_SIGNS,
    HUMAN_JOINT_NAMES,
    EntitySpec,
    InteractionSample,
    MotionSequence,
    box_spec,
    human_spec,
)

FAMILIES = ("straight", "arc", "lift_place")
FACTOR_NAMES = ("carry_height", "speed", "heading", "grasp_side", "object_size")

# lift_place phase boundaries (fractions of the clip)
_GRAB = 0.2
_LIFT_END = 0.35
_CARRY_END = 0.75
_LOWER_END = 0.9

_J = {name: i for i, name in enumerate(HUMAN_JOINT_NAMES)}


@dataclass(frozen=True)
class GeneratorConfig:
    num_samples: int = 64
    num_frames: int = 64
    fps: float = 30.0
    families: tuple[str, ...] = FAMILIES
    carry_height_range: tuple[float, float] = (0.55, 1.35)
    speed_range: tuple[float, float] = (0.4, 1.4)
    object_size_range: tuple[float, float] = (0.5, 1.1)
    contact_threshold: float = 0.05
    split_ratios: tuple[float, float, float] = (0.8, 0.05, 0.15)

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise ConfigurationError("num_samples must be >= 1")
        if self.num_frames < 16:
            raise ConfigurationError("num_frames must be >= 16")
        if self.fps <= 0:
            raise ConfigurationError("fps must be positive")
        if not self.families or any(f not in FAMILIES for f in self.families):
            raise ConfigurationError(f"families must be a non-empty subset of {FAMILIES}")
        for name in ("carry_height_range", "speed_range", "object_size_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigurationError(f"{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        if self.contact_threshold <= 0:
            raise ConfigurationError("contact_threshold must be positive")
        r = self.split_ratios
        if len(r) != 3 or any(x < 0 for x in r) or abs(sum(r) - 1.0) > 1e-9:
            raise ConfigurationError(f"split_ratios must be 3 non-negatives summing to 1, got {r}")


def _smoothstep(u: np.ndarray | float) -> np.ndarray | float:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _heading_word(theta: float) -> str:
    words = (
        "forward",
        "forward and to the left",
        "to the left",
        "back and to the left",
        "backward",
        "back and to the right",
        "to the right",
        "forward and to the right",
    )
    octant = int(np.floor((theta + math.pi / 8) / (math.pi / 4))) % 8
    return words[octant]


def _size_word(s: float) -> str:
    return "small" if s < 0.7 else ("medium" if s < 0.9 else "large")


def _speed_word(v: float) -> str:
    return "slow" if v < 0.7 else ("steady" if v < 1.05 else "brisk")


def _height_word(h: float) -> str:
    if h < 0.75:
        return "knee"
    if h < 1.0:
        return "waist"
    return "chest" if h < 1.2 else "overhead"


def _side_word(side: float) -> str:
    return "left" if side < 0.5 else "right"


def factor_words(factors: dict[str, float]) -> dict[str, str]:
    """Bin factor values to the words used by text and cue templates."""
    return {
        "size": _size_word(factors["object_size"]),
        "speed": _speed_word(factors["speed"]),
        "height": _height_word(factors["carry_height"]),
        "side": _side_word(factors["grasp_side"]),
        "heading": _heading_word(factors["heading"]),
    }


def render_text(factors: dict[str, float], family: str) -> str:
    w = factor_words(factors)
    clause = {
        "straight": f"walk {w['heading']} in a straight line",
        "arc": f"follow a curving path {w['heading']}",
        "lift_place": f"lift it, carry it {w['heading']}, and set it down",
    }[family]
    return (
        f"Two people carry a {w['size']} box at {w['height']} height, gripping it toward "
        f"the {w['side']} side; they {clause} at a {w['speed']} pace."
    )


def _box_half_extents(object_size: float) -> tuple[float, float, float]:
    return (0.5 * object_size, 0.3 * object_size, 0.2 * object_size)


def _yaw_matrix(yaw: np.ndarray) -> np.ndarray:
    """Rotation matrices [K, 3, 3] for yaw angles [K]; columns are box axes."""
    c, s = np.cos(yaw), np.sin(yaw)
    zeros, ones = np.zeros_like(c), np.ones_like(c)
    rows = np.stack(
        [
            np.stack([c, -s, zeros], axis=-1),
            np.stack([s, c, zeros], axis=-1),
            np.stack([zeros, zeros, ones], axis=-1),
        ],
        axis=-2,
    )
    return rows


def _center_path(
    family: str,
    u: np.ndarray,
    factors: dict[str, float],
    half_extents: tuple[float, float, float],
    duration: float,
    turn: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Box center [K, 3] and yaw [K]."""
    theta = factors["heading"]
    speed = factors["speed"]
    height = factors["carry_height"]
    hz = half_extents[2]
    k = u.shape[0]
    if family == "straight":
        dist = speed * duration
        # centered on the origin to keep float32 storage round-off small
        along = dist * (u - 0.5)
        xy = np.stack([along * math.cos(theta), along * math.sin(theta)], axis=-1)
        z = np.full(k, height)
        yaw = np.full(k, theta)
    elif family == "arc":
        arc_len = speed * duration
        phi = turn
        yaw = theta + phi * u
        r = arc_len / phi
        x = r * (np.sin(yaw) - math.sin(theta))
        y = -r * (np.cos(yaw) - math.cos(theta))
        xy = np.stack([x, y], axis=-1)
        xy = xy - xy.mean(axis=0, keepdims=True)
        z = np.full(k, height)
    elif family == "lift_place":
        carry_time = (_CARRY_END - _LIFT_END) * duration
        dist = speed * carry_time
        prog = _smoothstep((u - _LIFT_END) / (_CARRY_END - _LIFT_END))
        along = dist * (prog - 0.5)
        xy = np.stack([along * math.cos(theta), along * math.sin(theta)], axis=-1)
        rest_z = hz  # sitting on the ground
        up = _smoothstep((u - _GRAB) / (_LIFT_END - _GRAB))
        # lowering finishes exactly when the grip is released at _LOWER_END
        down = _smoothstep((u - _CARRY_END) / (_LOWER_END - _CARRY_END))
        z = rest_z + (height - rest_z) * np.clip(up - down, 0.0, 1.0)
        yaw = np.full(k, theta)
    else:  # pragma: no cover - guarded by config validation
        raise ConfigurationError(f"unknown family {family!r}")
    center = np.concatenate([xy, z[:, None]], axis=-1)
    return center, yaw


def _grip_offsets(
    half_extents: tuple[float, float, float], grasp_side: float
) -> np.ndarray:
    """Box-frame grip points [n_agents=2, hands=2, 3]; hands on opposite x faces."""
    hx, hy, _ = half_extents
    spacing = min(0.35 * hy, 0.12)
    shift = (1.0 if grasp_side < 0.5 else -1.0) * min(0.3 * hy, 0.08)
    if abs(shift) + spacing > 0.9 * hy:
        spacing = 0.9 * hy - abs(shift)
    return np.array(
        [
            [[-hx, shift + spacing, 0.0], [-hx, shift - spacing, 0.0]],
            [[hx, shift - spacing, 0.0], [hx, shift + spacing, 0.0]],
        ]
    )


def _agent_frames(
    anchor_xy: np.ndarray,
    facing: np.ndarray,
    wrist_targets: np.ndarray,
    grip_blend: np.ndarray,
    dt: float,
    scale: float,
    phase0: float,
) -> np.ndarray:
    """Procedural 22-joint body [K, 22, 3].

    anchor_xy [K, 2] pelvis ground track; facing [K, 2] unit horizontal;
    wrist_targets [K, 2, 3] grip points (left, right); grip_blend [K] in
    [0, 1] mixes free-swinging arms into the grip targets.
    """
    k = anchor_xy.shape[0]
    up = np.array([0.0, 0.0, 1.0])
    fwd = np.concatenate([facing, np.zeros((k, 1))], axis=-1)
    left = np.concatenate([-facing[:, 1:2], facing[:, 0:1], np.zeros((k, 1))], axis=-1)

    vel = np.gradient(anchor_xy, dt, axis=0)
    speed = np.linalg.norm(vel, axis=-1)
    activity = np.clip(speed / 0.3, 0.0, 1.0)
    travel = np.where(speed[:, None] > 1e-6, vel / np.maximum(speed[:, None], 1e-9), facing)
    travel3 = np.concatenate([travel, np.zeros((k, 1))], axis=-1)

    freq = 1.4 + 0.6 * speed
    phase = phase0 + 2.0 * math.pi * np.cumsum(freq * activity) * dt

    out = np.zeros((k, 22, 3))
    bob = 0.015 * scale * activity * np.sin(2.0 * phase)
    pelvis = np.concatenate([anchor_xy, (0.96 * scale + bob)[:, None]], axis=-1)
    out[:, _J["pelvis"]] = pelvis

    lean = 0.03 * fwd
    spine1 = pelvis + 0.125 * scale * up + lean
    spine2 = spine1 + 0.13 * scale * up + lean
    spine3 = spine2 + 0.13 * scale * up
    neck = spine3 + 0.115 * scale * up
    head = neck + 0.135 * scale * up + 0.02 * fwd
    out[:, _J["spine1"]], out[:, _J["spine2"]], out[:, _J["spine3"]] = spine1, spine2, spine3
    out[:, _J["neck"]], out[:, _J["head"]] = neck, head

    blend = grip_blend[:, None]
    for hand, sgn in (("left", 1.0), ("right", -1.0)):
        side = sgn * left
        collar = neck - 0.02 * scale * up + 0.07 * scale * side + 0.01 * fwd
        shoulder = neck - 0.045 * scale * up + 0.19 * scale * side
        out[:, _J[f"{hand}_collar"]] = collar
        out[:, _J[f"{hand}_shoulder"]] = shoulder

        swing = 0.25 * scale * activity * np.sin(phase + (0.0 if sgn > 0 else math.pi))
        free_wrist = shoulder - 0.52 * scale * up + swing[:, None] * fwd + 0.04 * scale * side
        target = wrist_targets[:, 0 if sgn > 0 else 1]
        wrist = (1.0 - blend) * free_wrist + blend * target
        mid = 0.5 * (shoulder + wrist)
        elbow = mid - 0.10 * scale * up + 0.06 * scale * side - 0.03 * scale * fwd * blend
        out[:, _J[f"{hand}_elbow"]] = elbow
        out[:, _J[f"{hand}_wrist"]] = wrist

        hip = pelvis + 0.09 * scale * side - 0.03 * scale * up
        out[:, _J[f"{hand}_hip"]] = hip
        leg_phase = phase + (0.0 if sgn > 0 else math.pi)
        step_len = np.where(freq > 1e-6, 0.5 * speed / freq, 0.0)
        ankle_xy = hip[:, :2] + travel * (step_len * np.sin(leg_phase))[:, None]
        ankle_z = 0.075 * scale + 0.05 * scale * activity * np.maximum(0.0, np.cos(leg_phase))
        ankle = np.concatenate([ankle_xy, ankle_z[:, None]], axis=-1)
        knee = 0.5 * (hip + ankle) + (0.05 + 0.05 * activity * np.maximum(0.0, np.sin(leg_phase)))[
            :, None
        ] * scale * fwd
        foot = ankle + 0.13 * scale * travel3 - 0.035 * scale * up
        out[:, _J[f"{hand}_knee"]] = knee
        out[:, _J[f"{hand}_ankle"]] = ankle
        out[:, _J[f"{hand}_foot"]] = foot

    return out


def generate_sample(
    config: GeneratorConfig,
    sample_seed: int,
    factors: dict[str, float] | None = None,
    family: str | None = None,
) -> InteractionSample:
    """One deterministic clip. ``factors``/``family`` override the draws."""
    if factors is not None:
        unknown = set(factors) - set(FACTOR_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown factor overrides: {sorted(unknown)}")
    rng = np.random.default_rng(int(sample_seed))

    # fixed draw order; overrides replace values after drawing
    fam = config.families[int(rng.integers(len(config.families)))]
    drawn = {
        "carry_height": float(rng.uniform(*config.carry_height_range)),
        "speed": float(rng.uniform(*config.speed_range)),
        "heading": float(rng.uniform(-math.pi, math.pi)),
        "grasp_side": float(rng.integers(2)),
        "object_size": float(rng.uniform(*config.object_size_range)),
    }
    turn = float(rng.choice([-1.0, 1.0]) * rng.uniform(math.pi / 3, 2 * math.pi / 3))
    scales = rng.uniform(0.95, 1.05, size=2)
    phases = rng.uniform(0.0, 2 * math.pi, size=2)
    approach = rng.uniform(0.8, 1.4, size=2)
    if factors:
        drawn.update({k: float(v) for k, v in factors.items()})
    if family is not None:
        if family not in FAMILIES:
            raise ConfigurationError(f"unknown family {family!r}")
        fam = family

    k = config.num_frames
    u = np.arange(k, dtype=np.float64) / (k - 1)
    dt = 1.0 / config.fps
    duration = k / config.fps
    half = _box_half_extents(drawn["object_size"])
    center, yaw = _center_path(fam, u, drawn, half, duration, turn)
    rot = _yaw_matrix(yaw)  # [K, 3, 3]

    corners = center[:, None, :] + np.einsum(
        "kij,cj->kci", rot, CORNER_SIGNS * np.asarray(half)[None, :]
    )
    object_frames = np.concatenate([center[:, None, :], corners], axis=1)

    grips_local = _grip_offsets(half, drawn["grasp_side"])  # [2, 2, 3]
    grips_world = center[:, None, None, :] + np.einsum(
        "kij,ahj->kahi", rot, grips_local
    )  # [K, agents, hands, 3]

    if fam == "lift_place":
        blend = _smoothstep((u - 0.14) / (_GRAB - 0.14)) - _smoothstep((u - _LOWER_END) / 0.06)
        blend = np.clip(blend, 0.0, 1.0)
    else:
        blend = np.ones(k)

    humans = []
    for a in range(2):
        outward = (-1.0 if a == 0 else 1.0) * rot[:, :2, 0]  # away from the box
        facing = -outward
        face_xy = center[:, :2] + outward * half[0]
        standoff = 0.40 * scales[a]
        stance_xy = face_xy + outward * standoff
        if fam == "lift_place":
            start_xy = stance_xy[0] + outward[0] * approach[a]
            walk_in = _smoothstep(u / 0.16)[:, None]
            retreat = _smoothstep((u - _LOWER_END) / 0.1)[:, None]
            anchor_xy = (1 - walk_in) * start_xy[None, :] + walk_in * stance_xy
            anchor_xy = anchor_xy + retreat * outward * 0.25
        else:
            anchor_xy = stance_xy
        frames = _agent_frames(
            anchor_xy=anchor_xy,
            facing=facing,
            wrist_targets=grips_world[:, a],
            grip_blend=blend,
            dt=dt,
            scale=float(scales[a]),
            phase0=float(phases[a]),
        )
        humans.append(MotionSequence(entity=human_spec(), frames=frames, fps=config.fps))

    obj = MotionSequence(entity=box_spec(half), frames=object_frames, fps=config.fps)
    # labels are the thresholded true geometry of the stored float32 frames,
    # so any later recomputation from the saved data reproduces them exactly
    wrist_idx = list(CONTACT_JOINT_INDICES)
    contacts = np.zeros((k, len(humans), len(wrist_idx)), dtype=bool)
    for t in range(k):
        pose = box_pose_from_corners(obj.frames[t, 1:9])
        for a, seq in enumerate(humans):
            dist = signed_distance(seq.frames[t, wrist_idx], pose)
            contacts[t, a] = dist <= config.contact_threshold
    return InteractionSample(
        humans=humans,
        objects=[obj],
        text=render_text(drawn, fam),
        contacts_gt=contacts,
        factors_gt=dict(drawn),
    )


def sample_id(index: int) -> str:
    return f"s{index:06d}"


def generate_dataset(
    config: GeneratorConfig, seed: int
) -> tuple[list[InteractionSample], dict[str, list[str]]]:
    """All samples plus a deterministic train/val/test id split."""
    samples = [
        generate_sample(config, derive_seed(seed, f"sample_{i}"))
        for i in range(config.num_samples)
    ]
    order = np.random.default_rng(derive_seed(seed, "split")).permutation(config.num_samples)
    n_val = int(round(config.split_ratios[1] * config.num_samples))
    n_test = int(round(config.split_ratios[2] * config.num_samples))
    n_train = config.num_samples - n_val - n_test
    if n_train <= 0:
        raise ConfigurationError("split leaves no training samples")
    ids = [sample_id(i) for i in order]
    splits = {
        "train": sorted(ids[:n_train]),
        "val": sorted(ids[n_train : n_train + n_val]),
        "test": sorted(ids[n_train + n_val :]),
    }
    return samples, splits
