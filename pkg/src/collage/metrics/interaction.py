"""Geometric fidelity metrics between a generated clip and its reference."""

from __future__ import annotations

import numpy as np

from ..data import (
    CONTACT_JOINT_INDICES,
    InteractionSample,
    box_pose_from_corners,
    signed_distance,
)
from ..errors import ConfigurationError

M_TO_MM = 1000.0


def _root_relative(frames: np.ndarray) -> np.ndarray:
    """[K, P, 3] -> keypoints with the root (index 0) trajectory removed."""
    f = np.asarray(frames, dtype=np.float64)
    return f - f[:, :1, :]


def _check_match(gen: InteractionSample, ref: InteractionSample) -> None:
    if gen.num_frames != ref.num_frames:
        raise ConfigurationError("frame counts differ")
    if len(gen.humans) != len(ref.humans) or len(gen.objects) != len(ref.objects):
        raise ConfigurationError("entity counts differ")


def rr_joint_error(gen: InteractionSample, ref: InteractionSample) -> float:
    """Mean root-relative joint position error over agents, frames, joints (mm)."""
    _check_match(gen, ref)
    errors = []
    for g, r in zip(gen.humans, ref.humans):
        diff = _root_relative(g.frames) - _root_relative(r.frames)
        errors.append(np.linalg.norm(diff, axis=-1).mean())
    return float(np.mean(errors) * M_TO_MM)


def rr_keypoint_error(gen: InteractionSample, ref: InteractionSample) -> float:
    """Same error over the objects' corner keypoints, root-relative to the
    object root keypoint (mm)."""
    _check_match(gen, ref)
    errors = []
    for g, r in zip(gen.objects, ref.objects):
        diff = _root_relative(g.frames) - _root_relative(r.frames)
        # index 0 is the root itself; corners carry the signal
        errors.append(np.linalg.norm(diff[:, 1:], axis=-1).mean())
    return float(np.mean(errors) * M_TO_MM)


def predicted_contacts(sample: InteractionSample, threshold: float) -> np.ndarray:
    """Thresholded wrist-to-box distances of the clip's own geometry:
    bool [K, n, 2]; with several objects a wrist counts as in contact when
    it touches any of them."""
    if threshold <= 0:
        raise ConfigurationError("threshold must be positive")
    k, n = sample.num_frames, len(sample.humans)
    wrist_idx = list(CONTACT_JOINT_INDICES)
    out = np.zeros((k, n, len(wrist_idx)), dtype=bool)
    for obj in sample.objects:
        for t in range(k):
            pose = box_pose_from_corners(obj.frames[t, 1:9])
            for a, hum in enumerate(sample.humans):
                dist = signed_distance(hum.frames[t, wrist_idx], pose)
                out[t, a] |= dist <= threshold
    return out


def contact_accuracy(gen: InteractionSample, ref: InteractionSample, threshold: float = 0.05) -> float:
    """Fraction of (frame, agent, hand) entries where the generated clip's
    thresholded contact state equals the reference labels."""
    _check_match(gen, ref)
    predicted = predicted_contacts(gen, threshold)
    if predicted.shape != ref.contacts_gt.shape:
        raise ConfigurationError("contact label shapes differ")
    return float((predicted == ref.contacts_gt).mean())
