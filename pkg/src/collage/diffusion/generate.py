"""Turning sampled latents back into motion clips.

The denoiser produces standardized node latents; decoding destandardizes
them, splits the node axis into agents and objects, runs the frozen decoders,
and rebuilds full interaction samples with geometric contact labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..data import (
    CONTACT_JOINT_INDICES,
    HUMAN_JOINT_NAMES,
    OBJECT_KEYPOINT_NAMES,
    EntitySpec,
    InteractionSample,
    MotionSequence,
    NormalizationStats,
    box_pose_from_corners_t,
    box_signed_distance_t,
    denormalize_features,
)
from ..errors import ConfigurationError
from ..vqvae import HierarchicalMotionVqvae
from .sampling import ancestral_sample, ddim_sample
from .train import DiffusionTrainResult

SAMPLERS = ("ddim", "ancestral")


@dataclass(frozen=True)
class GenerationSettings:
    sampler: str = "ddim"
    num_steps: int = 50  # sub-grid size for the deterministic sampler
    noise_scale: float = 1.0  # ancestral only

    def __post_init__(self) -> None:
        if self.sampler not in SAMPLERS:
            raise ConfigurationError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.num_steps < 1:
            raise ConfigurationError("num_steps must be >= 1")
        if self.noise_scale < 0:
            raise ConfigurationError("noise_scale must be >= 0")


@torch.no_grad()
def sample_latent_nodes(
    result: DiffusionTrainResult,
    cue_tokens: torch.Tensor,
    settings: GenerationSettings,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Draw node latents for a batch of cue-token sets: [B, L, S, D_a] ->
    destandardized [B, D, V, K_1]."""
    cfg = result.model.config
    batch = cue_tokens.shape[0]
    shape = (batch, cfg.feature_dim, cfg.num_nodes, cfg.seq_len)
    adjacency = result.graph.adjacency()
    if settings.sampler == "ddim":
        x0 = ddim_sample(
            result.model, result.schedule, shape, settings.num_steps,
            cue_tokens=cue_tokens, adjacency=adjacency, generator=generator,
        )
    else:
        x0 = ancestral_sample(
            result.model, result.schedule, shape,
            cue_tokens=cue_tokens, adjacency=adjacency, generator=generator,
            noise_scale=settings.noise_scale,
        )
    return result.latent_stats.destandardize(x0)


def _decode_kind(
    vqvae: HierarchicalMotionVqvae,
    latents: torch.Tensor,
    stats: NormalizationStats,
    keypoints: int,
) -> np.ndarray:
    """latents [B, E, K_1, D] -> world-frame frames [B, E, K, P, 3]."""
    b, e, k1, d = latents.shape
    decoder = vqvae.human_decoder if keypoints == vqvae.config.human_keypoints else vqvae.object_decoder
    feats = decoder(latents.reshape(b * e, k1, d))
    frames = []
    for row in feats.detach().cpu().numpy():
        denorm = denormalize_features(row, stats)
        frames.append(denorm.reshape(denorm.shape[0], keypoints, 3))
    out = np.stack(frames)
    return out.reshape(b, e, out.shape[1], keypoints, 3)


def decode_latent_nodes(
    vqvae: HierarchicalMotionVqvae,
    human_stats: NormalizationStats,
    object_stats: NormalizationStats,
    nodes: torch.Tensor,
    texts: list[str],
    fps: float = 30.0,
    contact_threshold: float = 0.05,
) -> list[InteractionSample]:
    """nodes [B, D, V, K_1] -> decoded interaction samples, one per row."""
    cfg = vqvae.config
    b = nodes.shape[0]
    if len(texts) != b:
        raise ConfigurationError("need one text per generated sample")
    if nodes.shape[2] != cfg.num_humans + cfg.num_objects:
        raise ConfigurationError(
            f"node axis is {nodes.shape[2]}, expected {cfg.num_humans + cfg.num_objects}"
        )
    vqvae.eval()
    with torch.no_grad():
        lat = nodes.permute(0, 2, 3, 1)  # [B, V, K_1, D]
        human_frames = _decode_kind(
            vqvae, lat[:, : cfg.num_humans], human_stats, cfg.human_keypoints
        )
        object_frames = _decode_kind(
            vqvae, lat[:, cfg.num_humans :], object_stats, cfg.object_keypoints
        )

    samples = []
    for i in range(b):
        humans = human_frames[i]  # [n, K, 22, 3]
        objects = object_frames[i]  # [m, K, 9, 3]
        k = humans.shape[1]
        wrists = torch.from_numpy(
            humans[:, :, list(CONTACT_JOINT_INDICES)].astype(np.float64)
        )  # [n, K, 2, 3]
        distances = []
        extents = []
        for obj in objects:
            corners = torch.from_numpy(obj[:, 1:9].astype(np.float64))  # [K, 8, 3]
            center, rotation, half = box_pose_from_corners_t(corners)
            pts = wrists.permute(1, 0, 2, 3).reshape(k, -1, 3)  # [K, n*2, 3]
            d = box_signed_distance_t(pts, center, rotation, half)
            distances.append(d.reshape(k, humans.shape[0], 2))
            extents.append(half.median(dim=0).values.numpy())
        nearest = torch.stack(distances).min(dim=0).values  # [K, n, 2]
        contacts = (nearest <= contact_threshold).numpy()

        human_seqs = [
            MotionSequence(
                entity=EntitySpec(kind="agent", keypoint_names=HUMAN_JOINT_NAMES),
                frames=h,
                fps=fps,
            )
            for h in humans
        ]
        object_seqs = [
            MotionSequence(
                entity=EntitySpec(
                    kind="object",
                    keypoint_names=OBJECT_KEYPOINT_NAMES,
                    half_extents=tuple(float(x) for x in extents[j]),
                ),
                frames=objects[j],
                fps=fps,
            )
            for j in range(objects.shape[0])
        ]
        samples.append(
            InteractionSample(
                humans=human_seqs,
                objects=object_seqs,
                text=texts[i],
                contacts_gt=contacts,
                factors_gt={},
            )
        )
    return samples


@torch.no_grad()
def generate_samples(
    vqvae: HierarchicalMotionVqvae,
    result: DiffusionTrainResult,
    cue_tokens: torch.Tensor,
    texts: list[str],
    human_stats: NormalizationStats,
    object_stats: NormalizationStats,
    settings: GenerationSettings,
    generator: torch.Generator | None = None,
    fps: float = 30.0,
    contact_threshold: float = 0.05,
) -> list[InteractionSample]:
    nodes = sample_latent_nodes(result, cue_tokens, settings, generator)
    return decode_latent_nodes(
        vqvae, human_stats, object_stats, nodes, texts,
        fps=fps, contact_threshold=contact_threshold,
    )
