"""Loss terms for the quantized motion autoencoder.

Every term is a mean over elements within an entity kind, summed over kinds,
so the weight table stays meaningful across clip lengths and entity counts.
Geometric terms operate in meters: features are denormalized, the box pose
is fitted differentiably from reconstructed corners, and distances come from
the exact oriented-box signed distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..data.geometry import box_pose_from_corners_t, box_signed_distance_t, contact_ramp_t
from ..data.normalize import NormalizationStats
from ..errors import ConfigurationError
from .config import LossWeights
from .model import LevelLatents, VqvaeOutput


@dataclass
class GeometryContext:
    """Everything the geometric losses need to move back to world units."""

    human_mean: torch.Tensor  # [F_h]
    human_std: torch.Tensor
    object_mean: torch.Tensor  # [F_o]
    object_std: torch.Tensor
    contact_joint_indices: tuple[int, ...]
    contact_threshold: float

    @classmethod
    def from_stats(
        cls,
        human_stats: NormalizationStats,
        object_stats: NormalizationStats,
        contact_joint_indices: tuple[int, ...],
        contact_threshold: float,
    ) -> "GeometryContext":
        if contact_threshold <= 0:
            raise ConfigurationError("contact_threshold must be positive")
        return cls(
            human_mean=torch.from_numpy(human_stats.mean.copy()).float(),
            human_std=torch.from_numpy(human_stats.std.copy()).float(),
            object_mean=torch.from_numpy(object_stats.mean.copy()).float(),
            object_std=torch.from_numpy(object_stats.std.copy()).float(),
            contact_joint_indices=tuple(contact_joint_indices),
            contact_threshold=float(contact_threshold),
        )

    def to(self, dtype: torch.dtype) -> "GeometryContext":
        return GeometryContext(
            human_mean=self.human_mean.to(dtype),
            human_std=self.human_std.to(dtype),
            object_mean=self.object_mean.to(dtype),
            object_std=self.object_std.to(dtype),
            contact_joint_indices=self.contact_joint_indices,
            contact_threshold=self.contact_threshold,
        )


def denormalized_keypoints(
    features: torch.Tensor, mean: torch.Tensor, std: torch.Tensor
) -> torch.Tensor:
    """[..., K, F=3P] normalized features -> [..., K, P, 3] world positions."""
    world = features * std + mean
    return world.reshape(*world.shape[:-1], world.shape[-1] // 3, 3)


def reconstruction_loss(out: VqvaeOutput, humans: torch.Tensor, objects: torch.Tensor) -> torch.Tensor:
    return F.mse_loss(out.recon_humans, humans) + F.mse_loss(out.recon_objects, objects)


def commitment_loss(level: LevelLatents) -> torch.Tensor:
    """Pulls pre-quant vectors toward their (frozen) codewords."""
    return F.mse_loss(level.humans_pre, level.humans_q.detach()) + F.mse_loss(
        level.objects_pre, level.objects_q.detach()
    )


def codebook_loss(level: LevelLatents) -> torch.Tensor:
    """Codeword-side counterpart. Entries update by EMA, so this carries no
    gradient; it is reported for monitoring and enters the total as a value
    identical to the commitment term by symmetry of the squared error."""
    return (
        F.mse_loss(level.humans_pre.detach(), level.humans_q.detach())
        + F.mse_loss(level.objects_pre.detach(), level.objects_q.detach())
    )


def alignment_loss(level: LevelLatents, cues: torch.Tensor) -> torch.Tensor:
    """Time-mean of quantized latents vs the level cue (straight-through
    gradients reach the encoder)."""
    l = level.level - 1
    cue_h = cues[:, l, 0, :].unsqueeze(1)  # [B, 1, D]
    cue_o = cues[:, l, 1, :].unsqueeze(1)
    return F.mse_loss(level.humans_q.mean(dim=2), cue_h.expand_as(level.humans_q.mean(dim=2))) + (
        F.mse_loss(level.objects_q.mean(dim=2), cue_o.expand_as(level.objects_q.mean(dim=2)))
    )


def smoothness_loss(out: VqvaeOutput) -> torch.Tensor:
    dh = out.recon_humans[:, :, 1:] - out.recon_humans[:, :, :-1]
    do = out.recon_objects[:, :, 1:] - out.recon_objects[:, :, :-1]
    return dh.pow(2).mean() + do.pow(2).mean()


def _upsampled_quantized(levels: list[LevelLatents], kind: str, finest: int) -> list[torch.Tensor]:
    outs = []
    for lat in levels:
        q = lat.humans_q if kind == "agent" else lat.objects_q
        factor = finest // lat.length
        if factor > 1:
            q = q.repeat_interleave(factor, dim=2)
        outs.append(q)
    return outs


def disentanglement_loss(levels: list[LevelLatents]) -> torch.Tensor:
    """Squared Frobenius norm of cross-level covariances (all level pairs),
    computed over (batch, entity, time) samples with ddof=1."""
    if len(levels) < 2:
        return torch.zeros((), dtype=levels[0].humans_q.dtype, device=levels[0].humans_q.device)
    finest = max(lat.length for lat in levels)
    total = None
    for kind in ("agent", "object"):
        ups = _upsampled_quantized(levels, kind, finest)
        flats = []
        for q in ups:
            v = q.reshape(-1, q.shape[-1])
            flats.append(v - v.mean(dim=0, keepdim=True))
        n = flats[0].shape[0]
        if n < 2:
            raise ConfigurationError("disentanglement loss needs at least 2 latent samples")
        for a in range(len(flats)):
            for b in range(a + 1, len(flats)):
                cov = flats[a].transpose(0, 1) @ flats[b] / (n - 1)
                term = cov.pow(2).sum()
                total = term if total is None else total + term
    return total


def _object_poses(
    objects_feat: torch.Tensor, ctx: GeometryContext
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Fit box poses from (possibly reconstructed) object features.

    objects_feat: [B, m, K, F_o]. Returns center [B, m, K, 3], rotation
    [B, m, K, 3, 3], half_extents [B, m, K, 3].
    """
    kp = denormalized_keypoints(objects_feat, ctx.object_mean, ctx.object_std)
    corners = kp[..., 1:9, :]  # keypoint 0 is the root
    return box_pose_from_corners_t(corners)


def penetration_loss(
    recon_humans: torch.Tensor, recon_objects: torch.Tensor, ctx: GeometryContext
) -> torch.Tensor:
    """Mean hinge on negative signed distance of every human joint to every
    reconstructed box, in meters."""
    joints = denormalized_keypoints(recon_humans, ctx.human_mean, ctx.human_std)
    b, n, k, j, _ = joints.shape
    center, rot, half = _object_poses(recon_objects, ctx)
    m = center.shape[1]
    total = None
    for o in range(m):
        c = center[:, o].unsqueeze(1).expand(b, n, k, 3)
        r = rot[:, o].unsqueeze(1).expand(b, n, k, 3, 3)
        h = half[:, o].unsqueeze(1).expand(b, n, k, 3)
        d = box_signed_distance_t(joints.reshape(b, n, k, j, 3), c, r, h)
        term = F.relu(-d).mean()
        total = term if total is None else total + term
    return total


def contact_loss(
    recon_humans: torch.Tensor,
    recon_objects: torch.Tensor,
    humans_gt: torch.Tensor,
    objects_gt: torch.Tensor,
    ctx: GeometryContext,
) -> torch.Tensor:
    """Squared mismatch between reconstructed and ground-truth contact maps.

    The map is the thresholded ramp of hand-to-box signed distance, evaluated
    with the same function on both reconstruction and ground truth."""
    idx = torch.as_tensor(ctx.contact_joint_indices, device=recon_humans.device)

    def maps(humans_feat: torch.Tensor, objects_feat: torch.Tensor) -> torch.Tensor:
        joints = denormalized_keypoints(humans_feat, ctx.human_mean, ctx.human_std)
        hands = joints.index_select(3, idx)  # [B, n, K, H, 3]
        b, n, k, hnum, _ = hands.shape
        center, rot, half = _object_poses(objects_feat, ctx)
        per_object = []
        for o in range(center.shape[1]):
            c = center[:, o].unsqueeze(1).expand(b, n, k, 3)
            r = rot[:, o].unsqueeze(1).expand(b, n, k, 3, 3)
            h = half[:, o].unsqueeze(1).expand(b, n, k, 3)
            d = box_signed_distance_t(hands, c, r, h)
            per_object.append(contact_ramp_t(d, ctx.contact_threshold))
        return torch.stack(per_object, dim=1)  # [B, m, n, K, H]

    pred = maps(recon_humans, recon_objects)
    target = maps(humans_gt, objects_gt)
    return F.mse_loss(pred, target.detach())


@dataclass
class LossBreakdown:
    recon: torch.Tensor
    commit: list[torch.Tensor]
    codebook: list[torch.Tensor]
    align: list[torch.Tensor]
    smooth: torch.Tensor
    penetration: torch.Tensor
    contact: torch.Tensor
    disent: torch.Tensor
    total: torch.Tensor

    def scalars(self) -> dict[str, float]:
        d = {
            "recon": float(self.recon.detach()),
            "smooth": float(self.smooth.detach()),
            "penetration": float(self.penetration.detach()),
            "contact": float(self.contact.detach()),
            "disent": float(self.disent.detach()),
            "total": float(self.total.detach()),
        }
        for i, (c, cb, a) in enumerate(zip(self.commit, self.codebook, self.align), start=1):
            d[f"commit_l{i}"] = float(c.detach())
            d[f"codebook_l{i}"] = float(cb.detach())
            d[f"align_l{i}"] = float(a.detach())
        return d


def compute_losses(
    out: VqvaeOutput,
    humans: torch.Tensor,
    objects: torch.Tensor,
    cues: torch.Tensor,
    ctx: GeometryContext,
    weights: LossWeights,
) -> LossBreakdown:
    recon = reconstruction_loss(out, humans, objects)
    commit = [commitment_loss(lv) for lv in out.levels]
    codebook = [codebook_loss(lv) for lv in out.levels]
    align = [alignment_loss(lv, cues) for lv in out.levels]
    smooth = smoothness_loss(out)
    pen = penetration_loss(out.recon_humans, out.recon_objects, ctx)
    contact = contact_loss(out.recon_humans, out.recon_objects, humans, objects, ctx)
    disent = disentanglement_loss(out.levels)
    total = (
        weights.recon * recon
        + weights.smooth * smooth
        + weights.penetration * pen
        + weights.contact * contact
        + weights.disent * disent
    )
    for c, cb, a in zip(commit, codebook, align):
        total = total + weights.commit * c + weights.codebook * cb + weights.align * a
    return LossBreakdown(
        recon=recon,
        commit=commit,
        codebook=codebook,
        align=align,
        smooth=smooth,
        penetration=pen,
        contact=contact,
        disent=disent,
        total=total,
    )
