"""Training loop for the quantized motion autoencoder.

Deterministic given (config, settings, seed): parameter init, batch order,
and dead-code reseeding all derive from named child seeds. Two-phase
learning rate, gradient clipping, EMA codebook updates inside the forward
pass, dead-code reseeding at epoch boundaries, and a non-finite-loss abort
that preserves the last good state.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..checkpoint import save_checkpoint
from ..data.entities import CONTACT_JOINT_INDICES, InteractionSample
from ..data.normalize import (
    NormalizationStats,
    compute_normalization_stats,
    flatten_features,
    normalize_features,
)
from ..errors import ConfigurationError, TrainingError
from ..seeding import seed_torch_global, torch_generator
from .config import HvqConfig
from .losses import GeometryContext, compute_losses
from .model import HierarchicalMotionVqvae, LevelLatents

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainSettings:
    steps_phase1: int = 2000
    steps_phase2: int = 500
    batch_size: int = 8
    lr_phase1: float = 2e-4
    lr_phase2: float = 1e-5
    betas: tuple[float, float] = (0.9, 0.99)
    weight_decay: float = 1e-5
    grad_clip: float = 1.0
    log_every: int = 50
    target_recon_mse: float | None = None  # early stop when the running recon drops below

    def __post_init__(self) -> None:
        if self.steps_phase1 < 1 or self.steps_phase2 < 0:
            raise ConfigurationError("need at least one phase-1 step")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.lr_phase1 <= 0 or self.lr_phase2 <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.grad_clip <= 0:
            raise ConfigurationError("grad_clip must be positive")

    @property
    def total_steps(self) -> int:
        return self.steps_phase1 + self.steps_phase2


@dataclass
class MotionTensors:
    """Normalized dataset tensors ready for the model."""

    humans: torch.Tensor  # [N, n, K, F_h]
    objects: torch.Tensor  # [N, m, K, F_o]
    cues: torch.Tensor  # [N, L, 2, D]
    human_stats: NormalizationStats
    object_stats: NormalizationStats

    @property
    def num_samples(self) -> int:
        return int(self.humans.shape[0])


def build_motion_tensors(
    samples: list[InteractionSample],
    cue_vectors: np.ndarray,
    human_stats: NormalizationStats | None = None,
    object_stats: NormalizationStats | None = None,
) -> MotionTensors:
    """Stack samples into normalized tensors; stats default to these samples."""
    if not samples:
        raise ConfigurationError("no samples given")
    cue_vectors = np.asarray(cue_vectors, dtype=np.float32)
    if cue_vectors.ndim != 4 or cue_vectors.shape[0] != len(samples) or cue_vectors.shape[2] != 2:
        raise ConfigurationError(
            f"cue_vectors must be [N, L, 2, D] aligned with samples, got {cue_vectors.shape}"
        )
    human_stats = human_stats or compute_normalization_stats(samples, "agent")
    object_stats = object_stats or compute_normalization_stats(samples, "object")
    hum = np.stack(
        [
            np.stack([normalize_features(flatten_features(h), human_stats) for h in s.humans])
            for s in samples
        ]
    )
    obj = np.stack(
        [
            np.stack([normalize_features(flatten_features(o), object_stats) for o in s.objects])
            for s in samples
        ]
    )
    return MotionTensors(
        humans=torch.from_numpy(hum),
        objects=torch.from_numpy(obj),
        cues=torch.from_numpy(cue_vectors),
        human_stats=human_stats,
        object_stats=object_stats,
    )


@dataclass
class VqvaeTrainResult:
    model: HierarchicalMotionVqvae
    tensors: MotionTensors
    context: GeometryContext
    history: list[dict] = field(default_factory=list)
    steps_run: int = 0
    final_recon: float = float("nan")


def train_vqvae(
    samples: list[InteractionSample],
    cue_vectors: np.ndarray,
    config: HvqConfig,
    settings: TrainSettings,
    seed: int,
    snapshot_dir: str | Path | None = None,
) -> VqvaeTrainResult:
    tensors = build_motion_tensors(samples, cue_vectors)
    if tensors.cues.shape[1] != config.levels or tensors.cues.shape[3] != config.latent_dim:
        raise ConfigurationError(
            f"cue vectors are [N, {tensors.cues.shape[1]}, 2, {tensors.cues.shape[3]}]; "
            f"config wants L={config.levels}, D={config.latent_dim}"
        )
    ctx = GeometryContext.from_stats(
        tensors.human_stats,
        tensors.object_stats,
        CONTACT_JOINT_INDICES,
        config.contact_threshold,
    )
    seed_torch_global(seed, "vqvae-init")
    model = HierarchicalMotionVqvae(config)
    opt = torch.optim.Adam(
        model.parameters(),
        lr=settings.lr_phase1,
        betas=settings.betas,
        weight_decay=settings.weight_decay,
    )
    g_batch = torch_generator(seed, "vqvae-batches")
    g_reseed = torch_generator(seed, "vqvae-reseed")
    n = tensors.num_samples
    steps_per_epoch = max(1, math.ceil(n / settings.batch_size))
    history: list[dict] = []
    last_good = copy.deepcopy(model.state_dict())
    running_recon = None
    model.train()
    step = 0
    for step in range(1, settings.total_steps + 1):
        lr = settings.lr_phase1 if step <= settings.steps_phase1 else settings.lr_phase2
        for group in opt.param_groups:
            group["lr"] = lr
        idx = torch.randint(0, n, (min(settings.batch_size, n),), generator=g_batch)
        out = model(tensors.humans[idx], tensors.objects[idx], tensors.cues[idx])
        losses = compute_losses(
            out, tensors.humans[idx], tensors.objects[idx], tensors.cues[idx], ctx, config.weights
        )
        if not torch.isfinite(losses.total):
            where = None
            if snapshot_dir is not None:
                where = Path(snapshot_dir)
                save_checkpoint(
                    where,
                    stage="vqvae",
                    state_dict=last_good,
                    config={"note": "last good state before divergence"},
                    seed=seed,
                )
            raise TrainingError(
                f"non-finite loss at step {step}"
                + (f"; last good state saved to {where}" if where else "")
            )
        opt.zero_grad()
        losses.total.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), settings.grad_clip)
        opt.step()
        recon = float(losses.recon.detach())
        running_recon = recon if running_recon is None else 0.9 * running_recon + 0.1 * recon
        if step % steps_per_epoch == 0:
            model.reseed_dead_codes(out.levels, g_reseed)
            last_good = copy.deepcopy(model.state_dict())
        if step % settings.log_every == 0 or step == 1:
            perp_h = float(np.mean([float(lv.human_perplexity) for lv in out.levels]))
            perp_o = float(np.mean([float(lv.object_perplexity) for lv in out.levels]))
            entry = {
                "stage": "vqvae",
                "step": step,
                "lr": lr,
                "perplexity_humans": perp_h,
                "perplexity_objects": perp_o,
                "running_recon": running_recon,
                **losses.scalars(),
            }
            history.append(entry)
            log.info("vqvae step %d total %.4f recon %.4f", step, entry["total"], recon)
        if settings.target_recon_mse is not None and running_recon < settings.target_recon_mse:
            log.info("early stop at step %d: running recon %.4f", step, running_recon)
            break
    model.eval()
    return VqvaeTrainResult(
        model=model,
        tensors=tensors,
        context=ctx,
        history=history,
        steps_run=step,
        final_recon=running_recon if running_recon is not None else float("nan"),
    )


@torch.no_grad()
def encode_all(
    model: HierarchicalMotionVqvae, tensors: MotionTensors, batch_size: int = 16
) -> list[LevelLatents]:
    """Encode every sample in eval mode; returns per-level latents stacked
    over the whole set ([N, ...] tensors)."""
    model.eval()
    chunks: list[list[LevelLatents]] = []
    n = tensors.num_samples
    for start in range(0, n, batch_size):
        sl = slice(start, min(start + batch_size, n))
        chunks.append(model.encode(tensors.humans[sl], tensors.objects[sl], tensors.cues[sl]))
    merged = []
    for l in range(len(chunks[0])):
        parts = [c[l] for c in chunks]
        merged.append(
            LevelLatents(
                level=parts[0].level,
                length=parts[0].length,
                humans_pre=torch.cat([p.humans_pre for p in parts]),
                humans_q=torch.cat([p.humans_q for p in parts]),
                humans_idx=torch.cat([p.humans_idx for p in parts]),
                objects_pre=torch.cat([p.objects_pre for p in parts]),
                objects_q=torch.cat([p.objects_q for p in parts]),
                objects_idx=torch.cat([p.objects_idx for p in parts]),
                human_perplexity=parts[0].human_perplexity,
                object_perplexity=parts[0].object_perplexity,
            )
        )
    return merged
