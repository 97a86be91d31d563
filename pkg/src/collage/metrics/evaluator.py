"""Contrastive motion-text embedding space for the learned metrics.

A small temporal-conv motion encoder and an MLP text encoder are trained
with a symmetric InfoNCE objective on (clip, annotation) pairs; both emit
unit-norm vectors. Distribution metrics and retrieval metrics run in this
space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..cues import HashingTextEmbedder
from ..data import (
    InteractionSample,
    NormalizationStats,
    compute_normalization_stats,
    flatten_features,
    normalize_features,
)
from ..errors import ConfigurationError, TrainingError
from ..seeding import seed_torch_global, torch_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvaluatorConfig:
    embed_dim: int = 128
    hidden_dim: int = 128
    text_dim: int = 128
    temperature: float = 0.07
    lr: float = 1e-3
    steps: int = 600
    batch_size: int = 16
    log_every: int = 50

    def __post_init__(self) -> None:
        if min(self.embed_dim, self.hidden_dim, self.text_dim) < 2:
            raise ConfigurationError("evaluator dims must be >= 2")
        if self.temperature <= 0 or self.lr <= 0:
            raise ConfigurationError("temperature and lr must be positive")
        if self.steps < 1 or self.batch_size < 2:
            raise ConfigurationError("need steps >= 1 and batch_size >= 2")


class MotionTextEvaluator(nn.Module):
    """feature_dim is the per-frame width of all entities concatenated."""

    def __init__(self, feature_dim: int, config: EvaluatorConfig):
        super().__init__()
        self.config = config
        h = config.hidden_dim
        self.motion_net = nn.Sequential(
            nn.Conv1d(feature_dim, h, 5, padding=2),
            nn.ReLU(),
            nn.Conv1d(h, h, 5, stride=2, padding=2),
            nn.ReLU(),
            nn.Conv1d(h, h, 3, padding=1),
            nn.ReLU(),
        )
        self.motion_head = nn.Linear(h, config.embed_dim)
        self.text_net = nn.Sequential(
            nn.Linear(config.text_dim, h),
            nn.ReLU(),
            nn.Linear(h, config.embed_dim),
        )

    def encode_motion(self, features: torch.Tensor) -> torch.Tensor:
        """[B, K, F] normalized per-frame features -> unit-norm [B, E]."""
        x = self.motion_net(features.transpose(1, 2)).mean(dim=2)
        return nn.functional.normalize(self.motion_head(x), dim=-1)

    def encode_text(self, vectors: torch.Tensor) -> torch.Tensor:
        """[B, D_t] text vectors -> unit-norm [B, E]."""
        return nn.functional.normalize(self.text_net(vectors), dim=-1)


def motion_feature_matrix(
    samples: list[InteractionSample],
    human_stats: NormalizationStats,
    object_stats: NormalizationStats,
) -> np.ndarray:
    """Stack normalized per-frame features of all entities: [N, K, F_total]."""
    rows = []
    for s in samples:
        parts = [normalize_features(flatten_features(h), human_stats) for h in s.humans]
        parts += [normalize_features(flatten_features(o), object_stats) for o in s.objects]
        rows.append(np.concatenate(parts, axis=1))
    out = np.stack(rows)
    if not np.isfinite(out).all():
        raise ConfigurationError("non-finite motion features")
    return out


@dataclass
class EvaluatorTrainResult:
    model: MotionTextEvaluator
    human_stats: NormalizationStats
    object_stats: NormalizationStats
    embedder: HashingTextEmbedder
    history: list[dict] = field(default_factory=list)
    top1_at_32: float = float("nan")


def train_evaluator(
    samples: list[InteractionSample],
    config: EvaluatorConfig,
    seed: int,
    human_stats: NormalizationStats | None = None,
    object_stats: NormalizationStats | None = None,
) -> EvaluatorTrainResult:
    if len(samples) < 2:
        raise ConfigurationError("contrastive training needs at least 2 samples")
    human_stats = human_stats or compute_normalization_stats(samples, "agent")
    object_stats = object_stats or compute_normalization_stats(samples, "object")
    feats = torch.from_numpy(motion_feature_matrix(samples, human_stats, object_stats))
    embedder = HashingTextEmbedder(dim=config.text_dim, seed=seed)
    texts = torch.from_numpy(np.stack([embedder.embed(s.text) for s in samples]))

    seed_torch_global(seed, "evaluator-init")
    model = MotionTextEvaluator(feature_dim=feats.shape[-1], config=config)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    g = torch_generator(seed, "evaluator-batches")
    n = feats.shape[0]
    history: list[dict] = []
    model.train()
    for step in range(1, config.steps + 1):
        idx = torch.randint(0, n, (min(config.batch_size, n),), generator=g)
        opt.zero_grad()
        m = model.encode_motion(feats[idx])
        t = model.encode_text(texts[idx])
        logits = m @ t.T / config.temperature
        labels = torch.arange(idx.shape[0])
        loss = 0.5 * (
            nn.functional.cross_entropy(logits, labels)
            + nn.functional.cross_entropy(logits.T, labels)
        )
        if not torch.isfinite(loss):
            raise TrainingError(f"evaluator loss diverged at step {step}")
        loss.backward()
        opt.step()
        if step % config.log_every == 0 or step == 1:
            entry = {"step": step, "loss": float(loss.detach())}
            history.append(entry)
            logger.info("evaluator step %d loss %.4f", step, entry["loss"])
    model.eval()

    result = EvaluatorTrainResult(
        model=model,
        human_stats=human_stats,
        object_stats=object_stats,
        embedder=embedder,
        history=history,
    )
    motion_emb = encode_motions(result, samples)
    text_emb = encode_texts(result, [s.text for s in samples])
    result.top1_at_32 = _top1_among(motion_emb, text_emb, pool=min(32, n), seed=seed)
    logger.info("evaluator top-1 among %d: %.3f", min(32, n), result.top1_at_32)
    return result


@torch.no_grad()
def encode_motions(result: EvaluatorTrainResult, samples: list[InteractionSample]) -> np.ndarray:
    feats = torch.from_numpy(
        motion_feature_matrix(samples, result.human_stats, result.object_stats)
    )
    result.model.eval()
    out = []
    for start in range(0, feats.shape[0], 64):
        out.append(result.model.encode_motion(feats[start : start + 64]).numpy())
    return np.concatenate(out).astype(np.float64)


@torch.no_grad()
def encode_texts(result: EvaluatorTrainResult, texts: list[str]) -> np.ndarray:
    vecs = torch.from_numpy(np.stack([result.embedder.embed(t) for t in texts]))
    result.model.eval()
    return result.model.encode_text(vecs).numpy().astype(np.float64)


def _top1_among(motion_emb: np.ndarray, text_emb: np.ndarray, pool: int, seed: int) -> float:
    """Diagnostic retrieval score used to flag a failed evaluator fit."""
    rng = np.random.default_rng(seed)
    n = motion_emb.shape[0]
    hits = 0
    for i in range(n):
        others = np.setdiff1d(np.arange(n), [i])
        cand = np.concatenate([[i], rng.choice(others, size=pool - 1, replace=False)])
        sims = motion_emb[cand] @ text_emb[i]
        hits += int(np.argmax(sims) == 0)
    return hits / n
