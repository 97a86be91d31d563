"""Association training: mine (sample, level) -> code usage from a frozen
autoencoder, then fit the contrastive embedders."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import torch

from ..errors import ConfigurationError
from ..seeding import seed_torch_global, torch_generator
from ..vqvae.model import HierarchicalMotionVqvae, LevelLatents
from ..vqvae.train import MotionTensors, encode_all
from .model import AssociationConfig, AssociationEmbedders, association_loss, combined_level_cues, top_u_codes

log = logging.getLogger(__name__)


def union_codebooks(model: HierarchicalMotionVqvae) -> list[torch.Tensor]:
    """Per level: stacked [human; object] codebook entries, detached copies."""
    out = []
    for hq, oq in zip(model.human_quantizers, model.object_quantizers):
        out.append(torch.cat([hq.embeddings, oq.embeddings], dim=0).detach().clone())
    return out


@dataclass
class LevelPositives:
    """Mined positives for one level: parallel arrays over pairs."""

    sample_idx: torch.Tensor  # long [P]
    code_idx: torch.Tensor  # long [P], union-codebook indices
    weight: torch.Tensor  # float [P], within-sample usage frequency


def mine_positives(latents: list[LevelLatents], entries: int) -> list[LevelPositives]:
    """Count union-code usage per (sample, level)."""
    mined = []
    for lat in latents:
        n_samples = lat.humans_idx.shape[0]
        samp, codes, weights = [], [], []
        for i in range(n_samples):
            h = lat.humans_idx[i].reshape(-1)
            o = lat.objects_idx[i].reshape(-1) + entries
            uni = torch.cat([h, o])
            vals, counts = torch.unique(uni, return_counts=True)
            samp.append(torch.full((vals.shape[0],), i, dtype=torch.long))
            codes.append(vals)
            weights.append(counts.to(torch.float32) / uni.shape[0])
        mined.append(
            LevelPositives(
                sample_idx=torch.cat(samp), code_idx=torch.cat(codes), weight=torch.cat(weights)
            )
        )
    return mined


@dataclass
class AssocTrainResult:
    embedders: AssociationEmbedders
    codebooks: list[torch.Tensor]
    history: list[dict] = field(default_factory=list)
    retrieval_accuracy: float = float("nan")


def retrieval_accuracy(
    embedders: AssociationEmbedders,
    codebooks: list[torch.Tensor],
    combined_cues: torch.Tensor,
    positives: list[LevelPositives],
    u: int,
) -> float:
    """Fraction of (sample, level) pairs whose most-used code lands in the
    cue's top-u retrieved set."""
    hits, total = 0, 0
    for l, pos in enumerate(positives, start=1):
        for i in range(combined_cues.shape[0]):
            mask = pos.sample_idx == i
            if not mask.any():
                continue
            w = pos.weight[mask]
            modal = pos.code_idx[mask][int(torch.argmax(w))]
            top = top_u_codes(embedders, l, codebooks[l - 1], combined_cues[i, l - 1], u)
            hits += int((top == modal).any())
            total += 1
    return hits / max(total, 1)


def train_association(
    vqvae: HierarchicalMotionVqvae,
    tensors: MotionTensors,
    config: AssociationConfig,
    seed: int,
) -> AssocTrainResult:
    """Fit the embedders against a frozen autoencoder; the autoencoder's
    parameters are never touched."""
    vqvae.eval()
    latents = encode_all(vqvae, tensors)
    entries = vqvae.config.codebook_entries
    codebooks = union_codebooks(vqvae)
    positives = mine_positives(latents, entries)
    combined = combined_level_cues(tensors.cues)  # [N, L, D]
    if any(p.sample_idx.numel() == 0 for p in positives):
        raise ConfigurationError("a level has no mined positives")

    seed_torch_global(seed, "assoc-init")
    embedders = AssociationEmbedders(
        levels=vqvae.config.levels,
        code_dim=vqvae.config.latent_dim,
        text_dim=tensors.cues.shape[-1],
        config=config,
    )
    opt = torch.optim.Adam(embedders.parameters(), lr=config.lr)
    g = torch_generator(seed, "assoc-batches")
    history: list[dict] = []
    embedders.train()
    for step in range(1, config.steps + 1):
        opt.zero_grad()
        total = None
        for l, pos in enumerate(positives, start=1):
            take = min(config.batch_pairs, pos.code_idx.shape[0])
            pick = torch.randint(0, pos.code_idx.shape[0], (take,), generator=g)
            cue_vecs = combined[pos.sample_idx[pick], l - 1]
            loss_l = association_loss(
                embedders,
                l,
                codebooks[l - 1],
                cue_vecs,
                pos.code_idx[pick],
                pos.weight[pick],
            )
            total = loss_l if total is None else total + loss_l
        total.backward()
        opt.step()
        if step % config.log_every == 0 or step == 1:
            history.append({"stage": "assoc", "step": step, "loss": float(total.detach())})
            log.info("assoc step %d loss %.4f", step, float(total.detach()))
    embedders.eval()
    acc = retrieval_accuracy(embedders, codebooks, combined, positives, config.top_u)
    history.append({"stage": "assoc", "step": config.steps, "retrieval_accuracy": acc})
    log.info("assoc retrieval accuracy (top-%d): %.3f", config.top_u, acc)
    return AssocTrainResult(
        embedders=embedders, codebooks=codebooks, history=history, retrieval_accuracy=acc
    )
