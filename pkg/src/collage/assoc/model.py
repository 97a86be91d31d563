"""Contrastive association between codebook entries and level cues.

Per level, two small MLPs map codewords and cue embeddings into a shared
space; training pulls each sample's used codes toward its cue against all
other entries of that level's stacked (human + object) codebook. At
generation time the learned maps retrieve the top-u codes for a cue and the
augmented cue is the concatenation [phi_e(e); phi_c(c_1); ...; phi_c(c_u)].
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigurationError


@dataclass(frozen=True)
class AssociationConfig:
    embed_dim: int = 256
    hidden_dim: int = 256
    temperature: float = 0.07
    top_u: int = 8
    lr: float = 1e-3
    steps: int = 400
    batch_pairs: int = 256
    log_every: int = 50

    def __post_init__(self) -> None:
        if self.embed_dim < 2 or self.hidden_dim < 2:
            raise ConfigurationError("association dims must be >= 2")
        if self.temperature <= 0:
            raise ConfigurationError("temperature must be positive")
        if self.top_u < 1:
            raise ConfigurationError("top_u must be >= 1")
        if self.lr <= 0 or self.steps < 1 or self.batch_pairs < 1:
            raise ConfigurationError("invalid association training settings")


def _mlp(in_dim: int, hidden: int, out_dim: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.ReLU(), nn.Linear(hidden, out_dim))


class AssociationEmbedders(nn.Module):
    """Per-level code and cue projections into the shared association space."""

    def __init__(self, levels: int, code_dim: int, text_dim: int, config: AssociationConfig):
        super().__init__()
        if levels < 1:
            raise ConfigurationError("levels must be >= 1")
        self.levels = levels
        self.code_dim = code_dim
        self.text_dim = text_dim
        self.config = config
        self.code_mlps = nn.ModuleList(
            _mlp(code_dim, config.hidden_dim, config.embed_dim) for _ in range(levels)
        )
        self.text_mlps = nn.ModuleList(
            _mlp(text_dim, config.hidden_dim, config.embed_dim) for _ in range(levels)
        )

    def _check_level(self, level: int) -> None:
        if not (1 <= level <= self.levels):
            raise ConfigurationError(f"level must be in 1..{self.levels}, got {level}")

    def embed_codes(self, level: int, vectors: torch.Tensor) -> torch.Tensor:
        self._check_level(level)
        return self.code_mlps[level - 1](vectors)

    def embed_cue(self, level: int, vectors: torch.Tensor) -> torch.Tensor:
        self._check_level(level)
        return self.text_mlps[level - 1](vectors)


def association_loss(
    embedders: AssociationEmbedders,
    level: int,
    codebook: torch.Tensor,
    cue_vectors: torch.Tensor,
    positive_indices: torch.Tensor,
    weights: torch.Tensor | None = None,
) -> torch.Tensor:
    """Weighted InfoNCE over the level codebook.

    codebook [C, D]; cue_vectors [P, D_text]; positive_indices [P] into the
    codebook; weights [P] (defaults to uniform).
    """
    if positive_indices.max() >= codebook.shape[0] or positive_indices.min() < 0:
        raise ConfigurationError("positive index outside the codebook")
    code_emb = F.normalize(embedders.embed_codes(level, codebook), dim=-1)
    cue_emb = F.normalize(embedders.embed_cue(level, cue_vectors), dim=-1)
    logits = cue_emb @ code_emb.transpose(0, 1) / embedders.config.temperature
    losses = F.cross_entropy(logits, positive_indices, reduction="none")
    if weights is None:
        return losses.mean()
    w = weights / weights.sum().clamp_min(1e-12)
    return (losses * w).sum()


def top_u_codes(
    embedders: AssociationEmbedders,
    level: int,
    codebook: torch.Tensor,
    cue_vector: torch.Tensor,
    u: int,
) -> torch.Tensor:
    """Indices of the u most cue-similar codebook entries (cosine, ties to
    the lowest index)."""
    if not (1 <= u <= codebook.shape[0]):
        raise ConfigurationError(f"top_u must be in 1..{codebook.shape[0]}, got {u}")
    with torch.no_grad():
        code_emb = F.normalize(embedders.embed_codes(level, codebook), dim=-1)
        cue_emb = F.normalize(embedders.embed_cue(level, cue_vector.reshape(1, -1)), dim=-1)
        sims = (cue_emb @ code_emb.transpose(0, 1)).squeeze(0)
        order = torch.argsort(-sims, stable=True)
    return order[:u]


@dataclass
class AugmentedCueSet:
    """Per-level augmented cue tokens: [L, 1 + u, D_a]; token 0 is the cue."""

    tokens: torch.Tensor
    code_indices: torch.Tensor  # [L, u] union-codebook indices

    def __post_init__(self) -> None:
        if self.tokens.ndim != 3:
            raise ConfigurationError(f"tokens must be [L, 1+u, D_a], got {tuple(self.tokens.shape)}")

    @property
    def flat(self) -> torch.Tensor:
        """[L, (1+u) * D_a] concatenated view."""
        return self.tokens.reshape(self.tokens.shape[0], -1)


def combined_level_cues(cue_vectors: torch.Tensor) -> torch.Tensor:
    """[L, 2, D] (or [N, L, 2, D]) agent/object cues -> mean over kinds."""
    if cue_vectors.shape[-2] != 2:
        raise ConfigurationError(f"expected a kind axis of 2, got {tuple(cue_vectors.shape)}")
    return cue_vectors.mean(dim=-2)


@torch.no_grad()
def augment_cues(
    embedders: AssociationEmbedders,
    codebooks: list[torch.Tensor],
    cue_vectors: torch.Tensor,
    u: int | None = None,
) -> AugmentedCueSet:
    """Deterministically augment one sample's cues ([L, 2, D]) with retrieved
    code embeddings."""
    u = embedders.config.top_u if u is None else u
    if len(codebooks) != embedders.levels:
        raise ConfigurationError(
            f"{len(codebooks)} codebooks for {embedders.levels} levels"
        )
    combined = combined_level_cues(cue_vectors)
    if combined.ndim != 2 or combined.shape[0] != embedders.levels:
        raise ConfigurationError(
            f"cue_vectors must be [L={embedders.levels}, 2, D], got {tuple(cue_vectors.shape)}"
        )
    tokens = []
    indices = []
    for l in range(1, embedders.levels + 1):
        cb = codebooks[l - 1]
        cue = combined[l - 1]
        top = top_u_codes(embedders, l, cb, cue, u)
        cue_tok = embedders.embed_cue(l, cue.reshape(1, -1))
        code_tok = embedders.embed_codes(l, cb.index_select(0, top))
        tokens.append(torch.cat([cue_tok, code_tok], dim=0))
        indices.append(top)
    return AugmentedCueSet(tokens=torch.stack(tokens), code_indices=torch.stack(indices))
