"""Vector quantization with exponential-moving-average codebook updates.

Assignment uses the compiled nearest-codeword kernel (ties to the lowest
index); the straight-through estimator passes decoder gradients to the
encoder unchanged; codebook entries move by EMA statistics rather than
gradient descent. EMA accumulators are float64 so the update matches its
closed-form geometric series to round-off.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .. import _kernels
from ..errors import ConfigurationError


class VectorQuantizerEma(nn.Module):
    def __init__(
        self,
        entries: int,
        dim: int,
        decay: float = 0.99,
        eps: float = 1e-5,
        min_usage: float = 1.0,
        identity: bool = False,
    ):
        super().__init__()
        if entries < 2:
            raise ConfigurationError("codebook needs at least 2 entries")
        if not (0.0 < decay < 1.0):
            raise ConfigurationError("decay must be in (0, 1)")
        self.entries = entries
        self.dim = dim
        self.decay = decay
        self.eps = eps
        self.min_usage = min_usage
        self.identity = identity  # bypass mode: quantize(x) == x
        self.register_buffer("embeddings", torch.randn(entries, dim))
        self.register_buffer("ema_cluster_size", torch.zeros(entries, dtype=torch.float64))
        self.register_buffer("ema_embed_sum", torch.zeros(entries, dim, dtype=torch.float64))
        self.register_buffer("usage_count", torch.zeros(entries, dtype=torch.float64))

    def assign(self, flat: torch.Tensor) -> torch.Tensor:
        """Nearest-codeword indices for [N, D] vectors (no gradient)."""
        x_np = np.ascontiguousarray(flat.detach().cpu().numpy())
        cb_np = np.ascontiguousarray(self.embeddings.detach().cpu().numpy())
        idx = _kernels.nearest_codes(x_np, cb_np)
        return torch.from_numpy(np.asarray(idx)).to(flat.device)

    def _ema_update(self, flat: torch.Tensor, indices: torch.Tensor) -> None:
        counts = torch.bincount(indices, minlength=self.entries).to(torch.float64)
        sums = torch.zeros(self.entries, self.dim, dtype=torch.float64)
        sums.index_add_(0, indices, flat.detach().to(torch.float64))
        self.ema_cluster_size.mul_(self.decay).add_((1.0 - self.decay) * counts)
        self.ema_embed_sum.mul_(self.decay).add_((1.0 - self.decay) * sums)
        new_entries = self.ema_embed_sum / (self.ema_cluster_size.unsqueeze(1) + self.eps)
        self.embeddings.copy_(new_entries.to(self.embeddings.dtype))
        self.usage_count.add_(counts)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(quantized with straight-through gradients, indices, perplexity)."""
        if x.shape[-1] != self.dim:
            raise ConfigurationError(f"expected last dim {self.dim}, got {x.shape[-1]}")
        if self.identity:
            perp = torch.tensor(float(self.entries), dtype=x.dtype)
            return x, torch.zeros(x.shape[:-1], dtype=torch.long, device=x.device), perp
        lead = x.shape[:-1]
        flat = x.reshape(-1, self.dim)
        indices = self.assign(flat)
        if self.training:
            self._ema_update(flat, indices)
        codes = self.embeddings.index_select(0, indices).to(x.dtype)
        quantized = flat + (codes - flat).detach()
        probs = torch.bincount(indices, minlength=self.entries).to(torch.float64)
        probs = probs / probs.sum()
        nz = probs[probs > 0]
        perplexity = torch.exp(-(nz * nz.log()).sum()).to(x.dtype)
        return quantized.reshape(*lead, self.dim), indices.reshape(lead), perplexity

    def codewords(self, indices: torch.Tensor) -> torch.Tensor:
        """Raw codebook rows (no gradient path)."""
        return self.embeddings.index_select(0, indices.reshape(-1)).reshape(
            *indices.shape, self.dim
        )

    @torch.no_grad()
    def reseed_dead(self, vectors: torch.Tensor, generator: torch.Generator) -> int:
        """Replace entries used less than ``min_usage`` since the last reset
        with random rows of ``vectors`` [N, D]; returns how many were reseeded."""
        dead = torch.nonzero(self.usage_count < self.min_usage).flatten()
        if dead.numel() == 0:
            return 0
        flat = vectors.detach().reshape(-1, self.dim)
        pick = torch.randint(0, flat.shape[0], (dead.numel(),), generator=generator)
        chosen = flat[pick].to(self.embeddings.dtype)
        self.embeddings[dead] = chosen
        self.ema_cluster_size[dead] = 1.0
        self.ema_embed_sum[dead] = chosen.to(torch.float64)
        return int(dead.numel())

    @torch.no_grad()
    def reset_usage(self) -> None:
        self.usage_count.zero_()
