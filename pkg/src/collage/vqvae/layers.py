"""Building blocks: level encoders, cue projection, cross-entity attention,
and the shared motion decoder. Sequence tensors are [B, K, C] at module
boundaries; convolutions transpose internally."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigurationError


class ResidualConvBlock(nn.Module):
    def __init__(self, dim: int, kernel_size: int):
        super().__init__()
        pad = kernel_size // 2
        self.conv1 = nn.Conv1d(dim, dim, kernel_size, padding=pad)
        self.conv2 = nn.Conv1d(dim, dim, kernel_size, padding=pad)

    def forward(self, x: torch.Tensor) -> torch.Tensor:  # [B, C, K]
        return x + self.conv2(F.relu(self.conv1(x)))


class LevelEncoder(nn.Module):
    """Conv stack with optional strided temporal downsampling."""

    def __init__(self, in_dim: int, dim: int, downsample: int, conv_blocks: int, kernel_size: int):
        super().__init__()
        self.downsample = downsample
        self.in_proj = nn.Conv1d(in_dim, dim, 1)
        self.blocks = nn.ModuleList(ResidualConvBlock(dim, kernel_size) for _ in range(conv_blocks))
        if downsample > 1:
            self.down = nn.Conv1d(
                dim, dim, kernel_size=2 * downsample - 1, stride=downsample, padding=downsample - 1
            )
        else:
            self.down = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:  # [B, K, C_in] -> [B, K/ds, D]
        h = self.in_proj(x.transpose(1, 2))
        for block in self.blocks:
            h = F.relu(block(h))
        if self.down is not None:
            h = self.down(h)
        return h.transpose(1, 2)


class CueProjection(nn.Module):
    """Concat a level cue onto every timestep, then project 2D -> D."""

    def __init__(self, dim: int):
        super().__init__()
        self.proj = nn.Linear(2 * dim, dim)

    def forward(self, z: torch.Tensor, cue: torch.Tensor) -> torch.Tensor:
        # z: [B, K, D]; cue: [B, D]
        if cue.shape[-1] != z.shape[-1]:
            raise ConfigurationError(
                f"cue dim {cue.shape[-1]} must match latent dim {z.shape[-1]}"
            )
        tiled = cue.unsqueeze(1).expand(-1, z.shape[1], -1)
        return self.proj(torch.cat([z, tiled], dim=-1))


class CrossEntityAttention(nn.Module):
    """Each entity attends to every other entity; contributions sum.

    A_i = sum_{j != i} MHA(Q_i, K_j, V_j), output = LayerNorm(x_i + A_i).
    With a single entity the sum is empty and the module reduces to
    LayerNorm(x_i) exactly.
    """

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ConfigurationError("dim must be divisible by heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.norm = nn.LayerNorm(dim)

    def _split(self, x: torch.Tensor) -> torch.Tensor:  # [B, K, D] -> [B, H, K, dh]
        b, k, _ = x.shape
        return x.view(b, k, self.heads, self.head_dim).transpose(1, 2)

    def forward(
        self, streams: list[torch.Tensor], return_weights: bool = False
    ) -> tuple[list[torch.Tensor], dict[tuple[int, int], torch.Tensor]]:
        """streams: per-entity [B, K, D] (shared K). Returns the updated
        streams and, when asked, the per-pair attention weights."""
        n = len(streams)
        if n < 1:
            raise ConfigurationError("attention needs at least one stream")
        qs = [self._split(self.q_proj(s)) for s in streams]
        ks = [self._split(self.k_proj(s)) for s in streams]
        vs = [self._split(self.v_proj(s)) for s in streams]
        scale = 1.0 / math.sqrt(self.head_dim)
        weights: dict[tuple[int, int], torch.Tensor] = {}
        outs = []
        for i in range(n):
            acc = None
            for j in range(n):
                if j == i:
                    continue
                attn = torch.softmax(qs[i] @ ks[j].transpose(-1, -2) * scale, dim=-1)
                if return_weights:
                    weights[(i, j)] = attn
                pair = attn @ vs[j]  # [B, H, K, dh]
                acc = pair if acc is None else acc + pair
            if acc is None:
                outs.append(self.norm(streams[i]))
            else:
                b, _, k, _ = acc.shape
                merged = acc.transpose(1, 2).reshape(b, k, self.dim)
                outs.append(self.norm(streams[i] + self.out_proj(merged)))
        return outs, weights


class MotionDecoder(nn.Module):
    """Finest-level latents -> frame features, with nearest-neighbor upsampling."""

    def __init__(self, dim: int, out_dim: int, upsample: int, conv_blocks: int, kernel_size: int):
        super().__init__()
        self.upsample = upsample
        self.blocks = nn.ModuleList(ResidualConvBlock(dim, kernel_size) for _ in range(conv_blocks))
        self.out = nn.Conv1d(dim, out_dim, kernel_size, padding=kernel_size // 2)

    def forward(self, z: torch.Tensor) -> torch.Tensor:  # [B, K1, D] -> [B, K1*up, out]
        if self.upsample > 1:
            z = z.repeat_interleave(self.upsample, dim=1)
        h = z.transpose(1, 2)
        for block in self.blocks:
            h = F.relu(block(h))
        return self.out(h).transpose(1, 2)
