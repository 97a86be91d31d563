"""Noise predictor over the entity graph.

The latent state is a [B, F, V, K] tensor: F latent channels per entity node,
V nodes (agents first, then objects), K frames at the finest latent rate. Each
stage mixes three signal paths:

  * temporal convolutions per node (parallel odd kernels, summed),
  * graph attention across nodes at every frame,
  * cross-attention from node-time queries into per-level cue tokens whose
    keys and values are scaled by the time gate of that level.

Stages are stacked in a U shape: time-downsampled encoder stages, then
mirrored decoder stages with skip connections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

from ..errors import ConfigurationError
from .modulation import GammaModulation


@dataclass(frozen=True)
class DenoiserConfig:
    feature_dim: int
    num_nodes: int
    levels: int
    cue_token_dim: int
    cue_tokens: int
    seq_len: int
    total_steps: int
    blocks: int = 2
    channels: tuple[int, ...] = (128, 256)
    tcn_kernels: tuple[int, ...] = (3, 5, 7)
    heads: int = 8
    pe_dim: int = 128
    modulate: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "tcn_kernels", tuple(int(k) for k in self.tcn_kernels))
        if min(self.feature_dim, self.num_nodes, self.levels, self.cue_token_dim,
               self.cue_tokens, self.seq_len, self.total_steps) < 1:
            raise ConfigurationError("all denoiser dimensions must be positive")
        if self.blocks < 1 or len(self.channels) != self.blocks:
            raise ConfigurationError("channels must list one width per block")
        if any(c % self.heads != 0 for c in self.channels):
            raise ConfigurationError("every channel width must be divisible by heads")
        if not self.tcn_kernels or any(k % 2 == 0 for k in self.tcn_kernels):
            raise ConfigurationError("temporal kernels must be odd")
        if self.pe_dim % 2 != 0:
            raise ConfigurationError("pe_dim must be even")
        stride = 2 ** (self.blocks - 1)
        if self.seq_len % stride != 0:
            raise ConfigurationError(f"seq_len must be divisible by {stride} for {self.blocks} blocks")


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """t: [B] -> [B, dim] with sin/cos halves on a geometric frequency ladder."""
    if dim % 2 != 0:
        raise ConfigurationError("embedding dim must be even")
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32, device=t.device) / half)
    args = t.to(torch.float32).reshape(-1, 1) * freqs.reshape(1, -1)
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


class TemporalConvSum(nn.Module):
    """Sum of same-length convolutions at several kernel sizes plus a
    residual projection, followed by a ReLU."""

    def __init__(self, in_channels: int, out_channels: int, kernels: tuple[int, ...]) -> None:
        super().__init__()
        self.branches = nn.ModuleList(
            nn.Conv1d(in_channels, out_channels, k, padding=k // 2) for k in kernels
        )
        if in_channels == out_channels:
            self.residual: nn.Module = nn.Identity()
        else:
            self.residual = nn.Conv1d(in_channels, out_channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.residual(x)
        for branch in self.branches:
            out = out + branch(x)
        return torch.relu(out)


class GraphAttention(nn.Module):
    """Additive-score attention over graph neighbors with a residual
    LayerNorm. Nodes without neighbors pass through unchanged."""

    def __init__(self, dim: int, heads: int) -> None:
        super().__init__()
        if dim % heads != 0:
            raise ConfigurationError("dim must be divisible by heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.project = nn.Linear(dim, dim, bias=False)
        self.score_src = nn.Parameter(torch.empty(heads, self.head_dim))
        self.score_dst = nn.Parameter(torch.empty(heads, self.head_dim))
        nn.init.xavier_uniform_(self.score_src)
        nn.init.xavier_uniform_(self.score_dst)
        self.out_proj = nn.Linear(dim, dim)
        self.norm = nn.LayerNorm(dim)

    def forward(self, nodes: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
        """nodes: [B, V, C]; adjacency: bool [V, V], row i marks who i hears."""
        b, v, c = nodes.shape
        if adjacency.shape != (v, v):
            raise ConfigurationError("adjacency shape does not match node count")
        projected = self.project(nodes).reshape(b, v, self.heads, self.head_dim)
        src = (projected * self.score_src).sum(dim=-1)
        dst = (projected * self.score_dst).sum(dim=-1)
        scores = src.unsqueeze(2) + dst.unsqueeze(1)  # [B, V(target), V(source), H]
        scores = nn.functional.leaky_relu(scores, negative_slope=0.2)
        mask = adjacency.reshape(1, v, v, 1)
        scores = scores.masked_fill(~mask, float("-inf"))
        has_neighbor = adjacency.any(dim=1)
        attn = torch.softmax(scores, dim=2)
        attn = torch.nan_to_num(attn, nan=0.0)
        messages = torch.einsum("btsh,bshd->bthd", attn, projected)
        out = self.out_proj(messages.reshape(b, v, c))
        out = torch.where(has_neighbor.reshape(1, v, 1), out, torch.zeros_like(out))
        return self.norm(nodes + out)


class CueCrossAttention(nn.Module):
    """Node-time queries attend into one level's cue tokens; the tokens are
    multiplied by that level's time gate before the key/value projections, so
    a zero gate erases all dependence on cue content."""

    def __init__(self, dim: int, token_dim: int, heads: int) -> None:
        super().__init__()
        if dim % heads != 0:
            raise ConfigurationError("dim must be divisible by heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(token_dim, dim)
        self.v_proj = nn.Linear(token_dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, queries: torch.Tensor, tokens: torch.Tensor, gate: torch.Tensor) -> torch.Tensor:
        """queries: [B, Q, C]; tokens: [B, S, D_a]; gate: [B]."""
        b, q_len, c = queries.shape
        s = tokens.shape[1]
        scaled = tokens * gate.reshape(-1, 1, 1)
        q = self.q_proj(queries).reshape(b, q_len, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(scaled).reshape(b, s, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(scaled).reshape(b, s, self.heads, self.head_dim).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(self.head_dim), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, q_len, c)
        return self.out_proj(out)


class DenoiserStage(nn.Module):
    """One mixing stage: temporal conv + graph attention, per-level gated
    cue branches merged by a linear bottleneck, then a second conv/attention
    pass."""

    def __init__(self, in_channels: int, out_channels: int, config: DenoiserConfig) -> None:
        super().__init__()
        c = out_channels
        self.tcn_a = TemporalConvSum(in_channels, c, config.tcn_kernels)
        self.time_a = nn.Linear(config.pe_dim, c)
        self.gat_a = GraphAttention(c, config.heads)
        self.cue_attn = nn.ModuleList(
            CueCrossAttention(c, config.cue_token_dim, config.heads) for _ in range(config.levels)
        )
        self.merge = nn.Linear((1 + config.levels) * c, c)
        self.tcn_b = TemporalConvSum(c, c, config.tcn_kernels)
        self.time_b = nn.Linear(config.pe_dim, c)
        self.gat_b = GraphAttention(c, config.heads)

    def _conv_pass(self, x: torch.Tensor, tcn: TemporalConvSum, time_proj: nn.Linear,
                   gat: GraphAttention, pe: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
        b, _, v, k = x.shape
        flat = x.permute(0, 2, 1, 3).reshape(b * v, x.shape[1], k)
        flat = tcn(flat)
        flat = flat + time_proj(pe).repeat_interleave(v, dim=0).unsqueeze(-1)
        c = flat.shape[1]
        frames = flat.reshape(b, v, c, k).permute(0, 3, 1, 2).reshape(b * k, v, c)
        frames = gat(frames, adjacency)
        return frames.reshape(b, k, v, c).permute(0, 3, 2, 1)

    def forward(self, x: torch.Tensor, pe: torch.Tensor, cue_tokens: torch.Tensor,
                gates: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
        """x: [B, C_in, V, K] -> [B, C_out, V, K]."""
        x = self._conv_pass(x, self.tcn_a, self.time_a, self.gat_a, pe, adjacency)
        b, c, v, k = x.shape
        queries = x.permute(0, 2, 3, 1).reshape(b, v * k, c)
        branches = [queries]
        for level, attn in enumerate(self.cue_attn):
            branches.append(attn(queries, cue_tokens[:, level], gates[:, level]))
        merged = self.merge(torch.cat(branches, dim=-1))
        x = merged.reshape(b, v, k, c).permute(0, 3, 1, 2)
        return self._conv_pass(x, self.tcn_b, self.time_b, self.gat_b, pe, adjacency)


class GraphDenoiser(nn.Module):
    def __init__(self, config: DenoiserConfig) -> None:
        super().__init__()
        self.config = config
        ch = config.channels
        self.gamma = GammaModulation(config.levels, modulate=config.modulate)
        self.in_proj = nn.Conv2d(config.feature_dim, ch[0], 1)
        self.enc_stages = nn.ModuleList(
            DenoiserStage(ch[i], ch[i], config) for i in range(config.blocks)
        )
        self.down = nn.ModuleList(
            nn.Conv2d(ch[i], ch[i + 1], (1, 4), stride=(1, 2), padding=(0, 1))
            for i in range(config.blocks - 1)
        )
        self.up = nn.ModuleList(
            nn.Conv2d(ch[i + 1], ch[i], (1, 3), padding=(0, 1))
            for i in range(config.blocks - 1)
        )
        self.fuse = nn.ModuleList(
            nn.Conv2d(2 * ch[i], ch[i], 1) for i in range(config.blocks - 1)
        )
        self.dec_stages = nn.ModuleList(
            DenoiserStage(ch[i], ch[i], config) for i in range(config.blocks - 1)
        )
        self.out_proj = nn.Conv2d(ch[0], config.feature_dim, 1)

    def _check_inputs(self, x: torch.Tensor, t: torch.Tensor, cue_tokens: torch.Tensor) -> None:
        cfg = self.config
        b = x.shape[0]
        if x.shape != (b, cfg.feature_dim, cfg.num_nodes, cfg.seq_len):
            raise ConfigurationError(f"latent state has shape {tuple(x.shape)}")
        if t.shape != (b,):
            raise ConfigurationError("t must be a [B] tensor of step indices")
        if bool((t < 1).any()) or bool((t > cfg.total_steps).any()):
            raise ConfigurationError(f"step indices must lie in 1..{cfg.total_steps}")
        expected = (b, cfg.levels, cfg.cue_tokens, cfg.cue_token_dim)
        if cue_tokens.shape != expected:
            raise ConfigurationError(
                f"cue tokens have shape {tuple(cue_tokens.shape)}, expected {expected}"
            )

    def forward(self, x: torch.Tensor, t: torch.Tensor, cue_tokens: torch.Tensor,
                adjacency: torch.Tensor | None = None) -> torch.Tensor:
        """Predict the noise component of x: [B, F, V, K] -> [B, F, V, K]."""
        cfg = self.config
        self._check_inputs(x, t, cue_tokens)
        if adjacency is None:
            eye = torch.eye(cfg.num_nodes, dtype=torch.bool, device=x.device)
            adjacency = ~eye
        pe = sinusoidal_embedding(t, cfg.pe_dim).to(x.dtype)
        gates = self.gamma(t, cfg.total_steps).to(x.dtype)
        h = self.in_proj(x)
        skips: list[torch.Tensor] = []
        for i, stage in enumerate(self.enc_stages):
            h = stage(h, pe, cue_tokens, gates, adjacency)
            if i < cfg.blocks - 1:
                skips.append(h)
                h = self.down[i](h)
        for i in reversed(range(cfg.blocks - 1)):
            h = nn.functional.interpolate(h, scale_factor=(1, 2), mode="nearest")
            h = self.up[i](h)
            h = self.fuse[i](torch.cat([h, skips[i]], dim=1))
            h = self.dec_stages[i](h, pe, cue_tokens, gates, adjacency)
        return self.out_proj(h)
