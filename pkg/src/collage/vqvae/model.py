"""Hierarchical multi-entity quantized motion autoencoder.

Per level: shared-per-kind encoders advance the raw feature chain, the level
cue is concatenated and projected back to D, cross-entity attention mixes
all agents and objects, and per-kind EMA codebooks quantize the result. The
decoder consumes the sum of all levels' quantized latents upsampled to the
finest temporal resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import ConfigurationError
from .config import HvqConfig
from .layers import CrossEntityAttention, CueProjection, LevelEncoder, MotionDecoder
from .quantizer import VectorQuantizerEma


@dataclass
class LevelLatents:
    """Per-level quantization record. Tensors: [B, n|m, K_l, D]; indices long."""

    level: int  # 1-based
    length: int
    humans_pre: torch.Tensor
    humans_q: torch.Tensor
    humans_idx: torch.Tensor
    objects_pre: torch.Tensor
    objects_q: torch.Tensor
    objects_idx: torch.Tensor
    human_perplexity: torch.Tensor
    object_perplexity: torch.Tensor


@dataclass
class VqvaeOutput:
    recon_humans: torch.Tensor  # [B, n, K, F_h]
    recon_objects: torch.Tensor  # [B, m, K, F_o]
    levels: list[LevelLatents]


class HierarchicalMotionVqvae(nn.Module):
    def __init__(self, config: HvqConfig, identity_quantizers: bool = False):
        super().__init__()
        self.config = config
        c = config
        self.human_encoders = nn.ModuleList(
            LevelEncoder(
                in_dim=c.human_feature_dim if l == 0 else c.latent_dim,
                dim=c.latent_dim,
                downsample=c.downsamples[l],
                conv_blocks=c.conv_blocks,
                kernel_size=c.kernel_size,
            )
            for l in range(c.levels)
        )
        self.object_encoders = nn.ModuleList(
            LevelEncoder(
                in_dim=c.object_feature_dim if l == 0 else c.latent_dim,
                dim=c.latent_dim,
                downsample=c.downsamples[l],
                conv_blocks=c.conv_blocks,
                kernel_size=c.kernel_size,
            )
            for l in range(c.levels)
        )
        self.human_cue_proj = nn.ModuleList(CueProjection(c.latent_dim) for _ in range(c.levels))
        self.object_cue_proj = nn.ModuleList(CueProjection(c.latent_dim) for _ in range(c.levels))
        self.attention = nn.ModuleList(
            CrossEntityAttention(c.latent_dim, c.attention_heads) for _ in range(c.levels)
        )
        self.human_quantizers = nn.ModuleList(
            VectorQuantizerEma(
                c.codebook_entries,
                c.latent_dim,
                decay=c.ema_decay,
                eps=c.ema_eps,
                min_usage=c.dead_code_min_usage,
                identity=identity_quantizers,
            )
            for _ in range(c.levels)
        )
        self.object_quantizers = nn.ModuleList(
            VectorQuantizerEma(
                c.codebook_entries,
                c.latent_dim,
                decay=c.ema_decay,
                eps=c.ema_eps,
                min_usage=c.dead_code_min_usage,
                identity=identity_quantizers,
            )
            for _ in range(c.levels)
        )
        self.human_decoder = MotionDecoder(
            c.latent_dim, c.human_feature_dim, c.downsamples[0], c.conv_blocks, c.kernel_size
        )
        self.object_decoder = MotionDecoder(
            c.latent_dim, c.object_feature_dim, c.downsamples[0], c.conv_blocks, c.kernel_size
        )

    # ------------------------------------------------------------- encoding

    def _check_inputs(
        self, humans: torch.Tensor, objects: torch.Tensor, cues: torch.Tensor
    ) -> None:
        c = self.config
        if humans.ndim != 4 or humans.shape[1] != c.num_humans or humans.shape[3] != c.human_feature_dim:
            raise ConfigurationError(
                f"humans must be [B, {c.num_humans}, K, {c.human_feature_dim}], got "
                f"{tuple(humans.shape)}"
            )
        if objects.ndim != 4 or objects.shape[1] != c.num_objects or objects.shape[3] != c.object_feature_dim:
            raise ConfigurationError(
                f"objects must be [B, {c.num_objects}, K, {c.object_feature_dim}], got "
                f"{tuple(objects.shape)}"
            )
        if humans.shape[2] != c.num_frames or objects.shape[2] != c.num_frames:
            raise ConfigurationError(f"expected {c.num_frames} frames")
        if cues.shape != (humans.shape[0], c.levels, 2, c.latent_dim):
            raise ConfigurationError(
                f"cues must be [B, {c.levels}, 2, {c.latent_dim}], got {tuple(cues.shape)}"
            )

    def encode(
        self, humans: torch.Tensor, objects: torch.Tensor, cues: torch.Tensor
    ) -> list[LevelLatents]:
        self._check_inputs(humans, objects, cues)
        c = self.config
        b, n = humans.shape[0], c.num_humans
        m = c.num_objects
        chain_h = humans.reshape(b * n, c.num_frames, c.human_feature_dim)
        chain_o = objects.reshape(b * m, c.num_frames, c.object_feature_dim)
        levels: list[LevelLatents] = []
        for l in range(c.levels):
            chain_h = self.human_encoders[l](chain_h)
            chain_o = self.object_encoders[l](chain_o)
            k_l = c.level_length(l + 1)
            cue_h = cues[:, l, 0, :].repeat_interleave(n, dim=0)  # [B*n, D]
            cue_o = cues[:, l, 1, :].repeat_interleave(m, dim=0)
            zt_h = self.human_cue_proj[l](chain_h, cue_h)
            zt_o = self.object_cue_proj[l](chain_o, cue_o)
            streams = [zt_h.reshape(b, n, k_l, -1)[:, i] for i in range(n)] + [
                zt_o.reshape(b, m, k_l, -1)[:, i] for i in range(m)
            ]
            mixed, _ = self.attention[l](streams)
            hz_h = torch.stack(mixed[:n], dim=1)  # [B, n, K_l, D]
            hz_o = torch.stack(mixed[n:], dim=1)
            q_h, idx_h, perp_h = self.human_quantizers[l](hz_h)
            q_o, idx_o, perp_o = self.object_quantizers[l](hz_o)
            levels.append(
                LevelLatents(
                    level=l + 1,
                    length=k_l,
                    humans_pre=hz_h,
                    humans_q=q_h,
                    humans_idx=idx_h,
                    objects_pre=hz_o,
                    objects_q=q_o,
                    objects_idx=idx_o,
                    human_perplexity=perp_h,
                    object_perplexity=perp_o,
                )
            )
        return levels

    # ------------------------------------------------------------- decoding

    def aggregate_levels(self, latents: list[LevelLatents], kind: str) -> torch.Tensor:
        """Sum quantized latents across levels at the finest resolution.

        Accumulates in float64 so the sum is independent of level order.
        Returns [B, n|m, K_1, D].
        """
        c = self.config
        parts = []
        for lat in latents:
            q = lat.humans_q if kind == "agent" else lat.objects_q
            factor = c.upsample_to_finest(lat.level)
            if factor > 1:
                q = q.repeat_interleave(factor, dim=2)
            parts.append(q)
        stacked = torch.stack(parts, dim=0)
        return stacked.double().sum(dim=0).to(stacked.dtype)

    def decode(self, latents: list[LevelLatents]) -> tuple[torch.Tensor, torch.Tensor]:
        c = self.config
        agg_h = self.aggregate_levels(latents, "agent")
        agg_o = self.aggregate_levels(latents, "object")
        b, n = agg_h.shape[0], agg_h.shape[1]
        m = agg_o.shape[1]
        rec_h = self.human_decoder(agg_h.reshape(b * n, c.finest_length, c.latent_dim))
        rec_o = self.object_decoder(agg_o.reshape(b * m, c.finest_length, c.latent_dim))
        return (
            rec_h.reshape(b, n, c.num_frames, c.human_feature_dim),
            rec_o.reshape(b, m, c.num_frames, c.object_feature_dim),
        )

    def forward(
        self, humans: torch.Tensor, objects: torch.Tensor, cues: torch.Tensor
    ) -> VqvaeOutput:
        latents = self.encode(humans, objects, cues)
        rec_h, rec_o = self.decode(latents)
        return VqvaeOutput(recon_humans=rec_h, recon_objects=rec_o, levels=latents)

    @torch.no_grad()
    def reseed_dead_codes(self, latents: list[LevelLatents], generator: torch.Generator) -> int:
        """Epoch-boundary dead-code refresh from the latest pre-quant vectors."""
        total = 0
        for lat in latents:
            l = lat.level - 1
            total += self.human_quantizers[l].reseed_dead(lat.humans_pre, generator)
            total += self.object_quantizers[l].reseed_dead(lat.objects_pre, generator)
            self.human_quantizers[l].reset_usage()
            self.object_quantizers[l].reset_usage()
        return total
