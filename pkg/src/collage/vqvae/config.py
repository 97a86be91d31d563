"""Configuration for the hierarchical quantized motion autoencoder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ConfigurationError


@dataclass(frozen=True)
class LossWeights:
    recon: float = 1.0
    commit: float = 0.25  # per level
    codebook: float = 0.25  # per level (diagnostic under EMA updates)
    align: float = 0.5  # per level
    smooth: float = 0.1
    penetration: float = 10.0
    contact: float = 5.0
    disent: float = 1.0

    def __post_init__(self) -> None:
        for name, val in self.__dict__.items():
            if val < 0:
                raise ConfigurationError(f"loss weight {name} must be >= 0, got {val}")


@dataclass(frozen=True)
class HvqConfig:
    num_humans: int = 2
    num_objects: int = 1
    human_keypoints: int = 22
    object_keypoints: int = 9
    num_frames: int = 64
    levels: int = 4
    latent_dim: int = 128
    codebook_entries: int = 128
    downsamples: tuple[int, ...] = (2, 2, 1, 1)
    conv_blocks: int = 2
    kernel_size: int = 3
    attention_heads: int = 8
    ema_decay: float = 0.99
    ema_eps: float = 1e-5
    dead_code_min_usage: float = 1.0
    contact_threshold: float = 0.05
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self) -> None:
        if self.num_humans < 1 or self.num_objects < 1:
            raise ConfigurationError("need at least one human and one object")
        if self.levels < 1:
            raise ConfigurationError("levels must be >= 1")
        if len(self.downsamples) != self.levels:
            raise ConfigurationError(
                f"downsamples has {len(self.downsamples)} entries for {self.levels} levels"
            )
        if any(d < 1 for d in self.downsamples):
            raise ConfigurationError("downsample factors must be >= 1")
        k = self.num_frames
        for l, d in enumerate(self.downsamples, start=1):
            if k % d:
                raise ConfigurationError(
                    f"frame count not divisible by downsamples at level {l}: {k} % {d}"
                )
            k //= d
        if k < 1:
            raise ConfigurationError("downsampling collapses the sequence")
        if self.latent_dim % self.attention_heads:
            raise ConfigurationError("latent_dim must be divisible by attention_heads")
        if self.codebook_entries < 2:
            raise ConfigurationError("codebook needs at least 2 entries")
        if not (0.0 < self.ema_decay < 1.0):
            raise ConfigurationError("ema_decay must be in (0, 1)")
        if self.ema_eps <= 0:
            raise ConfigurationError("ema_eps must be positive")
        if self.kernel_size % 2 == 0:
            raise ConfigurationError("kernel_size must be odd")
        if self.contact_threshold <= 0:
            raise ConfigurationError("contact_threshold must be positive")

    @property
    def human_feature_dim(self) -> int:
        return 3 * self.human_keypoints

    @property
    def object_feature_dim(self) -> int:
        return 3 * self.object_keypoints

    def level_length(self, level: int) -> int:
        """Latent sequence length at 1-based ``level``."""
        if not (1 <= level <= self.levels):
            raise ConfigurationError(f"level must be in 1..{self.levels}, got {level}")
        return self.num_frames // math.prod(self.downsamples[:level])

    @property
    def finest_length(self) -> int:
        return self.level_length(1)

    def upsample_to_finest(self, level: int) -> int:
        return self.finest_length // self.level_length(level)
