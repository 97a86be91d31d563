"""Run configuration: one serializable tree covering every stage.

``RunConfig.from_dict`` is strict — unknown keys anywhere in the tree are
rejected so a typo in a config file fails loudly instead of silently using a
default.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field

from .assoc import AssociationConfig
from .data import GeneratorConfig
from .diffusion import DiffusionConfig
from .errors import ConfigurationError
from .metrics import EvaluatorConfig
from .vqvae import HvqConfig, LossWeights, TrainSettings


@dataclass(frozen=True)
class EvalSettings:
    repeats: int = 20
    mmodality_repeats: int = 5
    pool_size: int = 32
    diversity_pairs: int = 30
    mmodality_generations: int = 10
    mmodality_prompts: int = 4
    sampler: str = "ddim"
    sampler_steps: int = 15

    def __post_init__(self) -> None:
        if min(self.repeats, self.mmodality_repeats) < 1:
            raise ConfigurationError("repeats must be >= 1")
        if self.mmodality_generations < 2:
            raise ConfigurationError("multimodality needs >= 2 generations per prompt")
        if self.pool_size < 2 or self.diversity_pairs < 1 or self.mmodality_prompts < 1:
            raise ConfigurationError("invalid evaluation settings")
        if self.sampler not in ("ddim", "ancestral"):
            raise ConfigurationError(f"unknown sampler {self.sampler!r}")
        if self.sampler_steps < 1:
            raise ConfigurationError("sampler_steps must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    data: GeneratorConfig = field(default_factory=GeneratorConfig)
    vqvae: HvqConfig = field(default_factory=HvqConfig)
    vqvae_train: TrainSettings = field(default_factory=TrainSettings)
    assoc: AssociationConfig = field(default_factory=AssociationConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    evaluator: EvaluatorConfig = field(default_factory=EvaluatorConfig)
    eval_settings: EvalSettings = field(default_factory=EvalSettings)
    # replaces every text cue vector with zeros, removing language conditioning
    zero_cues: bool = False

    def __post_init__(self) -> None:
        if self.data.num_frames != self.vqvae.num_frames:
            raise ConfigurationError(
                f"data generates {self.data.num_frames} frames but the autoencoder "
                f"expects {self.vqvae.num_frames}"
            )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _build_dataclass(cls, d, path="config")


def _build_dataclass(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must be a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown keys under {path}: {sorted(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        hint = hints.get(f.name)
        kwargs[f.name] = _coerce(hint, value, f"{path}.{f.name}")
    return cls(**kwargs)


def _coerce(hint, value, path: str):
    if hint is not None and dataclasses.is_dataclass(hint):
        return _build_dataclass(hint, value, path)
    origin = typing.get_origin(hint)
    if origin is tuple and isinstance(value, (list, tuple)):
        return tuple(value)
    return value


_CONFIG_CLASSES = (
    GeneratorConfig,
    HvqConfig,
    LossWeights,
    TrainSettings,
    AssociationConfig,
    DiffusionConfig,
    EvaluatorConfig,
    EvalSettings,
)


def desk_config() -> RunConfig:
    """Small configuration that trains on a laptop CPU; the package default."""
    return RunConfig(
        data=GeneratorConfig(num_samples=64, num_frames=64),
        vqvae=HvqConfig(
            num_frames=64, levels=4, latent_dim=128, codebook_entries=128,
            downsamples=(2, 2, 1, 1),
        ),
        diffusion=DiffusionConfig(timesteps=200, channels=(64, 128), blocks=2),
    )


def paper_scale_config() -> RunConfig:
    """Full-scale hyperparameters; runnable, far beyond desk budgets."""
    return RunConfig(
        data=GeneratorConfig(num_samples=2048, num_frames=64),
        vqvae=HvqConfig(
            num_frames=64, levels=6, latent_dim=512, codebook_entries=512,
            downsamples=(2, 2, 1, 1, 1, 1),
        ),
        vqvae_train=TrainSettings(steps_phase1=20000, steps_phase2=5000, batch_size=32),
        assoc=AssociationConfig(embed_dim=512, hidden_dim=512, steps=2000),
        diffusion=DiffusionConfig(
            timesteps=1000, channels=(128, 256, 512, 512), blocks=4, steps=20000,
            batch_size=32,
        ),
        evaluator=EvaluatorConfig(steps=2000),
        eval_settings=EvalSettings(diversity_pairs=300),
    )
