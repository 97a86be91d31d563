"""Graph-structured latent generator: schedule, denoiser, samplers, decoding."""

from .denoiser import DenoiserConfig, GraphDenoiser, sinusoidal_embedding
from .generate import SAMPLERS, GenerationSettings, decode_latent_nodes, generate_samples, sample_latent_nodes
from .graph import InteractionGraph
from .modulation import GammaModulation, gamma_value, level_kinds
from .sampling import ancestral_sample, ddim_sample, diffusion_loss, forward_diffuse
from .schedule import NoiseSchedule, ddim_timesteps
from .train import (
    DiffusionConfig,
    DiffusionTrainResult,
    LatentStats,
    build_cue_token_bank,
    build_latent_nodes,
    compute_latent_stats,
    train_diffusion,
)

__all__ = [
    "DenoiserConfig",
    "GraphDenoiser",
    "sinusoidal_embedding",
    "SAMPLERS",
    "GenerationSettings",
    "decode_latent_nodes",
    "generate_samples",
    "sample_latent_nodes",
    "InteractionGraph",
    "GammaModulation",
    "gamma_value",
    "level_kinds",
    "ancestral_sample",
    "ddim_sample",
    "diffusion_loss",
    "forward_diffuse",
    "NoiseSchedule",
    "ddim_timesteps",
    "DiffusionConfig",
    "DiffusionTrainResult",
    "LatentStats",
    "build_cue_token_bank",
    "build_latent_nodes",
    "compute_latent_stats",
    "train_diffusion",
]
