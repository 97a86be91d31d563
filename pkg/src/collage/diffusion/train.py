"""Training for the latent-space generator.

The autoencoder and association embedders are frozen inputs here: motion is
encoded once into per-node latent stacks, standardized per channel, and the
denoiser learns to invert the forward noising of those stacks conditioned on
each sample's augmented cue tokens.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import torch

from ..assoc import AssocTrainResult, augment_cues
from ..errors import ConfigurationError, TrainingError
from ..seeding import seed_torch_global, torch_generator
from ..vqvae import HierarchicalMotionVqvae, MotionTensors, encode_all
from .denoiser import DenoiserConfig, GraphDenoiser
from .graph import InteractionGraph
from .sampling import diffusion_loss
from .schedule import NoiseSchedule

logger = logging.getLogger(__name__)

_STD_FLOOR = 1e-6


@dataclass(frozen=True)
class DiffusionConfig:
    timesteps: int = 200
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    blocks: int = 2
    channels: tuple[int, ...] = (64, 128)
    tcn_kernels: tuple[int, ...] = (3, 5, 7)
    heads: int = 8
    pe_dim: int = 128
    modulate: bool = True
    steps: int = 1200
    batch_size: int = 8
    lr: float = 2e-4
    weight_decay: float = 1e-5
    grad_clip: float = 1.0
    log_every: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "tcn_kernels", tuple(int(k) for k in self.tcn_kernels))
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigurationError("steps and batch_size must be >= 1")
        if self.lr <= 0 or self.weight_decay < 0 or self.grad_clip <= 0:
            raise ConfigurationError("invalid optimizer settings")

    def make_schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.timesteps, self.beta_start, self.beta_end)


@dataclass
class LatentStats:
    """Per-channel first and second moments of the node latents."""

    mean: torch.Tensor  # [D]
    std: torch.Tensor  # [D]

    def standardize(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.mean.reshape(1, -1, 1, 1)) / self.std.reshape(1, -1, 1, 1)

    def destandardize(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.std.reshape(1, -1, 1, 1) + self.mean.reshape(1, -1, 1, 1)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LatentStats":
        return cls(
            mean=torch.tensor(d["mean"], dtype=torch.float32),
            std=torch.tensor(d["std"], dtype=torch.float32),
        )


@torch.no_grad()
def build_latent_nodes(vqvae: HierarchicalMotionVqvae, tensors: MotionTensors) -> torch.Tensor:
    """Encode every sample and stack level-aggregated latents into node
    form: [N, D, V, K_1] with agent nodes before object nodes."""
    latents = encode_all(vqvae, tensors)
    agg_h = vqvae.aggregate_levels(latents, "agent")
    agg_o = vqvae.aggregate_levels(latents, "object")
    nodes = torch.cat([agg_h, agg_o], dim=1)  # [N, V, K_1, D]
    return nodes.permute(0, 3, 1, 2).contiguous()


def compute_latent_stats(nodes: torch.Tensor) -> LatentStats:
    mean = nodes.double().mean(dim=(0, 2, 3))
    std = nodes.double().std(dim=(0, 2, 3), unbiased=False).clamp_min(_STD_FLOOR)
    return LatentStats(mean=mean.float(), std=std.float())


@torch.no_grad()
def build_cue_token_bank(assoc: AssocTrainResult, cues: torch.Tensor) -> torch.Tensor:
    """Augment every sample's cue hierarchy: [N, L, 2, D] -> [N, L, 1+u, D_a]."""
    tokens = [
        augment_cues(assoc.embedders, assoc.codebooks, cues[i]).tokens
        for i in range(cues.shape[0])
    ]
    return torch.stack(tokens)


@dataclass
class DiffusionTrainResult:
    model: GraphDenoiser
    schedule: NoiseSchedule
    latent_stats: LatentStats
    graph: InteractionGraph
    history: list[dict] = field(default_factory=list)
    final_loss: float = float("nan")


def train_diffusion(
    vqvae: HierarchicalMotionVqvae,
    assoc: AssocTrainResult,
    tensors: MotionTensors,
    config: DiffusionConfig,
    seed: int,
) -> DiffusionTrainResult:
    vqvae.eval()
    assoc.embedders.eval()
    nodes = build_latent_nodes(vqvae, tensors)
    stats = compute_latent_stats(nodes)
    x0 = stats.standardize(nodes)
    token_bank = build_cue_token_bank(assoc, tensors.cues)
    graph = InteractionGraph(
        num_agents=vqvae.config.num_humans, num_objects=vqvae.config.num_objects
    )
    adjacency = graph.adjacency()
    schedule = config.make_schedule()

    seed_torch_global(seed, "diffusion-init")
    denoiser_config = DenoiserConfig(
        feature_dim=vqvae.config.latent_dim,
        num_nodes=graph.num_nodes,
        levels=vqvae.config.levels,
        cue_token_dim=assoc.embedders.config.embed_dim,
        cue_tokens=token_bank.shape[2],
        seq_len=x0.shape[-1],
        total_steps=config.timesteps,
        blocks=config.blocks,
        channels=config.channels,
        tcn_kernels=config.tcn_kernels,
        heads=config.heads,
        pe_dim=config.pe_dim,
        modulate=config.modulate,
    )
    model = GraphDenoiser(denoiser_config)
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    g = torch_generator(seed, "diffusion-batches")
    n = x0.shape[0]
    history: list[dict] = []
    running = None
    model.train()
    for step in range(1, config.steps + 1):
        idx = torch.randint(0, n, (min(config.batch_size, n),), generator=g)
        opt.zero_grad()
        loss = diffusion_loss(
            model, x0[idx], schedule,
            cue_tokens=token_bank[idx], adjacency=adjacency, generator=g,
        )
        value = float(loss.detach())
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite denoiser loss at step {step}")
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
        opt.step()
        running = value if running is None else 0.9 * running + 0.1 * value
        if step % config.log_every == 0 or step == 1:
            entry = {"step": step, "loss": value, "running": running}
            history.append(entry)
            logger.info("diffusion step %d loss %.5f (running %.5f)", step, value, running)
    model.eval()
    return DiffusionTrainResult(
        model=model,
        schedule=schedule,
        latent_stats=stats,
        graph=graph,
        history=history,
        final_loss=running if running is not None else float("nan"),
    )
