"""Forward noising, the training objective, and the two samplers.

Step indices are 1-based. Ancestral sampling uses the posterior variance
sigma_t^2 = beta_t and injects no noise on the final step; the deterministic
sampler walks an evenly spaced sub-grid of steps with zero injected noise.
"""

from __future__ import annotations

from typing import Callable, Optional

import torch

from ..errors import ConfigurationError
from .schedule import NoiseSchedule, ddim_timesteps

# (x_t, t, cue_tokens, adjacency) -> predicted noise
DenoiseFn = Callable[[torch.Tensor, torch.Tensor, Optional[torch.Tensor], Optional[torch.Tensor]], torch.Tensor]


def _gather_alpha_bar(schedule: NoiseSchedule, t: torch.Tensor) -> torch.Tensor:
    bars = torch.as_tensor(schedule.alpha_bars, dtype=torch.float64)
    return bars[t.long() - 1]


def _expand(scalars: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    shape = (like.shape[0],) + (1,) * (like.ndim - 1)
    return scalars.reshape(shape).to(like.dtype)


def forward_diffuse(x0: torch.Tensor, t: torch.Tensor, schedule: NoiseSchedule,
                    eps: torch.Tensor) -> torch.Tensor:
    """x_t = sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) eps."""
    if eps.shape != x0.shape:
        raise ConfigurationError("noise must match the sample shape")
    if t.shape != (x0.shape[0],):
        raise ConfigurationError("t must hold one step index per sample")
    bars = _gather_alpha_bar(schedule, t)
    return _expand(torch.sqrt(bars), x0) * x0 + _expand(torch.sqrt(1.0 - bars), x0) * eps


def diffusion_loss(model: DenoiseFn, x0: torch.Tensor, schedule: NoiseSchedule,
                   cue_tokens: torch.Tensor | None = None,
                   adjacency: torch.Tensor | None = None,
                   t: torch.Tensor | None = None,
                   eps: torch.Tensor | None = None,
                   generator: torch.Generator | None = None) -> torch.Tensor:
    """Mean squared error between injected and predicted noise. Step indices
    and noise are drawn here unless pinned by the caller."""
    batch = x0.shape[0]
    if t is None:
        t = torch.randint(1, schedule.timesteps + 1, (batch,), generator=generator)
    if eps is None:
        eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    x_t = forward_diffuse(x0, t, schedule, eps)
    predicted = model(x_t, t, cue_tokens, adjacency)
    return torch.mean((predicted - eps) ** 2)


def ancestral_sample(model: DenoiseFn, schedule: NoiseSchedule, shape: tuple[int, ...],
                     cue_tokens: torch.Tensor | None = None,
                     adjacency: torch.Tensor | None = None,
                     generator: torch.Generator | None = None,
                     noise_scale: float = 1.0) -> torch.Tensor:
    """Full-chain sampler: for t = T..1,
    x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t)
              + noise_scale * sqrt(beta_t) * z,  with z = 0 at t = 1."""
    x = torch.randn(shape, generator=generator)
    batch = shape[0]
    with torch.no_grad():
        for step in range(schedule.timesteps, 0, -1):
            t = torch.full((batch,), step, dtype=torch.long)
            predicted = model(x, t, cue_tokens, adjacency)
            beta = schedule.beta(step)
            alpha = schedule.alpha(step)
            bar = schedule.alpha_bar(step)
            mean = (x - beta / (1.0 - bar) ** 0.5 * predicted) / alpha ** 0.5
            if step > 1:
                z = torch.randn(shape, generator=generator)
                x = mean + noise_scale * beta ** 0.5 * z
            else:
                x = mean
    return x


def ddim_sample(model: DenoiseFn, schedule: NoiseSchedule, shape: tuple[int, ...],
                num_steps: int,
                cue_tokens: torch.Tensor | None = None,
                adjacency: torch.Tensor | None = None,
                generator: torch.Generator | None = None) -> torch.Tensor:
    """Deterministic sub-grid sampler (zero injected noise): each step maps
    x_t to sqrt(alpha_bar_prev) * x0_pred + sqrt(1 - alpha_bar_prev) * eps_hat,
    with alpha_bar at step 0 taken as 1."""
    taus = ddim_timesteps(schedule.timesteps, num_steps)
    x = torch.randn(shape, generator=generator)
    batch = shape[0]
    with torch.no_grad():
        for i, step in enumerate(taus):
            prev = taus[i + 1] if i + 1 < len(taus) else 0
            bar = schedule.alpha_bar(step)
            bar_prev = schedule.alpha_bar(prev)
            t = torch.full((batch,), step, dtype=torch.long)
            predicted = model(x, t, cue_tokens, adjacency)
            x0_pred = (x - (1.0 - bar) ** 0.5 * predicted) / bar ** 0.5
            x = bar_prev ** 0.5 * x0_pred + (1.0 - bar_prev) ** 0.5 * predicted
    return x
