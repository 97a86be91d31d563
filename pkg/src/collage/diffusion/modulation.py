"""Time-dependent gates on planning-cue influence.

Coarse cue levels (the first ceil(L/2)) matter most early in sampling, when
global structure is decided, so their gate decays with t/T; fine levels ramp
up instead. Decay rates are learnable through a softplus; the scale lam is a
fixed buffer so ablations can pin the gate to a constant.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import ConfigurationError

HIGH = "high"
LOW = "low"


def level_kinds(levels: int) -> tuple[str, ...]:
    if levels < 1:
        raise ConfigurationError("levels must be >= 1")
    split = math.ceil(levels / 2)
    return tuple(HIGH if level <= split else LOW for level in range(1, levels + 1))


def gamma_value(kind: str, t: float, total: int, lam: float, k: float) -> float:
    """Reference scalar form of the gate; the module below vectorizes it."""
    if kind not in (HIGH, LOW):
        raise ConfigurationError(f"unknown level kind {kind!r}")
    frac = t / total
    decay = math.exp(-k * frac)
    return lam * decay if kind == HIGH else lam * (1.0 - decay)


class GammaModulation(nn.Module):
    def __init__(self, levels: int, modulate: bool = True) -> None:
        super().__init__()
        kinds = level_kinds(levels)
        self.levels = levels
        self.modulate = modulate
        # softplus(raw) == 1 at init so gates start with unit decay rate
        raw = math.log(math.expm1(1.0))
        self.raw_k = nn.Parameter(torch.full((levels,), raw))
        self.register_buffer("lam", torch.ones(levels))
        # derived from `levels`, so rebuilt on construction rather than stored
        self.register_buffer(
            "is_high", torch.tensor([kind == HIGH for kind in kinds]), persistent=False
        )

    def decay_rates(self) -> torch.Tensor:
        return nn.functional.softplus(self.raw_k)

    def forward(self, t: torch.Tensor, total: int) -> torch.Tensor:
        """t: [B] (1-based step index) -> gates [B, levels]."""
        if total < 1:
            raise ConfigurationError("total must be >= 1")
        frac = t.to(self.lam.dtype).reshape(-1, 1) / float(total)
        if not self.modulate:
            return self.lam.unsqueeze(0).expand(frac.shape[0], self.levels).clone()
        decay = torch.exp(-self.decay_rates().unsqueeze(0) * frac)
        gates = torch.where(self.is_high.unsqueeze(0), decay, 1.0 - decay)
        return self.lam.unsqueeze(0) * gates
