"""Linear-beta noise schedule and the DDIM timestep grid.

Timesteps are 1-based (t = 1..T); alpha_bar(0) is defined as 1 so samplers
can jump to the clean-signal prediction on their final step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray  # float64 [T]
    kind: str = "linear"

    def __post_init__(self) -> None:
        b = np.asarray(self.betas, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "betas", b)
        if b.shape[0] < 1:
            raise ConfigurationError("schedule needs at least one step")
        if np.any(b <= 0) or np.any(b >= 1):
            raise ConfigurationError("betas must lie strictly inside (0, 1)")
        alphas = 1.0 - b
        alpha_bars = np.cumprod(alphas)
        if np.any(np.diff(alpha_bars) >= 0):
            raise ConfigurationError("alpha_bar must be strictly decreasing")
        if alpha_bars[-1] <= 0:
            raise ConfigurationError("alpha_bar underflowed to zero")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)
        object.__setattr__(self, "sigmas", np.sqrt(b))

    @classmethod
    def linear(cls, timesteps: int, beta_start: float = 1e-4, beta_end: float = 2e-2) -> "NoiseSchedule":
        if timesteps < 1:
            raise ConfigurationError("timesteps must be >= 1")
        if not (0 < beta_start <= beta_end < 1):
            raise ConfigurationError("need 0 < beta_start <= beta_end < 1")
        return cls(betas=np.linspace(beta_start, beta_end, timesteps), kind="linear")

    @property
    def timesteps(self) -> int:
        return int(self.betas.shape[0])

    def beta(self, t: int) -> float:
        self._check_t(t)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self._check_t(t)
        return float(self.alphas[t - 1])

    def alpha_bar(self, t: int) -> float:
        if t == 0:
            return 1.0
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def sigma(self, t: int) -> float:
        self._check_t(t)
        return float(self.sigmas[t - 1])

    def _check_t(self, t: int) -> None:
        if not (1 <= t <= self.timesteps):
            raise ConfigurationError(f"t must be in 1..{self.timesteps}, got {t}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "betas": self.betas.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        try:
            return cls(betas=np.asarray(d["betas"], dtype=np.float64), kind=d.get("kind", "linear"))
        except KeyError as exc:
            raise ConfigurationError(f"malformed schedule record: {exc}") from exc


def ddim_timesteps(total: int, num_steps: int) -> list[int]:
    """Evenly spaced descending sub-grid of 1..total, always starting at
    ``total``; ``num_steps == total`` reproduces the full grid."""
    if not (1 <= num_steps <= total):
        raise ConfigurationError(f"num_steps must be in 1..{total}, got {num_steps}")
    taus = []
    for i in range(num_steps):
        # half-up rounding keeps the grid strictly decreasing for step >= 1
        tau = int(np.floor(total - i * (total / num_steps) + 0.5))
        taus.append(min(max(tau, 1), total))
    if len(set(taus)) != len(taus):  # pragma: no cover - guarded by construction
        raise ConfigurationError("ddim grid collapsed; fewer steps than requested")
    return taus
