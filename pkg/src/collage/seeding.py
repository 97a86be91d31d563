"""Deterministic seed derivation.

A single run seed fans out into named child seeds (one per stage / purpose) so
stages can be re-run independently without replaying the global RNG stream.
Derivation is keyed hashing, stable across processes and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch

_MASK63 = (1 << 63) - 1


def derive_seed(seed: int, name: str) -> int:
    """Stable 63-bit child seed for (seed, name)."""
    digest = hashlib.blake2b(
        name.encode("utf-8"), key=int(seed).to_bytes(8, "little", signed=True), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") & _MASK63


def numpy_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, name))


def torch_generator(seed: int, name: str) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(derive_seed(seed, name))
    return gen


def seed_torch_global(seed: int, name: str) -> None:
    """Seed torch's global RNG (module parameter init draws from it)."""
    torch.manual_seed(derive_seed(seed, name))
