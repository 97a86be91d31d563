"""Keyed hashed character n-gram text embedder.

Stable across processes and platforms (blake2b with an explicit key), cheap,
and dependency-free. Strings over disjoint alphabets map to disjoint bucket
sets (barring hash collisions) and hence orthogonal vectors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .templates import CueHierarchy, normalize_text


class HashingTextEmbedder:
    """L2-normalized signed bucket counts of character n-grams."""

    def __init__(self, dim: int = 512, seed: int = 0, ngram_sizes: tuple[int, ...] = (2, 3)):
        if dim < 8:
            raise ConfigurationError("embedder dim must be >= 8")
        if not ngram_sizes or any(n < 1 for n in ngram_sizes):
            raise ConfigurationError("ngram sizes must be positive")
        self.dim = int(dim)
        self.seed = int(seed)
        self.ngram_sizes = tuple(int(n) for n in ngram_sizes)
        self._key = self.seed.to_bytes(8, "little", signed=True)

    @property
    def embedder_id(self) -> str:
        sizes = ".".join(str(n) for n in self.ngram_sizes)
        return f"hashgram-v1-d{self.dim}-n{sizes}-s{self.seed}"

    def _hash(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), key=self._key, digest_size=8).digest()
        val = int.from_bytes(digest, "little")
        return val % self.dim, (1.0 if val >> 63 else -1.0)

    def ngram_buckets(self, text: str) -> list[tuple[int, float]]:
        """(bucket, sign) pairs the text hashes to; exposed for diagnostics."""
        norm = normalize_text(text)
        if not norm:
            raise ConfigurationError("cannot embed empty text")
        pairs = []
        for n in self.ngram_sizes:
            if len(norm) < n:
                pairs.append(self._hash(f"{n}:{norm}"))
                continue
            for i in range(len(norm) - n + 1):
                pairs.append(self._hash(f"{n}:{norm[i : i + n]}"))
        return pairs

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        pairs = self.ngram_buckets(text)
        for bucket, sign in pairs:
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            # signs cancelled; fall back to a one-hot of the whole text
            bucket, _ = self._hash(f"full:{normalize_text(text)}")
            vec[:] = 0.0
            vec[bucket] = 1.0
            norm = 1.0
        return (vec / norm).astype(np.float32)


@dataclass(frozen=True)
class CueEmbedding:
    """Per-level cue vectors: float32 [L, 2, D]; row 0 agents, row 1 objects."""

    vectors: np.ndarray
    embedder_id: str

    def __post_init__(self) -> None:
        v = np.asarray(self.vectors, dtype=np.float32)
        object.__setattr__(self, "vectors", v)
        if v.ndim != 3 or v.shape[1] != 2:
            raise ConfigurationError(f"cue vectors must be [L, 2, D], got {v.shape}")
        if not np.isfinite(v).all():
            raise ConfigurationError("non-finite cue embedding")

    @property
    def num_levels(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[2])


def build_cue_embeddings(hierarchy: CueHierarchy, embedder: HashingTextEmbedder) -> CueEmbedding:
    rows = [
        np.stack([embedder.embed(lv.humans), embedder.embed(lv.objects)])
        for lv in hierarchy.levels
    ]
    return CueEmbedding(vectors=np.stack(rows), embedder_id=embedder.embedder_id)
