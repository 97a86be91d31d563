"""Mutual information gap over discrete code assignments.

Representation variables are the per-sample modal code indices of each
(level, kind) codebook; factors are discretized ground-truth generative
factors. All information quantities use exact joint histograms in nats.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..vqvae import LevelLatents

logger = logging.getLogger(__name__)

_DEGENERATE_ENTROPY = 1e-12


def modal_code_matrix(latents: list[LevelLatents]) -> np.ndarray:
    """Per-sample modal code index for every (level, kind) codebook.

    Returns int64 [N, 2L], columns ordered level-major with the agent
    codebook before the object codebook; ties resolve to the lowest index.
    """
    if not latents:
        raise ConfigurationError("no latents given")
    cols = []
    for lat in latents:
        for idx in (lat.humans_idx, lat.objects_idx):
            flat = idx.reshape(idx.shape[0], -1).numpy()
            modal = []
            for row in flat:
                counts = np.bincount(row)
                modal.append(int(np.argmax(counts)))
            cols.append(np.asarray(modal, dtype=np.int64))
    return np.stack(cols, axis=1)


def modal_code_labels(levels: int) -> list[str]:
    return [f"level{l}_{kind}" for l in range(1, levels + 1) for kind in ("agent", "object")]


def discretize_factor(values: np.ndarray, max_bins: int = 5) -> np.ndarray:
    """Map factor values to small integer codes; few distinct values become
    categories, continuous values fall into quantile bins."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ConfigurationError("factor values must be a vector")
    uniques = np.unique(v)
    if uniques.shape[0] <= max_bins:
        return np.searchsorted(uniques, v).astype(np.int64)
    edges = np.unique(np.quantile(v, np.linspace(0, 1, max_bins + 1)[1:-1]))
    return np.digitize(v, edges).astype(np.int64)


def entropy(codes: np.ndarray) -> float:
    counts = np.bincount(np.asarray(codes, dtype=np.int64))
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Exact plug-in MI between two discrete code vectors (nats)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigurationError("code vectors must be aligned 1-d arrays")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.float64)
    np.add.at(joint, (ai, bi), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    return float((joint[mask] * np.log(joint[mask] / (pa @ pb)[mask])).sum())


@dataclass
class MigResult:
    score: float
    per_factor: dict[str, float] = field(default_factory=dict)
    excluded: list[str] = field(default_factory=list)


def mig_score(
    codes: np.ndarray, factors: dict[str, np.ndarray], max_bins: int = 5
) -> MigResult:
    """Mean over factors of (I_top - I_second) / H(factor).

    ``codes``: int [N, C] representation variables; ``factors``: name ->
    per-sample values. Zero-entropy factors are excluded with a warning.
    """
    codes = np.asarray(codes, dtype=np.int64)
    if codes.ndim != 2 or codes.shape[1] < 2:
        raise ConfigurationError("need at least two code variables")
    if len(factors) < 1:
        raise ConfigurationError("need at least one factor")
    per_factor: dict[str, float] = {}
    excluded: list[str] = []
    for name, values in factors.items():
        v = np.asarray(values, dtype=np.float64)
        if v.shape[0] != codes.shape[0]:
            raise ConfigurationError(f"factor {name!r} is misaligned with codes")
        f = discretize_factor(v, max_bins=max_bins)
        h = entropy(f)
        if h <= _DEGENERATE_ENTROPY:
            logger.warning("factor %r has zero entropy; excluded from MIG", name)
            excluded.append(name)
            continue
        mis = sorted((mutual_information(codes[:, c], f) for c in range(codes.shape[1])), reverse=True)
        per_factor[name] = min((mis[0] - mis[1]) / h, 1.0)
    if not per_factor:
        raise ConfigurationError("every factor was degenerate; MIG undefined")
    return MigResult(
        score=float(np.mean(list(per_factor.values()))),
        per_factor=per_factor,
        excluded=excluded,
    )
