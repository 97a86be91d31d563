"""Distribution and retrieval metrics over the evaluator's embedding space."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..errors import ConfigurationError, NumericError

_SQRTM_EPS = 1e-10


def frechet_distance(
    mu1: np.ndarray, cov1: np.ndarray, mu2: np.ndarray, cov2: np.ndarray
) -> float:
    """||mu1 - mu2||^2 + Tr(cov1 + cov2 - 2 (cov1 cov2)^{1/2})."""
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    cov1 = np.atleast_2d(np.asarray(cov1, dtype=np.float64))
    cov2 = np.atleast_2d(np.asarray(cov2, dtype=np.float64))
    if not (np.isfinite(cov1).all() and np.isfinite(cov2).all()):
        raise NumericError("non-finite covariance")
    diff = mu1 - mu2
    product = cov1 @ cov2
    sqrt_prod, _ = scipy.linalg.sqrtm(product, disp=False)
    if not np.isfinite(sqrt_prod).all():
        # regularize once: the product of near-singular covariances can fail
        offset = np.eye(cov1.shape[0]) * _SQRTM_EPS
        sqrt_prod, _ = scipy.linalg.sqrtm((cov1 + offset) @ (cov2 + offset), disp=False)
        if not np.isfinite(sqrt_prod).all():
            raise NumericError("matrix square root failed to converge")
    if np.iscomplexobj(sqrt_prod):
        sqrt_prod = sqrt_prod.real
    value = float(diff @ diff + np.trace(cov1) + np.trace(cov2) - 2.0 * np.trace(sqrt_prod))
    # tiny negatives are sqrtm round-off on (near-)identical sets
    return max(value, 0.0)


def fid(real_features: np.ndarray, generated_features: np.ndarray) -> float:
    real = np.asarray(real_features, dtype=np.float64)
    gen = np.asarray(generated_features, dtype=np.float64)
    if real.ndim != 2 or gen.ndim != 2 or real.shape[1] != gen.shape[1]:
        raise ConfigurationError("feature sets must be [N, D] with matching D")
    if real.shape[0] < 2 or gen.shape[0] < 2:
        raise ConfigurationError("need at least 2 samples per set")
    return frechet_distance(
        real.mean(axis=0), np.cov(real, rowvar=False),
        gen.mean(axis=0), np.cov(gen, rowvar=False),
    )


def r_precision(
    motion_features: np.ndarray,
    text_features: np.ndarray,
    pool_size: int = 32,
    top_k: tuple[int, ...] = (1, 2, 3),
    rng: np.random.Generator | None = None,
) -> dict[int, float]:
    """For each text query, rank its true motion within a pool of
    ``pool_size`` candidates by cosine similarity; returns top-k hit rates."""
    motion = np.asarray(motion_features, dtype=np.float64)
    text = np.asarray(text_features, dtype=np.float64)
    n = motion.shape[0]
    if text.shape != motion.shape:
        raise ConfigurationError("motion and text feature sets must align")
    if pool_size < 2 or pool_size > n:
        raise ConfigurationError(f"pool_size must be in 2..{n}, got {pool_size}")
    if max(top_k) >= pool_size:
        raise ConfigurationError("top_k must be smaller than the pool")
    rng = rng or np.random.default_rng()
    motion = motion / np.linalg.norm(motion, axis=1, keepdims=True)
    text = text / np.linalg.norm(text, axis=1, keepdims=True)
    hits = {k: 0 for k in top_k}
    for i in range(n):
        others = np.delete(np.arange(n), i)
        cand = np.concatenate([[i], rng.choice(others, size=pool_size - 1, replace=False)])
        sims = motion[cand] @ text[i]
        # rank of the true motion (index 0 in cand)
        rank = int((sims > sims[0]).sum())
        for k in top_k:
            hits[k] += int(rank < k)
    return {k: hits[k] / n for k in top_k}


def diversity(
    features: np.ndarray, num_pairs: int, rng: np.random.Generator | None = None
) -> float:
    """Mean Euclidean distance over ``num_pairs`` disjoint random pairs."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise ConfigurationError("features must be [N, D]")
    if 2 * num_pairs > feats.shape[0]:
        raise ConfigurationError(
            f"need at least {2 * num_pairs} samples for {num_pairs} disjoint pairs"
        )
    rng = rng or np.random.default_rng()
    order = rng.permutation(feats.shape[0])
    first = feats[order[:num_pairs]]
    second = feats[order[num_pairs : 2 * num_pairs]]
    return float(np.linalg.norm(first - second, axis=1).mean())


def multimodality(
    features_per_prompt: np.ndarray, rng: np.random.Generator | None = None
) -> float:
    """[C, R, D] per-prompt generation sets -> mean within-prompt pair
    distance over disjoint random pairs (R // 2 per prompt)."""
    feats = np.asarray(features_per_prompt, dtype=np.float64)
    if feats.ndim != 3:
        raise ConfigurationError("expected [prompts, repeats, D]")
    c, r, _ = feats.shape
    if r < 2:
        raise ConfigurationError("need at least 2 generations per prompt")
    rng = rng or np.random.default_rng()
    pairs = r // 2
    dists = []
    for i in range(c):
        order = rng.permutation(r)
        a = feats[i, order[:pairs]]
        b = feats[i, order[pairs : 2 * pairs]]
        dists.append(np.linalg.norm(a - b, axis=1).mean())
    return float(np.mean(dists))


def mm_dist(text_features: np.ndarray, motion_features: np.ndarray) -> float:
    """Mean Euclidean distance between matched text/motion embeddings."""
    text = np.asarray(text_features, dtype=np.float64)
    motion = np.asarray(motion_features, dtype=np.float64)
    if text.shape != motion.shape:
        raise ConfigurationError("matched pairs required")
    return float(np.linalg.norm(text - motion, axis=1).mean())
