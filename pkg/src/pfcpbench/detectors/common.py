"""Shared numerics for the detector catalog."""

from __future__ import annotations

import numpy as np

# Probability / histogram floor: avoids -log 0 without materially
# shifting score rankings.
EPS = 1e-6
# Variance floor for angle-based scores.
ABOF_EPS = 1e-12
# Denominator floor for local-density ratios.
DENSITY_EPS = 1e-12

CHUNK_ROWS = 1024


def sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, |A| x |B|, clipped at zero."""
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(sq, 0.0)


def iter_chunks(n: int, chunk: int = CHUNK_ROWS):
    for start in range(0, n, chunk):
        yield start, min(start + chunk, n)


def kth_smallest(dists: np.ndarray, k: int) -> np.ndarray:
    """Per-row k-th smallest value (1-based k)."""
    return np.partition(dists, k - 1, axis=1)[:, k - 1]


def histogram_heights(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    """Static-width bin counts using the same floor rule as scoring.

    The top edge belongs to the last bin so the training maximum stays
    in range.
    """
    if hi <= lo:
        return np.array([float(len(values))])
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(int)
    idx = np.clip(idx, 0, bins - 1)
    return np.bincount(idx, minlength=bins).astype(float)


def histogram_lookup(
    queries: np.ndarray, lo: float, hi: float, heights: np.ndarray
) -> np.ndarray:
    """Per-query bin height; zero outside the training range."""
    bins = len(heights)
    if hi <= lo:
        return np.where(queries == lo, heights[0], 0.0)
    idx = np.floor((queries - lo) / (hi - lo) * bins).astype(int)
    inside = (queries >= lo) & (queries <= hi)
    idx = np.clip(idx, 0, bins - 1)
    out = heights[idx]
    return np.where(inside, out, 0.0)


def logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def sample_skew_sign(X: np.ndarray) -> np.ndarray:
    """Sign of the per-column sample skewness (0 for symmetric/degenerate)."""
    mu = X.mean(axis=0)
    centered = X - mu
    sd = centered.std(axis=0)
    third = (centered**3).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(sd > 0, third / np.where(sd > 0, sd, 1.0) ** 3, 0.0)
    return np.sign(skew)
