"""
Neighborhood preservation: per point, the Pearson correlation between the
distances to its k nearest input-space neighbors and the embedding distances
to the same neighbors.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.neighbors import NearestNeighbors

from core.errors import SpecValidationError

logger = logging.getLogger(__name__)


@dataclass
class NeighborhoodPreservation:
    scores: np.ndarray
    k: int
    zero_variance: np.ndarray

    @property
    def median(self) -> float:
        return float(np.median(self.scores))


def default_k(n: int) -> int:
    return max(2, n // 5)


def _rowwise_pearson(a: np.ndarray, b: np.ndarray):
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.sum(a * a, axis=1) * np.sum(b * b, axis=1))
    degenerate = norm <= 1e-300
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.sum(a * b, axis=1) / norm
    r[degenerate] = 0.0
    return np.clip(r, -1.0, 1.0), degenerate


def neighborhood_preservation(X: np.ndarray, Y: np.ndarray, k: Optional[int] = None) -> NeighborhoodPreservation:
    """
    Args:
        X: n×d input
        Y: n×p embedding
        k: Neighborhood size, default ⌊n/5⌋

    Returns:
        NeighborhoodPreservation with per-point scores and their median

    Raises:
        SpecValidationError: Unless 2 <= k < n
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise SpecValidationError("X and Y must have the same number of rows", "Y")
    k = default_k(n) if k is None else int(k)
    if not 2 <= k < n:
        raise SpecValidationError(f"k must satisfy 2 <= k < n (k={k}, n={n})", "k")

    # kneighbors() without a query excludes each point from its own list
    input_distances, neighbors = NearestNeighbors(n_neighbors=k).fit(X).kneighbors()
    embedding_distances = np.linalg.norm(Y[neighbors] - Y[:, None, :], axis=2)
    scores, degenerate = _rowwise_pearson(input_distances, embedding_distances)
    if degenerate.any():
        logger.warning("%d points have zero-variance neighbor distances; their score is set to 0",
                       int(degenerate.sum()))
    return NeighborhoodPreservation(scores, k, degenerate)
