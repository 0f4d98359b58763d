"""
Clustering-quality indices of a labelled embedding. Smaller is better for all three.
"""

import logging
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

from core.errors import NumericalError, SpecValidationError

logger = logging.getLogger(__name__)

SINGULAR_TOLERANCE = 1e-12


def _groups(Y: np.ndarray, labels: np.ndarray, minimum: int = 2) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    labels = np.asarray(labels)
    if labels.shape[0] != Y.shape[0]:
        raise SpecValidationError("labels must have one entry per row", "labels")
    classes, inverse = np.unique(labels, return_inverse=True)
    if classes.size < minimum:
        raise SpecValidationError(f"at least {minimum} non-empty classes are required", "labels")
    centroids = np.array([Y[inverse == c].mean(axis=0) for c in range(classes.size)])
    return Y, inverse, centroids


def db_index(Y: np.ndarray, labels: np.ndarray) -> float:
    """
    Davies-Bouldin index with Euclidean distances (q = p = 2).

    S_i is the root mean squared distance of class i to its centroid,
    R_ij = (S_i + S_j) / |c_i - c_j| and DB is the mean over i of max_j R_ij.
    """
    Y, inverse, centroids = _groups(Y, labels)
    k = centroids.shape[0]
    scatter = np.array([
        np.sqrt(np.mean(np.sum((Y[inverse == c] - centroids[c]) ** 2, axis=1))) for c in range(k)
    ])
    separation = cdist(centroids, centroids)
    np.fill_diagonal(separation, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = (scatter[:, None] + scatter[None, :]) / separation
    # Coincident centroids with zero scatter: no evidence of overlap
    ratios[np.isnan(ratios)] = 0.0
    if np.isinf(ratios).any():
        logger.warning("Coincident class centroids make the DB index infinite")
    return float(np.mean(ratios.max(axis=1)))


def wcdr(Y: np.ndarray, labels: np.ndarray) -> float:
    """Within-cluster distance ratio WSS / TSS."""
    Y, inverse, centroids = _groups(Y, labels, minimum=1)
    total = float(np.sum((Y - Y.mean(axis=0)) ** 2))
    if total <= 0:
        raise NumericalError("total scatter is zero; WCDR is undefined")
    within = float(np.sum((Y - centroids[inverse]) ** 2))
    return within / total


def scatter_matrices(Y: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Within-class scatter W and total scatter T = W + B."""
    Y, inverse, centroids = _groups(Y, labels)
    within = Y - centroids[inverse]
    total = Y - Y.mean(axis=0)
    return within.T @ within, total.T @ total


def wilks_lambda(Y: np.ndarray, labels: np.ndarray) -> float:
    """
    Wilks' Λ = det(W) / det(W + B).

    Zero within-class scatter gives Λ = 0.

    Raises:
        NumericalError: If the total scatter is singular
    """
    W, T = scatter_matrices(Y, labels)
    if np.trace(W) <= 0:
        return 0.0
    d = T.shape[0]
    sign_t, logdet_t = np.linalg.slogdet(T)
    if sign_t <= 0 or logdet_t <= np.log(SINGULAR_TOLERANCE) + d * np.log(np.trace(T) / d):
        raise NumericalError("total scatter matrix is singular; Wilks' lambda is undefined")
    sign_w, logdet_w = np.linalg.slogdet(W)
    if sign_w <= 0:
        return 0.0
    return float(np.clip(np.exp(logdet_w - logdet_t), 0.0, 1.0))
