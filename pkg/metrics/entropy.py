"""
Class-membership entropy from Gaussian class models fitted with ground-truth
labels, in input space and in embedding space.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from core.errors import SingularCovarianceError, SpecValidationError

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-9
REGULARIZATION = 1e-6
SINGULAR_TOLERANCE = 1e-12


def entropy(p: np.ndarray) -> float:
    """
    Shannon entropy (natural log) of a probability vector, with 0·log 0 = 0.

    Raises:
        ValueError: If p is not on the probability simplex
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise ValueError("p must be a nonnegative vector summing to 1")
    positive = p[p > 0]
    return float(-np.sum(positive * np.log(positive)))


def _row_entropies(probabilities: np.ndarray) -> np.ndarray:
    safe = np.where(probabilities > 0, probabilities, 1.0)
    return -np.sum(probabilities * np.log(safe), axis=1)


@dataclass
class FittedGmm:
    """Per-class Gaussians with a uniform prior."""

    classes: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    regularized: np.ndarray

    @property
    def k(self) -> int:
        return self.classes.size

    def posterior(self, points: np.ndarray) -> np.ndarray:
        """n×k class posteriors p(A_j | x)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        log_density = np.column_stack([
            multivariate_normal(mean, cov, allow_singular=False).logpdf(points).reshape(-1)
            for mean, cov in zip(self.means, self.covariances)
        ])
        return np.exp(log_density - logsumexp(log_density, axis=1, keepdims=True))


def fit_class_gaussians(points: np.ndarray, labels: np.ndarray) -> FittedGmm:
    """
    Fit one Gaussian per label.

    Classes with at most d members or a singular covariance get δI added,
    δ = 1e-6·trace/d, and are flagged in ``regularized``.

    Raises:
        SpecValidationError: With fewer than 2 classes
        SingularCovarianceError: If a class covariance is still singular
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] == 1:
        points = points.T
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise SpecValidationError("at least two classes are required", "labels")
    d = points.shape[1]

    means, covariances, regularized = [], [], []
    for label in classes:
        members = points[labels == label]
        mean = members.mean(axis=0)
        centered = members - mean
        cov = centered.T @ centered / max(members.shape[0] - 1, 1)
        trace = float(np.trace(cov))
        flagged = False
        if members.shape[0] <= d or np.linalg.eigvalsh(cov)[0] <= SINGULAR_TOLERANCE * max(trace, 1e-300):
            cov = cov + REGULARIZATION * trace / d * np.eye(d)
            flagged = True
            logger.warning("Class %s covariance regularized (%d members, dimension %d)", label, members.shape[0], d)
        if trace <= 0 or np.linalg.eigvalsh(cov)[0] <= 0:
            raise SingularCovarianceError("covariance is singular after regularization", label)
        means.append(mean)
        covariances.append(cov)
        regularized.append(flagged)

    return FittedGmm(classes, np.array(means), np.array(covariances), np.array(regularized))


@dataclass
class EntropyDifference:
    """Per-point E(p) - E(q); positive means less ambiguity after embedding."""

    values: np.ndarray
    input_entropy: np.ndarray
    embedding_entropy: np.ndarray
    regularized_classes: List


def entropy_difference(X: np.ndarray, Y: np.ndarray, labels: np.ndarray) -> EntropyDifference:
    """
    Label-based reduction of class-membership uncertainty.

    Args:
        X: n×d input
        Y: n×p embedding
        labels: Ground-truth classes

    Returns:
        EntropyDifference
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    labels = np.asarray(labels)
    if X.shape[0] != Y.shape[0] or labels.shape[0] != X.shape[0]:
        raise SpecValidationError("X, Y and labels must have the same number of rows", "labels")

    input_model = fit_class_gaussians(X, labels)
    embedding_model = fit_class_gaussians(Y, labels)
    input_entropy = _row_entropies(input_model.posterior(X))
    embedding_entropy = _row_entropies(embedding_model.posterior(Y))
    flagged = sorted(set(input_model.classes[input_model.regularized].tolist())
                     | set(embedding_model.classes[embedding_model.regularized].tolist()))
    return EntropyDifference(input_entropy - embedding_entropy, input_entropy, embedding_entropy, flagged)
