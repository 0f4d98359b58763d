"""
Rank statistics: Spearman's test (per cluster against distance to the
centroid) and a rank-based AUROC.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.stats import rankdata, spearmanr

from core.errors import SpecValidationError

logger = logging.getLogger(__name__)

MIN_SPEARMAN_LENGTH = 5
SMALL_SAMPLE = 10
ALPHA = 0.05


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_value: float
    n: int

    @property
    def small_sample(self) -> bool:
        """The t-approximation p-value is rough below 10 pairs."""
        return self.n < SMALL_SAMPLE


def spearman_test(a: np.ndarray, b: np.ndarray) -> SpearmanResult:
    """
    Spearman's rank correlation with average ranks for ties and a
    t-approximation p-value.

    Raises:
        ValueError: On unequal lengths, fewer than 5 pairs or a constant vector
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError("inputs must have equal lengths")
    if a.size < MIN_SPEARMAN_LENGTH:
        raise ValueError(f"at least {MIN_SPEARMAN_LENGTH} pairs are required")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("rank correlation is undefined for a constant vector")
    rho, p_value = spearmanr(a, b)
    return SpearmanResult(float(rho), float(p_value), int(a.size))


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Area under the ROC curve from the Mann-Whitney rank sum (ties get average ranks).

    Args:
        scores: Higher means more likely positive
        labels: Binary labels; nonzero/True is positive

    Raises:
        ValueError: If either class is empty
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    positive = np.asarray(labels).ravel().astype(bool)
    if scores.size != positive.size:
        raise ValueError("scores and labels must have equal lengths")
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass(frozen=True)
class ClusterTest:
    label: object
    result: SpearmanResult


def cluster_center_spearman(Y: np.ndarray, labels: np.ndarray, scores: np.ndarray) -> List[ClusterTest]:
    """
    Per cluster, test finite scores against the distance to the cluster centroid.

    Clusters with fewer than 5 finite scores or constant scores are skipped
    with a warning.
    """
    Y = np.asarray(Y, dtype=np.float64)
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if not (Y.shape[0] == labels.shape[0] == scores.shape[0]):
        raise SpecValidationError("Y, labels and scores must have the same length", "scores")

    tests = []
    for label in np.unique(labels):
        members = labels == label
        centroid = Y[members].mean(axis=0)
        keep = members & np.isfinite(scores)
        distances = np.linalg.norm(Y[keep] - centroid, axis=1)
        try:
            tests.append(ClusterTest(label, spearman_test(scores[keep], distances)))
        except ValueError as exc:
            logger.warning("Cluster %s skipped: %s", label, exc)
    return tests


def majority_significant(tests: List[ClusterTest], alpha: float = ALPHA) -> bool:
    """True when more than half of the cluster tests have p < alpha."""
    if not tests:
        return False
    significant = sum(1 for test in tests if test.result.p_value < alpha)
    return significant * 2 > len(tests)
