"""
Density-based pre-screening of embedding points.

High perturbation scores concentrate at cluster peripheries, so only points
that DBSCAN does not classify as core points (border and noise points) are
scored. The DBSCAN radius defaults to the knee of the sorted k-distance curve.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.cluster import DBSCAN
from sklearn.neighbors import NearestNeighbors

logger = logging.getLogger(__name__)

DEFAULT_MIN_SAMPLES = 10


@dataclass
class ScreeningResult:
    periphery: np.ndarray
    eps: float
    labels: np.ndarray

    @property
    def masked_fraction(self) -> float:
        return float(1.0 - self.periphery.mean())


def k_distances(points: np.ndarray, k: int) -> np.ndarray:
    """Ascending distances to the k-th nearest neighbor (the point itself counts as the first)."""
    k = min(k, points.shape[0])
    distances, _ = NearestNeighbors(n_neighbors=k).fit(points).kneighbors(points)
    return np.sort(distances[:, -1])


def knee_radius(points: np.ndarray, min_samples: int = DEFAULT_MIN_SAMPLES) -> float:
    """
    Knee of the sorted k-distance curve.

    The knee is the curve point farthest from the chord joining its ends.
    """
    curve = k_distances(points, min_samples)
    if curve[-1] == curve[0]:
        return float(curve[-1]) if curve[-1] > 0 else 1.0
    x = np.linspace(0.0, 1.0, curve.size)
    y = (curve - curve[0]) / (curve[-1] - curve[0])
    # Distance to the diagonal y = x, up to a constant factor.
    knee = int(np.argmax(x - y))
    eps = float(curve[knee])
    return eps if eps > 0 else float(curve[curve > 0][0])


def periphery_points(Y: np.ndarray, min_samples: int = DEFAULT_MIN_SAMPLES,
                     eps: Optional[float] = None) -> ScreeningResult:
    """
    Classify embedding points as core (masked) or periphery (scored).

    Args:
        Y: n×2 embedding
        min_samples: DBSCAN minimum neighborhood size, the point included
        eps: DBSCAN radius; defaults to knee_radius(Y, min_samples)

    Returns:
        ScreeningResult with ``periphery`` True for border and noise points
    """
    Y = np.asarray(Y, dtype=np.float64)
    eps = knee_radius(Y, min_samples) if eps is None else eps
    clustering = DBSCAN(eps=eps, min_samples=min_samples).fit(Y)
    core = np.zeros(Y.shape[0], dtype=bool)
    core[clustering.core_sample_indices_] = True
    result = ScreeningResult(~core, eps, clustering.labels_)
    logger.info("Pre-screen: eps %.4g, %d of %d points on cluster peripheries",
                eps, int(result.periphery.sum()), Y.shape[0])
    return result
