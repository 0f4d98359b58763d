"""
PCA preprocessing with a deterministic sign convention.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from sklearn.decomposition import PCA

from core.errors import SpecValidationError
from data.generators import InputMatrix

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10


@dataclass
class PcaProjection:
    """
    A fitted projection: centering vector plus orthonormal directions.

    ``components`` rows are directions ordered by descending variance, each
    with its largest-magnitude entry positive. ``padded`` is set when the
    requested width exceeded the numerical rank; the trailing ``padded_count``
    projected columns are then zero.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    padded: bool = False
    padded_count: int = 0

    @property
    def target_dim(self) -> int:
        return self.components.shape[0]

    def transform(self, values: np.ndarray) -> np.ndarray:
        """Project rows (or a single row) with the fitted centering and directions."""
        values = np.asarray(values, dtype=np.float64)
        single = values.ndim == 1
        projected = (np.atleast_2d(values) - self.mean) @ self.components.T
        if self.padded_count:
            projected[:, self.target_dim - self.padded_count:] = 0.0
        return projected[0] if single else projected


def _fix_signs(components: np.ndarray) -> np.ndarray:
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(components.shape[0]), pivots])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def fit_pca(values: np.ndarray, target_dim: int) -> PcaProjection:
    """
    Fit a PCA projection on raw rows.

    Args:
        values: n×d matrix
        target_dim: Number of directions to keep (≤ min(n, d))

    Returns:
        Fitted PcaProjection

    Raises:
        SpecValidationError: If target_dim is outside [1, min(n, d)]
    """
    values = np.asarray(values, dtype=np.float64)
    n, d = values.shape
    if target_dim < 1 or target_dim > min(n, d):
        raise SpecValidationError(f"target_dim {target_dim} must lie in [1, {min(n, d)}]", "target_dim")

    pca = PCA(n_components=target_dim, svd_solver="full")
    pca.fit(values)
    components = _fix_signs(pca.components_.astype(np.float64))
    explained = pca.explained_variance_.astype(np.float64)

    leading = explained[0] if explained.size and explained[0] > 0 else 1.0
    rank = int(np.sum(explained > RANK_TOLERANCE * leading)) if explained[0] > 0 else 0
    padded_count = target_dim - rank
    if padded_count > 0:
        logger.warning("PCA target width %d exceeds numerical rank %d; zero-padding %d columns",
                       target_dim, rank, padded_count)
        explained = explained.copy()
        explained[rank:] = 0.0

    return PcaProjection(
        mean=pca.mean_.astype(np.float64),
        components=components,
        explained_variance=explained,
        padded=padded_count > 0,
        padded_count=padded_count,
    )


def pca_project(matrix: InputMatrix, target_dim: int) -> Tuple[InputMatrix, PcaProjection]:
    """
    Center and project onto the top principal directions.

    Args:
        matrix: Input rows
        target_dim: Output width

    Returns:
        (projected InputMatrix with the same labels, fitted PcaProjection)
    """
    projection = fit_pca(matrix.values, target_dim)
    return matrix.with_values(projection.transform(matrix.values)), projection


def principal_directions(values: np.ndarray, count: int) -> np.ndarray:
    """Top ``count`` principal directions (rows), clamped to the available width."""
    values = np.asarray(values, dtype=np.float64)
    count = max(1, min(count, min(values.shape)))
    return fit_pca(values, count).components
