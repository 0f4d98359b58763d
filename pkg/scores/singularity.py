"""
Singularity scores: the inverse smallest eigenvalue of the 2×2 Hessian of the
total loss with respect to one embedding point.

Hessians are available for t-SNE and, given externally produced embeddings
and similarities, for UMAP and LargeVis. For a pairwise term φ(s) with
s = |y_i - y_j|², the contribution to the Hessian in y_i is
2 φ'(s) I + 4 φ''(s) (y_i - y_j)(y_i - y_j)^T.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from core.affinity import SimilarityMatrix
from core.errors import SpecValidationError
from core.tsne import kernel_matrix
from scores.report import ScoreReport

logger = logging.getLogger(__name__)

METHODS = ("tsne", "umap", "largevis")
ROW_CHUNK = 256


@dataclass(frozen=True)
class Hessian2:
    """Symmetric 2×2 Hessian [[a, b], [b, c]]."""

    a: float
    b: float
    c: float

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Hessian2":
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(float(matrix[0, 0]), float(0.5 * (matrix[0, 1] + matrix[1, 0])), float(matrix[1, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]])

    @property
    def eigenvalues(self) -> Tuple[float, float]:
        """(λ_min, λ_max) from the closed form (a + c)/2 ∓ sqrt(((a - c)/2)² + b²)."""
        mean = 0.5 * (self.a + self.c)
        radius = float(np.hypot(0.5 * (self.a - self.c), self.b))
        return mean - radius, mean + radius

    @property
    def lambda_min(self) -> float:
        return self.eigenvalues[0]

    @property
    def lambda_max(self) -> float:
        return self.eigenvalues[1]


def _eigenvalues_min(hessians: np.ndarray) -> np.ndarray:
    a, b, c = hessians[:, 0, 0], 0.5 * (hessians[:, 0, 1] + hessians[:, 1, 0]), hessians[:, 1, 1]
    return 0.5 * (a + c) - np.hypot(0.5 * (a - c), b)


def _similarity_values(V: Union[SimilarityMatrix, np.ndarray], n: int) -> np.ndarray:
    values = V.values if isinstance(V, SimilarityMatrix) else np.asarray(V, dtype=np.float64)
    if values.shape != (n, n):
        raise SpecValidationError(f"similarity shape {values.shape} does not match n={n}", "V")
    return values


def _embedding(Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != 2:
        raise SpecValidationError(f"expected an n×2 embedding, got {Y.shape}", "Y")
    if not np.all(np.isfinite(Y)):
        raise ValueError("Y contains NaN or infinite entries")
    return Y


def _rows(n: int, rows: Optional[np.ndarray]) -> np.ndarray:
    rows = np.arange(n) if rows is None else np.atleast_1d(np.asarray(rows, dtype=np.int64))
    if np.any(rows < 0) or np.any(rows >= n):
        raise IndexError(f"point index out of range for n={n}")
    return rows


def _pair_hessians(diff: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Σ_j 2 φ'_j I + 4 φ''_j d_j d_j^T over the second axis."""
    H = 4.0 * np.einsum("rj,rjk,rjl->rkl", second, diff, diff)
    isotropic = 2.0 * first.sum(axis=1)
    H[:, 0, 0] += isotropic
    H[:, 1, 1] += isotropic
    return H


def tsne_hessians(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray],
                  rows: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Hessians of the t-SNE total loss with respect to each y_i.

    H_i = Σ_j [(4 v w - 4 w²/Z) I + (16 w³/Z - 8 v w²) d d^T] - 16 G G^T / Z²
    with d = y_i - y_j, w = w(y_i, y_j) and G = Σ_j w² d.

    Returns:
        len(rows)×2×2 array
    """
    Y = _embedding(Y)
    n = Y.shape[0]
    values = _similarity_values(V, n)
    rows = _rows(n, rows)
    W = kernel_matrix(Y)
    Z = W.sum()

    out = np.empty((rows.size, 2, 2))
    for start in range(0, rows.size, ROW_CHUNK):
        block = rows[start:start + ROW_CHUNK]
        diff = Y[block][:, None, :] - Y[None, :, :]
        w, v = W[block], values[block]
        w2 = w * w
        isotropic = np.sum(4.0 * v * w - 4.0 * w2 / Z, axis=1)
        H = np.einsum("rj,rjk,rjl->rkl", 16.0 * w2 * w / Z - 8.0 * v * w2, diff, diff)
        G = np.einsum("rj,rjk->rk", w2, diff)
        H -= 16.0 * G[:, :, None] * G[:, None, :] / Z ** 2
        H[:, 0, 0] += isotropic
        H[:, 1, 1] += isotropic
        out[start:start + block.size] = 0.5 * (H + np.swapaxes(H, 1, 2))
    return out


def singularity_hessian_tsne(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray], i: int) -> Hessian2:
    """Hessian of the t-SNE total loss with respect to y_i."""
    return Hessian2.from_matrix(tsne_hessians(Y, V, [i])[0])


def umap_loss(Y: np.ndarray, V: np.ndarray, a: float, b: float) -> float:
    """UMAP cross entropy Σ_{i<j} [-v log w - (1 - v) log(1 - w)] with w = (1 + a s^b)^-1."""
    Y = _embedding(Y)
    V = _similarity_values(V, Y.shape[0])
    s = pdist(Y, "sqeuclidean")
    v = squareform(V, checks=False)
    power = a * s ** b
    return float(np.sum(v * np.log1p(power)) - np.sum((1.0 - v) * (np.log(power) - np.log1p(power))))


def umap_hessians(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray], a: float, b: float,
                  rows: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Hessians of the UMAP cross entropy with respect to each y_i.

    Coincident pairs (s = 0) are left out of the sum.
    """
    if not a > 0 or not b > 0:
        raise SpecValidationError("UMAP parameters a and b must be positive", "a, b")
    Y = _embedding(Y)
    n = Y.shape[0]
    values = _similarity_values(V, n)
    rows = _rows(n, rows)
    S = squareform(pdist(Y, "sqeuclidean"))

    out = np.empty((rows.size, 2, 2))
    for start in range(0, rows.size, ROW_CHUNK):
        block = rows[start:start + ROW_CHUNK]
        diff = Y[block][:, None, :] - Y[None, :, :]
        s, v = S[block], values[block]
        present = s > 0
        s_safe = np.where(present, s, 1.0)
        w = 1.0 / (1.0 + a * s_safe ** b)
        first = v * a * b * s_safe ** (b - 1.0) * w - (1.0 - v) * b * w / s_safe
        second = (v * a * b * ((b - 1.0) * s_safe ** (b - 2.0) * w - a * b * s_safe ** (2.0 * b - 2.0) * w * w)
                  + (1.0 - v) * b * (a * b * s_safe ** (b - 2.0) * w * w + w / s_safe ** 2))
        first = np.where(present, first, 0.0)
        second = np.where(present, second, 0.0)
        out[start:start + block.size] = _pair_hessians(diff, first, second)
    return out


def singularity_hessian_umap(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray], i: int,
                             a: float, b: float) -> Hessian2:
    """Hessian of the UMAP loss with respect to y_i."""
    return Hessian2.from_matrix(umap_hessians(Y, V, a, b, [i])[0])


def edge_matrix(edges: Union[np.ndarray, list], n: int) -> np.ndarray:
    """Symmetric boolean adjacency from a boolean matrix or a k×2 list of index pairs."""
    edges = np.asarray(edges)
    if edges.shape == (n, n) and edges.dtype == bool:
        E = edges.copy()
    else:
        E = np.zeros((n, n), dtype=bool)
        if edges.size:
            pairs = edges.reshape(-1, 2).astype(np.int64)
            E[pairs[:, 0], pairs[:, 1]] = True
    E = E | E.T
    np.fill_diagonal(E, False)
    return E


def largevis_loss(Y: np.ndarray, V: np.ndarray, edges, gamma: float) -> float:
    """
    Negated LargeVis log-likelihood with w = 1 / (1 + s).

    Σ_{(i,j)∈E} -v_ij log w_ij - γ Σ_{(i,j)∉E} log(1 - w_ij), over unordered pairs.
    """
    Y = _embedding(Y)
    n = Y.shape[0]
    V = _similarity_values(V, n)
    E = squareform(edge_matrix(edges, n), checks=False)
    s = pdist(Y, "sqeuclidean")
    v = squareform(V, checks=False)
    attraction = np.sum(v[E] * np.log1p(s[E]))
    if gamma == 0:
        return float(attraction)
    s_repulsive = s[~E]
    return float(attraction - gamma * np.sum(np.log(s_repulsive) - np.log1p(s_repulsive)))


def largevis_hessians(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray], edges, gamma: float,
                      rows: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Hessians of the negated LargeVis log-likelihood with respect to each y_i.

    Raises:
        ValueError: If a repulsive (non-edge) pair of a requested row is coincident
    """
    if gamma < 0:
        raise SpecValidationError("gamma must be nonnegative", "gamma")
    Y = _embedding(Y)
    n = Y.shape[0]
    values = _similarity_values(V, n)
    rows = _rows(n, rows)
    E = edge_matrix(edges, n)
    S = squareform(pdist(Y, "sqeuclidean"))

    out = np.empty((rows.size, 2, 2))
    for start in range(0, rows.size, ROW_CHUNK):
        block = rows[start:start + ROW_CHUNK]
        diff = Y[block][:, None, :] - Y[None, :, :]
        s, v, edge = S[block], values[block], E[block]
        w = 1.0 / (1.0 + s)
        first = np.where(edge, v * w, 0.0)
        second = np.where(edge, -v * w * w, 0.0)
        if gamma > 0:
            repulsive = ~edge
            repulsive[np.arange(block.size), block] = False
            coincident = repulsive & (s == 0)
            if np.any(coincident):
                r, j = np.argwhere(coincident)[0]
                raise ValueError(f"points {block[r]} and {j} coincide in a repulsive LargeVis term")
            s_safe = np.where(repulsive, s, 1.0)
            first = first + np.where(repulsive, -gamma * w / s_safe, 0.0)
            second = second + np.where(repulsive, gamma * (1.0 / s_safe ** 2 - w * w), 0.0)
        out[start:start + block.size] = _pair_hessians(diff, first, second)
    return out


def singularity_hessian_largevis(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray], edges, gamma: float,
                                 i: int) -> Hessian2:
    """Hessian of the LargeVis loss with respect to y_i."""
    return Hessian2.from_matrix(largevis_hessians(Y, V, edges, gamma, [i])[0])


def scores_from_hessians(hessians: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """1/λ_min per Hessian; λ_min ≤ 0 gives +inf and a flag."""
    lambda_min = _eigenvalues_min(hessians)
    flags = lambda_min <= 0
    scores = np.full(lambda_min.shape, np.inf)
    scores[~flags] = 1.0 / lambda_min[~flags]
    return scores, flags


def singularity_scores(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray], method: str = "tsne",
                       a: Optional[float] = None, b: Optional[float] = None, edges=None,
                       gamma: Optional[float] = None) -> ScoreReport:
    """
    Singularity scores of every point.

    Args:
        Y: n×2 embedding
        V: Similarities matching the method
        method: "tsne", "umap" (needs a, b) or "largevis" (needs edges, gamma)

    Returns:
        ScoreReport of kind "singularity"; non-positive curvature is +inf
        and flagged, and coincident repulsive pairs are recorded as errors
    """
    if method not in METHODS:
        raise SpecValidationError(f"method must be one of {METHODS}", "method")
    Y = _embedding(Y)
    n = Y.shape[0]
    config = {"method": method, "n": n}
    errors = {}

    if method == "tsne":
        hessians = tsne_hessians(Y, V)
        if isinstance(V, SimilarityMatrix):
            config["perplexity"] = V.perplexity
    elif method == "umap":
        if a is None or b is None:
            raise SpecValidationError("UMAP scores need a and b", "a, b")
        hessians = umap_hessians(Y, V, a, b)
        config.update(a=a, b=b)
    else:
        if edges is None or gamma is None:
            raise SpecValidationError("LargeVis scores need edges and gamma", "edges, gamma")
        config.update(gamma=gamma)
        try:
            hessians = largevis_hessians(Y, V, edges, gamma)
        except ValueError:
            hessians = np.full((n, 2, 2), np.nan)
            for i in range(n):
                try:
                    hessians[i] = largevis_hessians(Y, V, edges, gamma, [i])[0]
                except ValueError as exc:
                    errors[i] = str(exc)

    failed = np.zeros(n, dtype=bool)
    failed[list(errors)] = True
    scores, flags = scores_from_hessians(np.where(failed[:, None, None], np.eye(2), hessians))
    scores[failed] = np.nan
    flags[failed] = False
    if np.any(flags):
        logger.info("%d of %d points have non-positive curvature", int(flags.sum()), n)
    return ScoreReport(scores, "singularity", config, None, flags, errors)
