"""
Input-space affinities for exact t-SNE.

Per-row Gaussian bandwidths are calibrated so that each conditional
distribution p_{.|i} has entropy log2(perplexity); the symmetrized matrix
v_ij = (p_{j|i} + p_{i|j}) / (2n) sums to one over all ordered pairs.

The module also builds the single similarity columns the leave-one-out
machinery needs, either by recomputing the full affinity of the modified data
("exact"), by reusing the original PCA projection ("approx1"), or by
additionally reusing every bandwidth except the modified point's ("approx2").
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from core.errors import CalibrationError, SpecValidationError
from data.generators import InputMatrix
from data.preprocessing import PcaProjection, fit_pca

logger = logging.getLogger(__name__)

DEFAULT_ENTROPY_TOLERANCE = 1e-9
MAX_BRACKET_DOUBLINGS = 64
MAX_BISECTIONS = 200
APPROXIMATIONS = ("exact", "approx1", "approx2")


@dataclass
class RowCalibration:
    beta: float
    entropy_bits: float
    log_normalizer: float
    conditional: np.ndarray


@dataclass
class BandwidthCalibration:
    """
    Result of the per-row bandwidth search.

    ``betas`` are precisions 1/(2σ²); ``log_normalizers`` are
    log Σ_{k≠i} exp(-β_i D_ik), kept so single entries can be replaced later.
    """

    betas: np.ndarray
    log_normalizers: np.ndarray
    conditional: np.ndarray
    entropy_bits: np.ndarray

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(0.5 / self.betas)

    @property
    def achieved_perplexity(self) -> np.ndarray:
        return np.power(2.0, self.entropy_bits)


@dataclass
class SimilarityMatrix:
    """Symmetric n×n t-SNE affinities plus the bandwidths that produced them."""

    values: np.ndarray
    perplexity: float
    betas: np.ndarray
    log_normalizers: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(0.5 / self.betas)


def squared_distances(values: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances with an exact zero diagonal."""
    return squareform(pdist(np.asarray(values, dtype=np.float64), "sqeuclidean"))


def _entropy_at(distances: np.ndarray, beta: float, shift: float) -> Tuple[float, float, np.ndarray]:
    """Entropy (bits), log normalizer and probabilities of exp(-beta * distances)."""
    scaled = np.exp(-beta * (distances - shift))
    total = scaled.sum()
    probabilities = scaled / total
    entropy_nats = np.log(total) + beta * np.dot(distances - shift, probabilities)
    return entropy_nats / np.log(2.0), np.log(total) - beta * shift, probabilities


def calibrate_row(distances: np.ndarray, target_bits: float, row: int,
                  tol: float = DEFAULT_ENTROPY_TOLERANCE) -> RowCalibration:
    """
    Find the precision of one row by bracketed bisection.

    Args:
        distances: Squared distances from point ``row`` to every other point
            (self excluded)
        target_bits: log2(perplexity)
        row: Row index, used in error messages
        tol: Entropy tolerance in bits

    Returns:
        RowCalibration; ``conditional`` is aligned with ``distances``

    Raises:
        CalibrationError: If all distances are zero or the target cannot be
            bracketed within 64 doublings
    """
    nonzero = distances > 0
    if not np.any(nonzero):
        raise CalibrationError("all distances are zero (degenerate duplicate data)", row)
    search = distances[nonzero]
    shift = search.min()

    if search.max() == shift:
        # Equidistant neighbors: the row is uniform for every bandwidth.
        beta = 1.0 / shift
        bits = np.log2(search.size)
        if abs(bits - target_bits) > tol:
            logger.warning("Row %d has %d equidistant neighbors; entropy fixed at %.4f bits (target %.4f)",
                           row, search.size, bits, target_bits)
        return _finish_row(distances, beta, bits, row)

    beta = 1.0 / search.mean()
    bits, _, _ = _entropy_at(search, beta, shift)
    lower, upper = 0.0, np.inf

    doublings = 0
    while abs(bits - target_bits) > tol and (upper == np.inf or lower == 0.0):
        if bits > target_bits:
            lower = beta
            if upper < np.inf:
                break
            beta *= 2.0
        else:
            upper = beta
            if lower > 0.0:
                break
            beta *= 0.5
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise CalibrationError(
                f"could not bracket entropy {target_bits:.6f} bits within {MAX_BRACKET_DOUBLINGS} doublings "
                f"(last entropy {bits:.6f} bits)",
                row,
            )
        bits, _, _ = _entropy_at(search, beta, shift)

    for _ in range(MAX_BISECTIONS):
        if abs(bits - target_bits) <= tol:
            break
        if bits > target_bits:
            lower = beta
        else:
            upper = beta
        beta = 0.5 * (lower + upper)
        bits, _, _ = _entropy_at(search, beta, shift)
    else:
        logger.debug("Row %d stopped bisecting at entropy error %.3g bits", row, abs(bits - target_bits))

    return _finish_row(distances, beta, bits, row)


def _finish_row(distances: np.ndarray, beta: float, bits: float, row: int) -> RowCalibration:
    shift = distances.min()
    full_bits, log_normalizer, conditional = _entropy_at(distances, beta, shift)
    if not np.all(distances > 0):
        logger.debug("Row %d has exact duplicates; achieved entropy %.4f bits", row, full_bits)
    return RowCalibration(beta, full_bits, log_normalizer, conditional)


def _check_perplexity(perplexity: float, n: int) -> None:
    # Row entropy cannot exceed log2(n - 1)
    if not 1.0 < perplexity <= n - 1:
        raise SpecValidationError(f"perplexity {perplexity} must lie in (1, n-1] for n={n}", "perplexity")


def calibrate_bandwidths(distances: np.ndarray, perplexity: float, tol: float = DEFAULT_ENTROPY_TOLERANCE,
                         threads: int = 1) -> BandwidthCalibration:
    """
    Calibrate every row of a squared-distance matrix to the given perplexity.

    Args:
        distances: Symmetric n×n squared distances with zero diagonal
        perplexity: Effective neighbor count, 1 < P < n
        tol: Entropy tolerance in bits
        threads: Worker threads for the independent row searches

    Returns:
        BandwidthCalibration with conditional probabilities p_{j|i} (row i)
    """
    distances = np.asarray(distances, dtype=np.float64)
    n = distances.shape[0]
    if distances.shape != (n, n):
        raise SpecValidationError(f"distance matrix must be square, got {distances.shape}", "distances")
    if np.any(np.diag(distances) != 0) or np.any(distances < 0) or not np.array_equal(distances, distances.T):
        raise SpecValidationError("distances must be symmetric, nonnegative, with zero diagonal", "distances")
    _check_perplexity(perplexity, n)

    target_bits = np.log2(perplexity)
    others = ~np.eye(n, dtype=bool)

    def solve(i: int) -> RowCalibration:
        return calibrate_row(distances[i, others[i]], target_bits, i, tol)

    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(solve, range(n)))
    else:
        rows = [solve(i) for i in range(n)]

    conditional = np.zeros((n, n))
    for i, result in enumerate(rows):
        conditional[i, others[i]] = result.conditional
    return BandwidthCalibration(
        betas=np.array([r.beta for r in rows]),
        log_normalizers=np.array([r.log_normalizer for r in rows]),
        conditional=conditional,
        entropy_bits=np.array([r.entropy_bits for r in rows]),
    )


def symmetrize(conditional: np.ndarray) -> np.ndarray:
    n = conditional.shape[0]
    return (conditional + conditional.T) / (2.0 * n)


def similarity_matrix(matrix: Union[InputMatrix, np.ndarray], perplexity: float,
                      tol: float = DEFAULT_ENTROPY_TOLERANCE, threads: int = 1) -> SimilarityMatrix:
    """
    Exact symmetric t-SNE affinities of the rows of ``matrix``.

    Args:
        matrix: InputMatrix or n×d array
        perplexity: Effective neighbor count
        tol: Entropy tolerance in bits
        threads: Worker threads for calibration

    Returns:
        SimilarityMatrix (sum of all entries is 1, diagonal 0)
    """
    values = matrix.values if isinstance(matrix, InputMatrix) else np.asarray(matrix, dtype=np.float64)
    if values.shape[0] < 2:
        raise SpecValidationError("at least two points are required", "n")
    calibration = calibrate_bandwidths(squared_distances(values), perplexity, tol, threads)
    return SimilarityMatrix(
        values=symmetrize(calibration.conditional),
        perplexity=float(perplexity),
        betas=calibration.betas,
        log_normalizers=calibration.log_normalizers,
    )


@dataclass
class AffinityContext:
    """
    Everything needed to recompute similarity columns for modified inputs.

    ``matrix`` holds the raw rows; ``features`` the rows the affinities were
    computed on (the PCA projection when ``pca`` is set, else the raw rows).
    """

    matrix: InputMatrix
    features: np.ndarray
    similarity: SimilarityMatrix
    pca: Optional[PcaProjection] = None
    pca_dim: Optional[int] = None
    tol: float = DEFAULT_ENTROPY_TOLERANCE
    threads: int = 1

    @classmethod
    def build(cls, matrix: InputMatrix, perplexity: float, pca_dim: Optional[int] = None,
              tol: float = DEFAULT_ENTROPY_TOLERANCE, threads: int = 1) -> "AffinityContext":
        """
        Preprocess (optionally) and compute the exact affinities.

        Args:
            matrix: Raw input rows
            perplexity: Effective neighbor count
            pca_dim: PCA width applied before affinities; None or ≥ d disables PCA
            tol: Entropy tolerance in bits
            threads: Worker threads for calibration
        """
        pca = None
        features = matrix.values
        if pca_dim is not None and pca_dim < matrix.d:
            pca = fit_pca(matrix.values, pca_dim)
            features = pca.transform(matrix.values)
        else:
            pca_dim = None
        similarity = similarity_matrix(features, perplexity, tol, threads)
        return cls(matrix, features, similarity, pca, pca_dim, tol, threads)

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def perplexity(self) -> float:
        return self.similarity.perplexity

    def _featurize(self, raw_rows: np.ndarray, approximation: str) -> np.ndarray:
        """Features of a full modified raw matrix under the given approximation level."""
        if self.pca is None:
            return raw_rows
        if approximation == "exact":
            return fit_pca(raw_rows, self.pca_dim).transform(raw_rows)
        return self.pca.transform(raw_rows)

    def _new_row_calibration(self, feature: np.ndarray, others: np.ndarray, row: int) -> RowCalibration:
        distances = cdist(feature[None, :], others, "sqeuclidean")[0]
        return calibrate_row(distances, np.log2(self.perplexity), row, self.tol)

    def added_point_column(self, x_new: np.ndarray, approximation: str = "exact") -> np.ndarray:
        """
        Similarities v_{i,n+1} of a new raw point against the n existing points.

        Returns:
            Length-n vector, computed on the augmented (n+1)-point data
        """
        _check_approximation(approximation)
        x_new = np.asarray(x_new, dtype=np.float64).reshape(-1)
        if x_new.shape[0] != self.matrix.d:
            raise SpecValidationError(f"new point has dimension {x_new.shape[0]}, expected {self.matrix.d}", "x_new")
        n = self.n
        _check_perplexity(self.perplexity, n + 1)

        if approximation != "approx2":
            augmented = self._featurize(np.vstack([self.matrix.values, x_new]), approximation)
            calibration = calibrate_bandwidths(squared_distances(augmented), self.perplexity, self.tol, self.threads)
            conditional = calibration.conditional
            return (conditional[:n, n] + conditional[n, :n]) / (2.0 * (n + 1))

        feature = self._featurize(x_new[None, :], approximation)[0]
        new_row = self._new_row_calibration(feature, self.features, n)
        distances = cdist(self.features, feature[None, :], "sqeuclidean")[:, 0]
        log_new = -self.similarity.betas * distances
        incoming = np.exp(log_new - np.logaddexp(self.similarity.log_normalizers, log_new))
        return (incoming + new_row.conditional) / (2.0 * (n + 1))

    def replaced_point_column(self, index: int, x_replacement: np.ndarray, approximation: str = "exact") -> np.ndarray:
        """
        Similarities v_{k,index} after replacing raw row ``index`` by ``x_replacement``.

        Returns:
            Length-n vector with a zero at ``index``
        """
        _check_approximation(approximation)
        n = self.n
        if not 0 <= index < n:
            raise IndexError(f"point index {index} out of range for n={n}")
        x_replacement = np.asarray(x_replacement, dtype=np.float64).reshape(-1)
        if x_replacement.shape[0] != self.matrix.d:
            raise SpecValidationError(
                f"replacement has dimension {x_replacement.shape[0]}, expected {self.matrix.d}", "x_replacement")

        if approximation != "approx2":
            raw = self.matrix.values.copy()
            raw[index] = x_replacement
            features = self._featurize(raw, approximation)
            calibration = calibrate_bandwidths(squared_distances(features), self.perplexity, self.tol, self.threads)
            conditional = calibration.conditional
            return (conditional[:, index] + conditional[index, :]) / (2.0 * n)

        feature = self._featurize(x_replacement[None, :], approximation)[0]
        others = np.arange(n) != index
        new_row = self._new_row_calibration(feature, self.features[others], index)

        betas = self.similarity.betas[others]
        log_normalizers = self.similarity.log_normalizers[others]
        old = cdist(self.features[others], self.features[index][None, :], "sqeuclidean")[:, 0]
        new = cdist(self.features[others], feature[None, :], "sqeuclidean")[:, 0]
        # Swap the single changed term in each row normalizer.
        old_share = np.exp(-betas * old - log_normalizers)
        new_share = np.exp(-betas * new - log_normalizers)
        ratio = np.maximum(1.0 - old_share + new_share, np.finfo(float).tiny)
        incoming = new_share / ratio

        column = np.zeros(n)
        column[others] = (incoming + new_row.conditional) / (2.0 * n)
        return column


def _check_approximation(approximation: str) -> None:
    if approximation not in APPROXIMATIONS:
        raise SpecValidationError(f"unknown approximation {approximation!r}; expected one of {APPROXIMATIONS}",
                                  "approximation")
