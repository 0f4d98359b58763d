"""
Exact t-SNE: Student-t kernel, total loss, analytic gradient and the
momentum/gains gradient-descent optimizer.

The loss is written in the unnormalized pairwise form

    L(Y) = Σ_{i<j} -2 v_ij log w(y_i, y_j) + log Σ_{k≠l} w(y_k, y_l)

which differs from KL(V || W/Z) only by the constant Σ v log v.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from core.affinity import DEFAULT_ENTROPY_TOLERANCE, AffinityContext, SimilarityMatrix, similarity_matrix
from core.errors import DivergenceError, SpecValidationError
from data.generators import InputMatrix
from data.preprocessing import fit_pca

logger = logging.getLogger(__name__)

INIT_MODES = ("pca", "random", "given")
INIT_SCALE = 1e-4


def _check_finite(array: np.ndarray, name: str) -> np.ndarray:
    array = np.asarray(array, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return array


def kernel_w(y_a: np.ndarray, y_b: np.ndarray) -> float:
    """Student-t kernel (1 + |y_a - y_b|²)^-1."""
    diff = _check_finite(y_a, "y_a") - _check_finite(y_b, "y_b")
    return 1.0 / (1.0 + float(np.dot(diff, diff)))


def kernel_matrix(Y: np.ndarray) -> np.ndarray:
    """Pairwise kernel values with a zero diagonal."""
    W = 1.0 / (1.0 + squareform(pdist(Y, "sqeuclidean")))
    np.fill_diagonal(W, 0.0)
    return W


def _check_pair(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    V = V.values if isinstance(V, SimilarityMatrix) else np.asarray(V, dtype=np.float64)
    Y = _check_finite(Y, "Y")
    if Y.ndim != 2 or V.shape != (Y.shape[0], Y.shape[0]):
        raise SpecValidationError(f"embedding shape {Y.shape} does not match similarity shape {V.shape}", "Y")
    return Y, V


def _loss_from_kernel(W: np.ndarray, V: np.ndarray) -> float:
    Z = W.sum()
    mask = V > 0
    return float(-np.sum(V[mask] * np.log(W[mask])) + np.log(Z))


def _gradient_from_kernel(Y: np.ndarray, W: np.ndarray, V: np.ndarray, exaggeration: float = 1.0) -> np.ndarray:
    M = (exaggeration * V - W / W.sum()) * W
    return 4.0 * (M.sum(axis=1)[:, None] * Y - M @ Y)


def total_loss(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray]) -> float:
    """
    t-SNE loss of a full embedding.

    Args:
        Y: n×2 embedding
        V: Symmetric similarities (SimilarityMatrix or array)

    Returns:
        Σ_{i<j} 2 v_ij log(1 + |y_i - y_j|²) + log Z
    """
    Y, V = _check_pair(Y, V)
    return _loss_from_kernel(kernel_matrix(Y), V)


def total_gradient(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray]) -> np.ndarray:
    """
    Analytic gradient of total_loss.

    Row i is 4 Σ_j (v_ij - w_ij / Z) w_ij (y_i - y_j).
    """
    Y, V = _check_pair(Y, V)
    return _gradient_from_kernel(Y, kernel_matrix(Y), V)


def loss_and_gradient(Y: np.ndarray, V: Union[SimilarityMatrix, np.ndarray]) -> Tuple[float, np.ndarray]:
    Y, V = _check_pair(Y, V)
    W = kernel_matrix(Y)
    return _loss_from_kernel(W, V), _gradient_from_kernel(Y, W, V)


@dataclass
class TsneConfig:
    """
    Optimizer settings; defaults follow the reference exact t-SNE.

    ``init`` is "pca", "random" or "given" (an explicit matrix passed to
    run_tsne). ``pca_dim`` applies PCA to the input before affinities.
    """

    perplexity: float = 30.0
    max_iter: int = 1000
    learning_rate: float = 200.0
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch_iter: int = 250
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    init: str = "pca"
    seed: int = 0
    entropy_tol: float = DEFAULT_ENTROPY_TOLERANCE
    min_gain: float = 0.01
    pca_dim: Optional[int] = None
    trace_interval: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self, n: Optional[int] = None) -> None:
        """
        Raises:
            SpecValidationError: On a non-positive rate or count, an unknown
                init mode, or (when n is given) a perplexity outside (1, n-1]
        """
        if self.perplexity <= 1.0:
            raise SpecValidationError("perplexity must exceed 1", "perplexity")
        if n is not None and self.perplexity > n - 1:
            raise SpecValidationError(f"perplexity {self.perplexity} must not exceed n-1={n - 1}", "perplexity")
        if self.max_iter < 0:
            raise SpecValidationError("max_iter must be nonnegative", "max_iter")
        if self.learning_rate <= 0:
            raise SpecValidationError("learning_rate must be positive", "learning_rate")
        if self.exaggeration <= 0 or self.exaggeration_iters < 0:
            raise SpecValidationError("exaggeration must be positive with a nonnegative duration", "exaggeration")
        if not 0.0 <= self.initial_momentum < 1.0 or not 0.0 <= self.final_momentum < 1.0:
            raise SpecValidationError("momentum must lie in [0, 1)", "momentum")
        if self.init not in INIT_MODES:
            raise SpecValidationError(f"init must be one of {INIT_MODES}", "init")
        if self.trace_interval < 1:
            raise SpecValidationError("trace_interval must be positive", "trace_interval")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> "TsneConfig":
        known = {name: document[name] for name in cls.__dataclass_fields__ if name in document}
        unknown = set(document) - set(known)
        if unknown:
            logger.warning("Ignoring unknown t-SNE settings: %s", ", ".join(sorted(unknown)))
        return cls(**known)

    def warm_start(self, max_iter: int = 250) -> "TsneConfig":
        """Settings for a warm-started rerun: no early exaggeration, final momentum."""
        settings = self.to_dict()
        settings.update(max_iter=max_iter, exaggeration=1.0, exaggeration_iters=0,
                        initial_momentum=self.final_momentum, momentum_switch_iter=0, init="given")
        return TsneConfig(**settings)


@dataclass
class Embedding:
    """Optimized n×2 embedding, its config and loss history."""

    Y: np.ndarray
    config: TsneConfig
    loss: float
    loss_trace: List[Tuple[int, float]] = field(default_factory=list)
    similarity: Optional[SimilarityMatrix] = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.Y)) or not np.isfinite(self.loss):
            raise ValueError("embedding and loss must be finite")

    @property
    def n(self) -> int:
        return self.Y.shape[0]


def initial_embedding(features: Optional[np.ndarray], n: int, config: TsneConfig) -> np.ndarray:
    """PCA or seeded Gaussian initialization, scaled to standard deviation 1e-4."""
    if config.init == "pca" and features is not None and min(features.shape) >= 2:
        Y = fit_pca(features, 2).transform(features)
        scale = Y[:, 0].std()
        return Y * (INIT_SCALE / scale) if scale > 0 else Y
    if config.init == "pca":
        logger.warning("PCA initialization unavailable; falling back to a random start")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    return INIT_SCALE * rng.standard_normal((n, 2))


def run_tsne(data: Union[InputMatrix, np.ndarray, SimilarityMatrix], config: TsneConfig,
             init: Optional[np.ndarray] = None, threads: int = 1) -> Embedding:
    """
    Optimize an exact t-SNE embedding.

    Args:
        data: Raw input (affinities are computed here) or precomputed similarities
        config: Optimizer settings
        init: Explicit n×2 starting matrix (warm start); used as-is
        threads: Worker threads for bandwidth calibration

    Returns:
        Embedding with the final (unexaggerated) loss and its trace

    Raises:
        DivergenceError: If the loss or embedding becomes non-finite
    """
    features = None
    if isinstance(data, SimilarityMatrix):
        similarity = data
    else:
        features = data.values if isinstance(data, InputMatrix) else np.asarray(data, dtype=np.float64)
        if config.pca_dim is not None and config.pca_dim < features.shape[1]:
            features = fit_pca(features, config.pca_dim).transform(features)
        similarity = similarity_matrix(features, config.perplexity, config.entropy_tol, threads)

    V = similarity.values
    n = V.shape[0]
    config.validate(n)

    if init is not None:
        Y = _check_finite(init, "init").copy()
        if Y.shape != (n, 2):
            raise SpecValidationError(f"initial embedding must be {(n, 2)}, got {Y.shape}", "init")
    elif config.init == "given":
        raise SpecValidationError("init mode 'given' requires an initial embedding", "init")
    else:
        Y = initial_embedding(features, n, config)

    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace: List[Tuple[int, float]] = []
    loss = total_loss(Y, V)
    trace.append((0, loss))

    for iteration in range(1, config.max_iter + 1):
        exaggeration = config.exaggeration if iteration <= config.exaggeration_iters else 1.0
        momentum = config.initial_momentum if iteration <= config.momentum_switch_iter else config.final_momentum

        W = kernel_matrix(Y)
        gradient = _gradient_from_kernel(Y, W, V, exaggeration)

        same_sign = np.sign(gradient) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, config.min_gain, out=gains)
        update = momentum * update - config.learning_rate * gains * gradient
        candidate = Y + update
        candidate -= candidate.mean(axis=0)

        if not np.all(np.isfinite(candidate)):
            raise DivergenceError("embedding became non-finite", iteration, Y)
        Y = candidate

        if iteration % config.trace_interval == 0 or iteration == config.max_iter:
            loss = total_loss(Y, V)
            if not np.isfinite(loss):
                raise DivergenceError("loss became non-finite", iteration, Y)
            trace.append((iteration, loss))
            logger.debug("Iteration %d: loss %.6f", iteration, loss)

    if config.max_iter:
        logger.info("t-SNE finished %d iterations (n=%d, perplexity %.4g): loss %.6f",
                    config.max_iter, n, similarity.perplexity, loss)
    return Embedding(Y, config, loss, trace, similarity)


def embed_context(context: AffinityContext, config: TsneConfig, init: Optional[np.ndarray] = None,
                  threads: int = 1) -> Embedding:
    """Embed precomputed affinities, with PCA initialization from the context features."""
    if init is None:
        init = initial_embedding(context.features, context.n, config)
    return run_tsne(context.similarity, config, init=init, threads=threads)
