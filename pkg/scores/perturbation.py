"""
Perturbation scores: how far the partial LOO-map moves a point when its
input is pushed a fixed distance along the leading principal directions.

    score_i = max over e in {±e_1, ..., ±e_k} of |f_i(x_i + λe) - y_i|
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist
from tqdm import tqdm

from core.affinity import APPROXIMATIONS, AffinityContext
from core.errors import LooSolveError, NescopeError, SpecValidationError
from core.loo import partial_loo_problem
from core.loo_solver import SolverStrategy, solve_loo_map
from data.preprocessing import principal_directions
from scores.report import ScoreReport
from scores.screening import DEFAULT_MIN_SAMPLES, periphery_points

logger = logging.getLogger(__name__)

DEFAULT_LENGTH_FRACTION = 0.1
DEFAULT_FROZEN_STARTS = 32


def default_strategy() -> SolverStrategy:
    """Start set for partial problems: the original position, the most similar points, centroids and a grid."""
    return SolverStrategy(grid_resolution=6, frozen_starts=DEFAULT_FROZEN_STARTS)


@dataclass
class PerturbationConfig:
    """
    ``length`` None means 10% of the input-space diameter.
    """

    length: Optional[float] = None
    directions: int = 3
    approximation: str = "approx2"
    prescreen: bool = False
    min_samples: int = DEFAULT_MIN_SAMPLES
    eps: Optional[float] = None
    strategy: SolverStrategy = field(default_factory=default_strategy)

    def __post_init__(self):
        if self.length is not None and not self.length > 0:
            raise SpecValidationError("perturbation length must be positive", "length")
        if self.directions < 1:
            raise SpecValidationError("at least one direction is required", "directions")
        if self.approximation not in APPROXIMATIONS:
            raise SpecValidationError(f"approximation must be one of {APPROXIMATIONS}", "approximation")
        if self.min_samples < 2:
            raise SpecValidationError("min_samples must be at least 2", "min_samples")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def input_diameter(values: np.ndarray) -> float:
    """Largest pairwise Euclidean distance."""
    return float(pdist(values).max()) if values.shape[0] > 1 else 0.0


def resolve_length(context: AffinityContext, cfg: PerturbationConfig) -> float:
    if cfg.length is not None:
        return cfg.length
    length = DEFAULT_LENGTH_FRACTION * input_diameter(context.matrix.values)
    if length <= 0:
        raise SpecValidationError("input diameter is zero; set the perturbation length explicitly", "length")
    return length


def perturbation_directions(context: AffinityContext, count: int) -> List[Tuple[str, np.ndarray]]:
    """Labelled ±e_1..±e_k from the raw input's principal directions."""
    directions = principal_directions(context.matrix.values, count)
    labelled = []
    for j, direction in enumerate(directions, start=1):
        labelled.append((f"+e{j}", direction))
        labelled.append((f"-e{j}", -direction))
    return labelled


def perturbation_score(context: AffinityContext, Y: np.ndarray, index: int, cfg: PerturbationConfig,
                       directions: Optional[List[Tuple[str, np.ndarray]]] = None,
                       length: Optional[float] = None) -> float:
    """
    Perturbation score of one point.

    Args:
        context: Affinity machinery of the embedded data
        Y: Embedding
        index: Point to score
        cfg: Perturbation settings
        directions: Precomputed labelled directions (from perturbation_directions)
        length: Precomputed perturbation length

    Returns:
        Largest displacement of y_index over all directions

    Raises:
        LooSolveError: If the LOO-map fails for a direction (named in the message)
    """
    if not 0 <= index < context.n:
        raise IndexError(f"point index {index} out of range for n={context.n}")
    directions = directions or perturbation_directions(context, cfg.directions)
    length = resolve_length(context, cfg) if length is None else length
    x_i = context.matrix.values[index]
    Y = np.asarray(Y, dtype=np.float64)

    score = 0.0
    for label, direction in directions:
        problem = partial_loo_problem(context, Y, index, x_i + length * direction, cfg.approximation)
        try:
            solution = solve_loo_map(problem, cfg.strategy)
        except LooSolveError as exc:
            raise LooSolveError(f"point {index}, direction {label}: {exc}", exc.best_iterate,
                                exc.gradient_norm, context=label) from exc
        score = max(score, float(np.linalg.norm(solution.y - Y[index])))
    return score


def perturbation_scores_batch(context: AffinityContext, Y: np.ndarray, cfg: PerturbationConfig,
                              indices: Optional[np.ndarray] = None, threads: int = 1,
                              progress: bool = False) -> ScoreReport:
    """
    Perturbation scores for every point (or the pre-screened periphery).

    Per-point failures are recorded in ``ScoreReport.errors`` and leave a
    NaN score; the remaining points are still scored.

    Args:
        context: Affinity machinery of the embedded data
        Y: Embedding
        cfg: Perturbation settings
        indices: Restrict scoring to these points (others masked)
        threads: Points are scored in parallel on this many threads
        progress: Show a progress bar

    Returns:
        ScoreReport of kind "perturbation"
    """
    n = context.n
    Y = np.asarray(Y, dtype=np.float64)
    masked = np.zeros(n, dtype=bool)
    if cfg.prescreen:
        masked |= ~periphery_points(Y, cfg.min_samples, cfg.eps).periphery
    if indices is not None:
        selected = np.zeros(n, dtype=bool)
        selected[np.asarray(indices, dtype=np.int64)] = True
        masked |= ~selected
    targets = np.flatnonzero(~masked)

    directions = perturbation_directions(context, cfg.directions)
    length = resolve_length(context, cfg)

    def score(i: int) -> Tuple[int, float, Optional[str]]:
        try:
            return i, perturbation_score(context, Y, i, cfg, directions, length), None
        except NescopeError as exc:
            return i, float("nan"), str(exc)

    values = np.full(n, np.nan)
    errors: Dict[int, str] = {}
    with tqdm(total=targets.size, desc="Perturbation scores", disable=not progress) as bar:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = []
                for result in pool.map(score, targets):
                    results.append(result)
                    bar.update(1)
        else:
            results = []
            for i in targets:
                results.append(score(i))
                bar.update(1)

    for i, value, error in results:
        values[i] = value
        if error is not None:
            errors[int(i)] = error
            logger.warning("Perturbation score failed for point %d: %s", i, error)

    snapshot = cfg.to_dict()
    snapshot.update(length=length, perplexity=context.perplexity, n=n)
    logger.info("Scored %d of %d points (%d failures)", targets.size, n, len(errors))
    return ScoreReport(values, "perturbation", snapshot, masked, np.zeros(n, dtype=bool), errors)


def embedding_gap_points(Y: np.ndarray, coordinate: np.ndarray) -> np.ndarray:
    """
    Points on either side of the largest embedding jump along a continuous coordinate.

    Points are ordered by ``coordinate`` (e.g. the Swiss-roll angle); the pair of
    coordinate-neighbors that are farthest apart in the embedding marks the break.

    Returns:
        The two indices adjacent to the break
    """
    order = np.argsort(np.asarray(coordinate), kind="stable")
    steps = np.linalg.norm(np.diff(np.asarray(Y)[order], axis=0), axis=1)
    j = int(np.argmax(steps))
    return np.array([order[j], order[j + 1]])
