"""
LOO loss landscapes, interpolation trajectories and the two-cluster
saddle-point field.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.affinity import AffinityContext
from core.errors import SpecValidationError
from core.loo import LooProblem, make_loo_problem
from core.loo_solver import LocalMinimum, SolverStrategy, grid_points, locate_minima, solve_loo_map
from core.tsne import TsneConfig, embed_context

logger = logging.getLogger(__name__)


@dataclass
class LandscapeGrid:
    """
    Dense loss and force (negative gradient) evaluation on a rectangular grid.

    ``loss`` has shape (ry, rx) and ``force`` (ry, rx, 2); row r is the r-th
    y value, column c the c-th x value.
    """

    bounds: np.ndarray
    resolution: Tuple[int, int]
    loss: np.ndarray
    force: np.ndarray
    minima: List[LocalMinimum] = field(default_factory=list)

    @property
    def minima_count(self) -> int:
        return len(self.minima)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.bounds[0, 0], self.bounds[0, 1], self.resolution[0])

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.bounds[1, 0], self.bounds[1, 1], self.resolution[1])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bounds": self.bounds.tolist(),
            "resolution": list(self.resolution),
            "loss": self.loss.tolist(),
            "grad": self.force.tolist(),
            "minima": [{"y": m.y.tolist(), "loss": m.loss} for m in self.minima],
        }

    def save_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as handle:
            json.dump(self.to_dict(), handle)
        return path


def _resolution(resolution: Union[int, Sequence[int]]) -> Tuple[int, int]:
    rx, ry = (resolution, resolution) if np.isscalar(resolution) else tuple(resolution)
    if rx < 2 or ry < 2:
        raise SpecValidationError("landscape resolution must be at least 2 per axis", "resolution")
    return int(rx), int(ry)


def landscape(problem: LooProblem, bounds: Optional[np.ndarray] = None,
              resolution: Union[int, Sequence[int]] = 50,
              strategy: Optional[SolverStrategy] = None) -> LandscapeGrid:
    """
    Evaluate a LOO loss on a grid and locate its local minima.

    Minima are found by descent from every grid cell and deduplicated at
    the strategy's radius; only minima inside ``bounds`` are kept.

    Args:
        problem: LOO problem
        bounds: [[x_lo, x_hi], [y_lo, y_hi]]; defaults to the frozen bounding box inflated 20%
        resolution: Cells per axis (int or (rx, ry)), each ≥ 2
        strategy: Descent settings (only tolerances and dedup radius are used)

    Returns:
        LandscapeGrid
    """
    rx, ry = _resolution(resolution)
    strategy = strategy or SolverStrategy()
    bounds = problem.bounds(strategy.inflate) if bounds is None else np.asarray(bounds, dtype=np.float64)
    if bounds.shape != (2, 2) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise SpecValidationError("bounds must be [[x_lo, x_hi], [y_lo, y_hi]] with lo < hi", "bounds")

    xs = np.linspace(bounds[0, 0], bounds[0, 1], rx)
    ys = np.linspace(bounds[1, 0], bounds[1, 1], ry)
    gx, gy = np.meshgrid(xs, ys)
    cells = np.column_stack([gx.ravel(), gy.ravel()])

    losses = problem.loss_many(cells).reshape(ry, rx)
    force = -problem.gradient_many(cells).reshape(ry, rx, 2)

    inside = []
    for minimum in locate_minima(problem, cells, strategy):
        if np.all(minimum.y >= bounds[:, 0]) and np.all(minimum.y <= bounds[:, 1]):
            inside.append(minimum)
    logger.debug("Landscape %dx%d: %d minima inside bounds", rx, ry, len(inside))
    return LandscapeGrid(bounds, (rx, ry), losses, force, inside)


@dataclass
class InterpolationTrajectory:
    """LOO-map images y*(t) of x(t) = t·c1 + (1 - t)·c2."""

    ts: np.ndarray
    points: np.ndarray
    losses: np.ndarray
    minima_counts: np.ndarray

    @property
    def jumps(self) -> np.ndarray:
        """Consecutive step lengths; entry j is |y*(t_{j+1}) - y*(t_j)|."""
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    @property
    def max_jump(self) -> float:
        return float(self.jumps.max()) if self.points.shape[0] > 1 else 0.0

    @property
    def max_jump_interval(self) -> Tuple[float, float]:
        j = int(np.argmax(self.jumps))
        return float(self.ts[j]), float(self.ts[j + 1])

    @property
    def step_variance(self) -> float:
        """Variance of consecutive step lengths (trajectory unevenness)."""
        return float(np.var(self.jumps))

    def rows(self) -> List[Tuple[float, float, float, float]]:
        """(t, y1, y2, jump) rows; jump is the step from the previous t (0 for the first)."""
        jumps = np.concatenate([[0.0], self.jumps])
        return [(float(t), float(y[0]), float(y[1]), float(j)) for t, y, j in zip(self.ts, self.points, jumps)]


def interpolation_trajectory(context: AffinityContext, Y: np.ndarray, c1: np.ndarray, c2: np.ndarray,
                             steps: int = 51, approximation: str = "approx2",
                             strategy: Optional[SolverStrategy] = None,
                             ts: Optional[Sequence[float]] = None, threads: int = 1) -> InterpolationTrajectory:
    """
    Follow the LOO-map along a straight line between two raw inputs.

    Args:
        context: Affinity machinery of the original data
        Y: Embedding of the original data
        c1, c2: Endpoints in raw input space
        steps: Number of evenly spaced t in [0, 1] (≥ 2); ignored when ``ts`` is given
        approximation: Similarity-column recipe for each x(t)
        strategy: LOO-map search settings
        ts: Explicit parameter values, sorted ascending
        threads: Worker threads over t values

    Returns:
        InterpolationTrajectory
    """
    if ts is None:
        if steps < 2:
            raise SpecValidationError("a trajectory needs at least 2 steps", "steps")
        ts = np.linspace(0.0, 1.0, steps)
    ts = np.asarray(ts, dtype=np.float64)
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)

    def solve(t: float):
        problem = make_loo_problem(context, Y, t * c1 + (1.0 - t) * c2, approximation)
        return solve_loo_map(problem, strategy)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solutions = list(pool.map(solve, ts))
    else:
        solutions = [solve(t) for t in ts]

    trajectory = InterpolationTrajectory(
        ts=ts,
        points=np.array([s.y for s in solutions]),
        losses=np.array([s.loss for s in solutions]),
        minima_counts=np.array([s.minima_count for s in solutions]),
    )
    logger.info("Trajectory over %d values of t: max jump %.4g", ts.size, trajectory.max_jump)
    return trajectory


def theoretical_field(theta: np.ndarray, epsilon: float, points: np.ndarray) -> np.ndarray:
    """
    Saddle-point force field ((y_par - y_perp) + epsilon·theta) / |theta|².

    Args:
        theta: Half the vector between the two cluster centers (nonzero)
        epsilon: Relative similarity imbalance towards the +theta cluster
        points: k×2 positions relative to the midpoint of the cluster centers

    Returns:
        k×2 field values
    """
    theta = np.asarray(theta, dtype=np.float64)
    norm2 = float(theta @ theta)
    if norm2 <= 0:
        raise SpecValidationError("theta must be nonzero", "theta")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    parallel = np.outer(points @ theta, theta) / norm2
    perpendicular = points - parallel
    return (parallel - perpendicular + epsilon * theta) / norm2


@dataclass
class FieldParameters:
    center: np.ndarray
    theta: np.ndarray
    epsilon: float


def estimate_field_parameters(Y: np.ndarray, labels: np.ndarray, u: np.ndarray) -> FieldParameters:
    """
    Two-cluster geometry of an embedding as seen by one similarity column.

    The cluster with the smaller label is the +theta cluster; epsilon is the
    relative difference of the mean similarities to the two clusters.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size != 2:
        raise SpecValidationError(f"expected exactly two clusters, got {classes.size}", "labels")
    plus, minus = labels == classes[0], labels == classes[1]
    c_plus, c_minus = Y[plus].mean(axis=0), Y[minus].mean(axis=0)
    u_plus, u_minus = u[plus].mean(), u[minus].mean()
    epsilon = (u_plus - u_minus) / (u_plus + u_minus) if u_plus + u_minus > 0 else 0.0
    return FieldParameters(0.5 * (c_plus + c_minus), 0.5 * (c_plus - c_minus), float(epsilon))


@dataclass
class FieldAlignment:
    mean_cosine: float
    hyperbolic_agreement: float
    cosines: np.ndarray


def field_alignment(problem: LooProblem, parameters: FieldParameters, half_width: Optional[float] = None,
                    resolution: int = 21) -> FieldAlignment:
    """
    Compare the empirical LOO force with the theoretical field around the midpoint.

    Args:
        problem: Add-one problem of the mixed point
        parameters: Output of estimate_field_parameters
        half_width: Half side of the square grid (default |theta| / 4)
        resolution: Cells per axis

    Returns:
        Mean cosine between the two fields and the fraction of cells where
        the empirical force has a positive inner product with the
        hyperbolic term alone
    """
    theta = parameters.theta
    half_width = 0.25 * float(np.linalg.norm(theta)) if half_width is None else half_width
    bounds = np.array([[-half_width, half_width], [-half_width, half_width]])
    offsets = grid_points(bounds, resolution)
    empirical = -problem.gradient_many(parameters.center + offsets)
    predicted = theoretical_field(theta, parameters.epsilon, offsets)
    hyperbolic = theoretical_field(theta, 0.0, offsets)

    norms = np.linalg.norm(empirical, axis=1) * np.linalg.norm(predicted, axis=1)
    valid = norms > 0
    cosines = np.einsum("ki,ki->k", empirical[valid], predicted[valid]) / norms[valid]
    agreement = np.einsum("ki,ki->k", empirical, hyperbolic) > 0
    return FieldAlignment(float(cosines.mean()), float(agreement.mean()), cosines)


def minima_count_sweep(matrix, perplexities: Sequence[float], x_new: np.ndarray, config: TsneConfig,
                       resolution: int = 40, strategy: Optional[SolverStrategy] = None,
                       approximation: str = "exact", threads: int = 1) -> List[Tuple[float, int]]:
    """
    Count landscape minima of the same added point at several perplexities.

    Args:
        matrix: Raw InputMatrix
        perplexities: Perplexities to embed at
        x_new: Added raw point (typically a midpoint between clusters)
        config: Base TsneConfig; its perplexity is replaced per run
        resolution: Landscape cells per axis
        strategy: Descent settings
        approximation: Similarity-column recipe
        threads: Worker threads for calibration

    Returns:
        [(perplexity, minima count), ...] in input order
    """
    counts = []
    for perplexity in perplexities:
        settings = config.to_dict()
        settings["perplexity"] = float(perplexity)
        run_config = TsneConfig(**settings)
        context = AffinityContext.build(matrix, perplexity, run_config.pca_dim, run_config.entropy_tol, threads)
        embedding = embed_context(context, run_config, threads=threads)
        grid = landscape(make_loo_problem(context, embedding.Y, x_new, approximation), resolution=resolution,
                         strategy=strategy)
        counts.append((float(perplexity), grid.minima_count))
        logger.info("Perplexity %.4g: %d landscape minima", perplexity, grid.minima_count)
    return counts
