"""
Global minimization of a LOO loss over the plane.

The LOO-map is an argmin over many possible local minima, so the search is
multi-start: every frozen embedding point (or the most similar ones), k-means
centroids of the frozen embedding and a coarse grid over the inflated
bounding box. All starts descend together with a damped, eigenvalue-modified
Newton iteration; starts that meet are merged, and stalled candidates are
polished with scipy's trust-region Newton method.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize
from sklearn.cluster import KMeans

from core.errors import LooSolveError
from core.loo import LooProblem

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 40
MAX_STEP_FRACTION = 0.25


@dataclass
class SolverStrategy:
    """
    Multi-start settings.

    ``frozen_starts`` limits the frozen-point starts to the points with the
    largest similarity entries (None uses every frozen point).
    """

    grid_resolution: int = 8
    cluster_count: int = 8
    frozen_starts: Optional[int] = None
    inflate: float = 0.2
    dedup_fraction: float = 1e-3
    gradient_tol: float = 1e-8
    max_iter: int = 200
    polish: bool = True
    seed: int = 0

    def refined(self, factor: int = 2) -> "SolverStrategy":
        """Same strategy with a denser start grid."""
        return SolverStrategy(self.grid_resolution * factor, self.cluster_count, self.frozen_starts, self.inflate,
                              self.dedup_fraction, self.gradient_tol, self.max_iter, self.polish, self.seed)


@dataclass
class LocalMinimum:
    y: np.ndarray
    loss: float
    gradient_norm: float
    eigenvalues: np.ndarray


@dataclass
class LooSolution:
    """Lowest located minimum plus every distinct minimum found (sorted by loss)."""

    y: np.ndarray
    loss: float
    minima: List[LocalMinimum] = field(default_factory=list)
    start_count: int = 0

    @property
    def minima_count(self) -> int:
        return len(self.minima)


def grid_points(bounds: np.ndarray, resolution: int) -> np.ndarray:
    """Row-major (x fastest) grid over [[x_lo, x_hi], [y_lo, y_hi]]."""
    xs = np.linspace(bounds[0, 0], bounds[0, 1], resolution)
    ys = np.linspace(bounds[1, 0], bounds[1, 1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def start_points(problem: LooProblem, strategy: SolverStrategy,
                 extra: Optional[np.ndarray] = None) -> np.ndarray:
    """Assemble the start set for a problem."""
    starts = []
    if problem.y_reference is not None:
        starts.append(np.reshape(problem.y_reference, (1, 2)))
    if extra is not None:
        starts.append(np.atleast_2d(np.asarray(extra, dtype=np.float64)))

    if strategy.frozen_starts is None:
        starts.append(problem.Y)
    elif strategy.frozen_starts > 0:
        order = np.argsort(-problem.u, kind="stable")[:strategy.frozen_starts]
        starts.append(problem.Y[order])

    clusters = min(strategy.cluster_count, problem.m)
    if clusters > 0:
        kmeans = KMeans(n_clusters=clusters, n_init=4, random_state=strategy.seed).fit(problem.Y)
        starts.append(kmeans.cluster_centers_)

    if strategy.grid_resolution >= 2:
        starts.append(grid_points(problem.bounds(strategy.inflate), strategy.grid_resolution))
    return np.vstack(starts)


def _tolerance(strategy: SolverStrategy, losses: np.ndarray) -> np.ndarray:
    return strategy.gradient_tol * (1.0 + np.abs(losses))


def _newton_directions(gradients: np.ndarray, hessians: np.ndarray, max_step: float) -> np.ndarray:
    eigenvalues, vectors = np.linalg.eigh(hessians)
    magnitude = np.abs(eigenvalues)
    floor = np.maximum(1e-8 * magnitude.max(axis=1, keepdims=True), 1e-300)
    magnitude = np.maximum(magnitude, floor)
    projected = np.einsum("kji,kj->ki", vectors, gradients) / magnitude
    steps = -np.einsum("kij,kj->ki", vectors, projected)
    lengths = np.linalg.norm(steps, axis=1)
    too_long = lengths > max_step
    steps[too_long] *= (max_step / lengths[too_long])[:, None]
    return steps


def _merge(points: np.ndarray, losses: np.ndarray, radius: float) -> np.ndarray:
    """Indices of points to keep: the lowest-loss point of each radius-sized cell."""
    order = np.argsort(losses, kind="stable")
    cells = np.floor(points[order] / radius).astype(np.int64)
    _, first = np.unique(cells, axis=0, return_index=True)
    return np.sort(order[first])


def descend(problem: LooProblem, starts: np.ndarray, strategy: SolverStrategy) -> np.ndarray:
    """
    Run the batched modified-Newton descent from every start.

    Returns:
        Final positions of the surviving (merged) descents
    """
    radius = strategy.dedup_fraction * problem.scale
    max_step = MAX_STEP_FRACTION * problem.scale
    active = np.array(starts, dtype=np.float64)
    finished: List[np.ndarray] = []

    for _ in range(strategy.max_iter):
        if active.shape[0] == 0:
            break
        losses, gradients, hessians = problem.evaluate_many(active)
        keep = _merge(active, losses, radius)
        active, losses, gradients, hessians = active[keep], losses[keep], gradients[keep], hessians[keep]

        norms = np.linalg.norm(gradients, axis=1)
        converged = norms <= _tolerance(strategy, losses)
        if np.any(converged):
            finished.append(active[converged])
            running = ~converged
            active, losses, gradients, hessians, norms = (
                active[running], losses[running], gradients[running], hessians[running], norms[running])
            if active.shape[0] == 0:
                break

        steps = _newton_directions(gradients, hessians, max_step)
        slopes = np.einsum("ki,ki->k", gradients, steps)
        alpha = np.ones(active.shape[0])

        # A full step that halves the gradient norm is accepted even when the
        # loss change is below rounding.
        full = active + steps
        full_losses, full_gradients = problem.loss_many(full), problem.gradient_many(full)
        accepted = (full_losses <= losses + ARMIJO * slopes) | (
            (np.linalg.norm(full_gradients, axis=1) < 0.5 * norms)
            & (full_losses <= losses + 1e-12 * (1.0 + np.abs(losses))))
        for _ in range(MAX_HALVINGS):
            pending = ~accepted
            if not np.any(pending):
                break
            alpha[pending] *= 0.5
            trial = active[pending] + alpha[pending, None] * steps[pending]
            ok = problem.loss_many(trial) <= losses[pending] + ARMIJO * alpha[pending] * slopes[pending]
            accepted[np.flatnonzero(pending)[ok]] = True

        stalled = ~accepted
        if np.any(stalled):
            finished.append(active[stalled])
        moving = accepted
        active = active[moving] + alpha[moving, None] * steps[moving]

    if active.shape[0]:
        finished.append(active)
    return np.vstack(finished) if finished else np.empty((0, 2))


def _polish(problem: LooProblem, y0: np.ndarray, strategy: SolverStrategy) -> np.ndarray:
    result = minimize(problem.loss, y0, jac=problem.gradient, hess=problem.hessian, method="trust-exact",
                      options={"gtol": strategy.gradient_tol, "maxiter": 100})
    return result.x


def locate_minima(problem: LooProblem, starts: np.ndarray, strategy: SolverStrategy) -> List[LocalMinimum]:
    """
    Descend from ``starts`` and return the distinct strict local minima, sorted by loss.

    A candidate counts as a minimum when its gradient norm is below
    gradient_tol·(1 + |loss|) and its Hessian is positive definite.
    """
    return _search(problem, starts, strategy)[0]


def _search(problem: LooProblem, starts: np.ndarray, strategy: SolverStrategy):
    candidates = descend(problem, starts, strategy)
    if candidates.shape[0] == 0:
        return [], candidates, np.empty(0), np.empty(0)
    losses, gradients, _ = problem.evaluate_many(candidates)
    candidates = candidates[_merge(candidates, losses, strategy.dedup_fraction * problem.scale)]

    losses, gradients, hessians = problem.evaluate_many(candidates)
    norms = np.linalg.norm(gradients, axis=1)
    if strategy.polish:
        for j in np.flatnonzero(norms > _tolerance(strategy, losses)):
            candidates[j] = _polish(problem, candidates[j], strategy)
        losses, gradients, hessians = problem.evaluate_many(candidates)
        norms = np.linalg.norm(gradients, axis=1)

    eigenvalues = np.linalg.eigvalsh(hessians)
    valid = (norms <= _tolerance(strategy, losses)) & (eigenvalues[:, 0] > 0)

    radius = strategy.dedup_fraction * problem.scale
    minima: List[LocalMinimum] = []
    for j in np.argsort(losses, kind="stable"):
        if not valid[j]:
            continue
        if any(np.linalg.norm(candidates[j] - kept.y) <= radius for kept in minima):
            continue
        minima.append(LocalMinimum(candidates[j].copy(), float(losses[j]), float(norms[j]), eigenvalues[j].copy()))
    return minima, candidates, losses, norms


def solve_loo_map(problem: LooProblem, strategy: Optional[SolverStrategy] = None,
                  extra_starts: Optional[np.ndarray] = None) -> LooSolution:
    """
    Evaluate the LOO-map: the lowest of all located local minima.

    Args:
        problem: LOO problem
        strategy: Multi-start settings (defaults to SolverStrategy())
        extra_starts: Additional k×2 starting positions

    Returns:
        LooSolution

    Raises:
        LooSolveError: If no start converged; carries the lowest-loss iterate
    """
    strategy = strategy or SolverStrategy()
    starts = start_points(problem, strategy, extra_starts)
    minima, candidates, losses, norms = _search(problem, starts, strategy)
    if not minima:
        if candidates.shape[0] == 0:
            raise LooSolveError(f"none of {starts.shape[0]} starts converged")
        j = int(np.argmin(losses))
        raise LooSolveError(f"none of {starts.shape[0]} starts converged (best gradient norm {norms[j]:.3g})",
                            candidates[j].copy(), float(norms[j]))
    best = minima[0]
    logger.debug("LOO-map: %d distinct minima from %d starts, best loss %.8f", len(minima), starts.shape[0], best.loss)
    return LooSolution(best.y.copy(), best.loss, minima, starts.shape[0])
