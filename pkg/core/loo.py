"""
Leave-one-out loss for a single free embedding point.

With every other embedding point frozen, the t-SNE terms that involve the
free point y are

    L(y) = Σ_i 2 u_i log(1 + |y - y_i|²) + log(Z_frozen + 2 Σ_i w(y_i, y))

where u is the similarity column of the varied input and Z_frozen the kernel
sum over the frozen pairs. The add-one problem appends a new input; the
partial (modify-one) problem replaces row i and frees only y_i.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.affinity import AffinityContext, SimilarityMatrix
from core.errors import SpecValidationError
from core.tsne import kernel_matrix

logger = logging.getLogger(__name__)

# Batched evaluations are chunked so that (points × frozen) stays bounded.
CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True, eq=False)
class LooProblem:
    """
    Frozen embedding plus the similarity column of the varied point.

    ``index`` is set for partial problems and names the freed row of the
    original embedding; ``y_reference`` is that row's original position.
    """

    Y: np.ndarray
    u: np.ndarray
    z_frozen: float
    index: Optional[int] = None
    y_reference: Optional[np.ndarray] = None

    def __post_init__(self):
        Y = np.array(self.Y, dtype=np.float64)
        u = np.array(self.u, dtype=np.float64).reshape(-1)
        if Y.ndim != 2 or Y.shape[1] != 2 or Y.shape[0] != u.shape[0]:
            raise SpecValidationError(f"frozen embedding {Y.shape} does not match column length {u.shape[0]}", "Y")
        if not np.all(np.isfinite(Y)):
            raise SpecValidationError("frozen embedding must be finite", "Y")
        if np.any(u < 0) or not np.any(u > 0):
            raise SpecValidationError("similarity column must be nonnegative with a positive entry", "u")
        if not self.z_frozen >= 0:
            raise SpecValidationError("frozen kernel sum must be nonnegative", "z_frozen")
        Y.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "u", u)

    @property
    def m(self) -> int:
        return self.Y.shape[0]

    @property
    def is_partial(self) -> bool:
        return self.index is not None

    def bounds(self, inflate: float = 0.0) -> np.ndarray:
        """Bounding box [[x_lo, x_hi], [y_lo, y_hi]] of the frozen points, inflated by a fraction of its size."""
        lo, hi = self.Y.min(axis=0), self.Y.max(axis=0)
        pad = inflate * (hi - lo)
        return np.column_stack([lo - pad, hi + pad])

    @property
    def scale(self) -> float:
        """Bounding-box diagonal of the frozen embedding."""
        extent = np.ptp(self.Y, axis=0)
        diagonal = float(np.hypot(*extent))
        return diagonal if diagonal > 0 else 1.0

    def _chunks(self, points: np.ndarray):
        size = max(1, CHUNK_ELEMENTS // max(1, self.m))
        for start in range(0, points.shape[0], size):
            yield slice(start, start + size)

    def _terms(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        diff = points[:, None, :] - self.Y[None, :, :]
        w = 1.0 / (1.0 + np.einsum("kmj,kmj->km", diff, diff))
        z_total = self.z_frozen + 2.0 * w.sum(axis=1)
        return diff, w, z_total

    def loss_many(self, points: np.ndarray) -> np.ndarray:
        """Loss at each row of a k×2 array."""
        points = _check_points(points)
        out = np.empty(points.shape[0])
        for part in self._chunks(points):
            _, w, z_total = self._terms(points[part])
            out[part] = -2.0 * (np.log(w) @ self.u) + np.log(z_total)
        return out

    def gradient_many(self, points: np.ndarray) -> np.ndarray:
        """Gradient 4 Σ_i (u_i w_i - w_i² / Z) (y - y_i) at each row."""
        points = _check_points(points)
        out = np.empty_like(points)
        for part in self._chunks(points):
            diff, w, z_total = self._terms(points[part])
            coefficients = self.u[None, :] * w - w * w / z_total[:, None]
            out[part] = 4.0 * np.einsum("km,kmj->kj", coefficients, diff)
        return out

    def evaluate_many(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Loss, gradient and 2×2 Hessian at each row of a k×2 array."""
        points = _check_points(points)
        k = points.shape[0]
        losses, gradients, hessians = np.empty(k), np.empty((k, 2)), np.empty((k, 2, 2))
        for part in self._chunks(points):
            diff, w, z_total = self._terms(points[part])
            z = z_total[:, None]
            w2 = w * w
            losses[part] = -2.0 * (np.log(w) @ self.u) + np.log(z_total)
            gradients[part] = 4.0 * np.einsum("km,kmj->kj", self.u * w - w2 / z, diff)

            isotropic = np.sum(4.0 * self.u * w - 4.0 * w2 / z, axis=1)
            outer_weight = -8.0 * self.u * w2 + 16.0 * w2 * w / z
            G = np.einsum("km,kmj->kj", w2, diff)
            H = np.einsum("km,kmi,kmj->kij", outer_weight, diff, diff)
            H -= 16.0 * G[:, :, None] * G[:, None, :] / (z_total ** 2)[:, None, None]
            H[:, 0, 0] += isotropic
            H[:, 1, 1] += isotropic
            hessians[part] = 0.5 * (H + np.swapaxes(H, 1, 2))
        return losses, gradients, hessians

    def loss(self, y: np.ndarray) -> float:
        return float(self.loss_many(np.reshape(y, (1, 2)))[0])

    def gradient(self, y: np.ndarray) -> np.ndarray:
        return self.gradient_many(np.reshape(y, (1, 2)))[0]

    def hessian(self, y: np.ndarray) -> np.ndarray:
        return self.evaluate_many(np.reshape(y, (1, 2)))[2][0]


def _check_points(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != 2:
        raise SpecValidationError(f"expected k×2 points, got {points.shape}", "y")
    if not np.all(np.isfinite(points)):
        raise ValueError("y contains NaN or infinite entries")
    return points


def loo_loss(problem: LooProblem, y: np.ndarray) -> float:
    """LOO loss L(y) of a single candidate position."""
    return problem.loss(y)


def loo_gradient(problem: LooProblem, y: np.ndarray) -> np.ndarray:
    """Gradient of L at y; its negation is F_a + F_r."""
    return problem.gradient(y)


def attraction_repulsion(problem: LooProblem, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split the negative gradient into attraction and repulsion.

    Returns:
        (F_a, F_r) with F_a = 4 Σ u_i w_i (y_i - y) and
        F_r = -(4/Z) Σ w_i² (y_i - y)
    """
    y = _check_points(y)
    diff, w, z_total = problem._terms(y)
    towards = -diff[0]
    attraction = 4.0 * (problem.u * w[0]) @ towards
    repulsion = -4.0 / z_total[0] * (w[0] ** 2) @ towards
    return attraction, repulsion


def problem_from_column(Y: np.ndarray, u: np.ndarray) -> LooProblem:
    """Add-one problem for an explicit similarity column against a frozen embedding."""
    Y = np.asarray(Y, dtype=np.float64)
    return LooProblem(Y, u, float(kernel_matrix(Y).sum()))


def partial_problem_from_column(Y: np.ndarray, u: np.ndarray, index: int) -> LooProblem:
    """
    Partial problem freeing row ``index`` of Y, with the varied column ``u``.

    ``u`` has length n; its entry at ``index`` is ignored.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n = Y.shape[0]
    if not 0 <= index < n:
        raise IndexError(f"point index {index} out of range for n={n}")
    W = kernel_matrix(Y)
    others = np.arange(n) != index
    z_frozen = float(W.sum() - 2.0 * W[index].sum())
    return LooProblem(Y[others], np.asarray(u, dtype=np.float64)[others], z_frozen, index, Y[index].copy())


def tsne_point_problem(Y: np.ndarray, V: SimilarityMatrix, index: int) -> LooProblem:
    """Partial problem whose loss equals the total loss as a function of y_index."""
    values = V.values if isinstance(V, SimilarityMatrix) else np.asarray(V, dtype=np.float64)
    return partial_problem_from_column(Y, values[:, index], index)


def make_loo_problem(context: AffinityContext, Y: np.ndarray, x_new: np.ndarray,
                     approximation: str = "exact") -> LooProblem:
    """
    Add-one LOO problem for a new raw input point.

    Args:
        context: Affinity machinery of the original data
        Y: Embedding of the original data
        x_new: New raw input point (dimension d)
        approximation: "exact" recalibrates the augmented data; "approx1"
            reuses the PCA projection; "approx2" also reuses the bandwidths

    Returns:
        LooProblem over all n frozen points
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (context.n, 2):
        raise SpecValidationError(f"embedding shape {Y.shape} does not match n={context.n}", "Y")
    u = context.added_point_column(x_new, approximation)
    return problem_from_column(Y, u)


def partial_loo_problem(context: AffinityContext, Y: np.ndarray, index: int, x_replacement: np.ndarray,
                        approximation: str = "exact") -> LooProblem:
    """
    Modify-one LOO problem: replace raw row ``index`` and free y_index.

    Raises:
        IndexError: If ``index`` is outside [0, n)
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (context.n, 2):
        raise SpecValidationError(f"embedding shape {Y.shape} does not match n={context.n}", "Y")
    if not 0 <= index < context.n:
        raise IndexError(f"point index {index} out of range for n={context.n}")
    u = context.replaced_point_column(index, x_replacement, approximation)
    return partial_problem_from_column(Y, u, index)
