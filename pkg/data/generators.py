"""
Synthetic dataset generators: Gaussian mixtures and the Swiss roll.

Randomness comes from numpy's PCG64 bit generator. A seed is expanded with
``SeedSequence`` and split into independent child streams (one for component
labels, one per mixture component; one for angles and one for heights on the
Swiss roll), so each stream is reproducible across platforms and unaffected by
how many points the other streams draw.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from core.errors import SpecValidationError

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-9
PSD_TOLERANCE = 1e-10


@dataclass
class InputMatrix:
    """
    Row-major feature matrix with optional integer labels.

    ``coordinate`` holds a continuous per-row label when one exists (the Swiss
    roll angle t); ``labels`` then holds its quantized version.
    """

    values: np.ndarray
    labels: Optional[np.ndarray] = None
    coordinate: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise SpecValidationError(f"expected a non-empty 2-D matrix, got shape {values.shape}", "values")
        if not np.all(np.isfinite(values)):
            raise SpecValidationError("all values must be finite", "values")
        self.values = values
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (values.shape[0],):
                raise SpecValidationError(f"expected {values.shape[0]} labels, got {labels.shape}", "labels")
            self.labels = labels.astype(np.int64)
        if self.coordinate is not None:
            coordinate = np.asarray(self.coordinate, dtype=np.float64)
            if coordinate.shape != (values.shape[0],):
                raise SpecValidationError("coordinate must have one entry per row", "coordinate")
            self.coordinate = coordinate

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "InputMatrix":
        """Same labels, new feature values (e.g. after PCA)."""
        return InputMatrix(values, self.labels, self.coordinate)

    def append_row(self, row: np.ndarray, label: Optional[int] = None) -> "InputMatrix":
        row = np.asarray(row, dtype=np.float64).reshape(1, -1)
        labels = None
        if self.labels is not None:
            labels = np.append(self.labels, -1 if label is None else label)
        return InputMatrix(np.vstack([self.values, row]), labels)

    def delete_row(self, index: int) -> "InputMatrix":
        keep = np.arange(self.n) != index
        labels = self.labels[keep] if self.labels is not None else None
        coordinate = self.coordinate[keep] if self.coordinate is not None else None
        return InputMatrix(self.values[keep], labels, coordinate)


@dataclass
class GmmComponent:
    mean: np.ndarray
    cov: np.ndarray
    weight: float


@dataclass
class GmmSpec:
    """k-component Gaussian mixture; validated on construction."""

    components: List[GmmComponent] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return len(self.components[0].mean)

    @property
    def weights(self) -> np.ndarray:
        return np.array([component.weight for component in self.components], dtype=np.float64)

    def validate(self) -> None:
        """
        Check mixture weights and covariances.

        Raises:
            SpecValidationError: On a weight or covariance violation, naming
                the offending component.
        """
        if not self.components:
            raise SpecValidationError("at least one component is required", "components")

        dim = None
        for j, component in enumerate(self.components):
            mean = np.atleast_1d(np.asarray(component.mean, dtype=np.float64))
            cov = np.atleast_2d(np.asarray(component.cov, dtype=np.float64))
            if dim is None:
                dim = mean.shape[0]
            if mean.shape != (dim,):
                raise SpecValidationError(f"mean has dimension {mean.shape[0]}, expected {dim}", f"components[{j}].mean")
            if cov.shape != (dim, dim):
                raise SpecValidationError(f"covariance has shape {cov.shape}, expected {(dim, dim)}", f"components[{j}].cov")
            if not np.allclose(cov, cov.T, rtol=0.0, atol=PSD_TOLERANCE * max(1.0, np.abs(cov).max())):
                raise SpecValidationError("covariance is not symmetric", f"components[{j}].cov")
            eigenvalues = np.linalg.eigvalsh(cov)
            scale = max(1.0, float(np.abs(eigenvalues).max()))
            if eigenvalues.min() < -PSD_TOLERANCE * scale:
                raise SpecValidationError(
                    f"covariance is not positive semidefinite (smallest eigenvalue {eigenvalues.min():.3g})",
                    f"components[{j}].cov",
                )
            if not component.weight > 0:
                raise SpecValidationError("mixture weight must be positive", f"components[{j}].weight")
            component.mean = mean
            component.cov = 0.5 * (cov + cov.T)
            component.weight = float(component.weight)

        total = self.weights.sum()
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise SpecValidationError(f"mixture weights sum to {total:.12g}, expected 1", "components")


@dataclass
class SwissRollSpec:
    """
    Swiss roll parameters: angle range [a, b], height range [c, d].

    Degenerate ranges (a == b or c == d) and single-point rolls are accepted so
    fixed-parameter rolls can be generated; they are logged.
    """

    n: int
    angle_range: Sequence[float] = (1.5 * np.pi, 4.5 * np.pi)
    height_range: Sequence[float] = (0.0, 20.0)
    seed: int = 0
    angle_bins: int = 10

    def __post_init__(self):
        a, b = (float(v) for v in self.angle_range)
        c, d = (float(v) for v in self.height_range)
        if self.n < 1:
            raise SpecValidationError("at least one point is required", "n")
        if b < a:
            raise SpecValidationError(f"angle range [{a}, {b}] is reversed", "angle_range")
        if d < c:
            raise SpecValidationError(f"height range [{c}, {d}] is reversed", "height_range")
        if self.angle_bins < 1:
            raise SpecValidationError("angle_bins must be positive", "angle_bins")
        if b == a or d == c or self.n < 2:
            logger.warning("Degenerate Swiss roll spec: angle [%s, %s], height [%s, %s], n=%d", a, b, c, d, self.n)
        self.angle_range = (a, b)
        self.height_range = (c, d)


def sample_gmm(spec: GmmSpec, n: int, seed: int) -> InputMatrix:
    """
    Draw n points from a Gaussian mixture.

    Args:
        spec: Validated mixture spec
        n: Number of rows
        seed: Root seed; child stream 0 draws labels, child j+1 draws component j

    Returns:
        InputMatrix whose labels are the component indices
    """
    if n < 1:
        raise SpecValidationError("n must be positive", "n")

    streams = np.random.SeedSequence(seed).spawn(spec.k + 1)
    label_rng = np.random.Generator(np.random.PCG64(streams[0]))
    labels = label_rng.choice(spec.k, size=n, p=spec.weights)

    values = np.empty((n, spec.dim), dtype=np.float64)
    for j, component in enumerate(spec.components):
        rows = np.flatnonzero(labels == j)
        if rows.size == 0:
            continue
        rng = np.random.Generator(np.random.PCG64(streams[j + 1]))
        values[rows] = rng.multivariate_normal(component.mean, component.cov, size=rows.size, method="eigh")

    logger.debug("Sampled %d points from a %d-component mixture (seed %d)", n, spec.k, seed)
    return InputMatrix(values, labels)


def sample_swiss_roll(spec: SwissRollSpec) -> InputMatrix:
    """
    Sample (t cos t, t sin t, z) with t ~ U[a, b] and z ~ U[c, d].

    The angle t is kept as the continuous ``coordinate``; ``labels`` are the
    angle quantized into ``spec.angle_bins`` equal-width bins.
    """
    a, b = spec.angle_range
    c, d = spec.height_range
    angle_stream, height_stream = np.random.SeedSequence(spec.seed).spawn(2)
    t = np.random.Generator(np.random.PCG64(angle_stream)).uniform(a, b, size=spec.n)
    z = np.random.Generator(np.random.PCG64(height_stream)).uniform(c, d, size=spec.n)

    values = np.column_stack([t * np.cos(t), t * np.sin(t), z])
    if b > a:
        edges = np.linspace(a, b, spec.angle_bins + 1)[1:-1]
        labels = np.digitize(t, edges)
    else:
        labels = np.zeros(spec.n, dtype=np.int64)
    return InputMatrix(values, labels, coordinate=t)


def _circle_means(k: int, radius: float) -> List[np.ndarray]:
    angles = 2.0 * np.pi * np.arange(k) / k
    return [np.array([radius * np.cos(angle), radius * np.sin(angle)]) for angle in angles]


def two_gmm_spec(half_separation: float = 2.0, variance: float = 1.0, dim: int = 2) -> GmmSpec:
    """Balanced two-component mixture with means at ±half_separation on the first axis."""
    components = []
    for sign in (1.0, -1.0):
        mean = np.zeros(dim)
        mean[0] = sign * half_separation
        components.append(GmmComponent(mean, variance * np.eye(dim), 0.5))
    return GmmSpec(components)


def five_gmm_spec() -> GmmSpec:
    """Five overlapping components with unequal weights."""
    weights = [0.3, 0.25, 0.2, 0.15, 0.1]
    return GmmSpec([GmmComponent(mean, 1.2 * np.eye(2), w) for mean, w in zip(_circle_means(5, 4.0), weights)])


def eight_gmm_spec() -> GmmSpec:
    """Eight equally weighted components on a circle."""
    return GmmSpec([GmmComponent(mean, np.eye(2), 1.0 / 8) for mean in _circle_means(8, 8.0)])


def high_dim_gmm_spec(dim: int = 50, k: int = 4, spread: float = 3.0, seed: int = 0) -> GmmSpec:
    """k equally weighted isotropic components with random means in ``dim`` dimensions."""
    rng = np.random.Generator(np.random.PCG64(seed))
    means = rng.normal(scale=spread, size=(k, dim))
    return GmmSpec([GmmComponent(mean, np.eye(dim), 1.0 / k) for mean in means])


PRESETS = {
    "gmm2": lambda: two_gmm_spec(),
    "gmm2-separated": lambda: two_gmm_spec(half_separation=6.0),
    "gmm5": five_gmm_spec,
    "gmm8": eight_gmm_spec,
    "gmm50d": high_dim_gmm_spec,
}
