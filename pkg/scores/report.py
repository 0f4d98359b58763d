"""
ScoreReport: per-point diagnostic values with provenance.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from data.csv_io import write_table

logger = logging.getLogger(__name__)

KINDS = ("perturbation", "singularity")


@dataclass
class ScoreReport:
    """
    Per-point scores.

    ``values`` is NaN where a point was masked by pre-screening or failed;
    singularity scores are +inf (and flagged) where the Hessian is not
    positive definite. ``errors`` maps point index to a failure message.
    """

    values: np.ndarray
    kind: str
    config: Dict[str, Any] = field(default_factory=dict)
    masked: Optional[np.ndarray] = None
    flags: Optional[np.ndarray] = None
    errors: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        n = self.values.shape[0]
        self.masked = np.zeros(n, dtype=bool) if self.masked is None else np.asarray(self.masked, dtype=bool)
        self.flags = np.zeros(n, dtype=bool) if self.flags is None else np.asarray(self.flags, dtype=bool)
        if self.masked.shape != (n,) or self.flags.shape != (n,):
            raise ValueError("masked and flags must have one entry per point")
        finite = np.isfinite(self.values)
        if np.any(self.values[finite] < 0):
            raise ValueError("scores must be nonnegative")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def computed(self) -> np.ndarray:
        """Points that were scored (not masked, no error)."""
        failed = np.zeros(self.n, dtype=bool)
        failed[list(self.errors)] = True
        return ~self.masked & ~failed

    @property
    def finite(self) -> np.ndarray:
        return self.computed & np.isfinite(self.values)

    @property
    def infinite_count(self) -> int:
        return int(np.sum(self.computed & np.isposinf(self.values)))

    def top_fraction_indices(self, fraction: float = 0.1) -> np.ndarray:
        """Indices of the top ``fraction`` of finite scores (at least one)."""
        if not 0 < fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")
        candidates = np.flatnonzero(self.finite)
        if candidates.size == 0:
            return candidates
        count = max(1, int(math.ceil(fraction * candidates.size)))
        order = np.argsort(-self.values[candidates], kind="stable")
        return np.sort(candidates[order[:count]])

    def top_fraction_mean(self, fraction: float = 0.05) -> Tuple[float, int]:
        """
        Mean of the top ``fraction`` of finite scores.

        Returns:
            (mean, number of infinite scores, counted separately)
        """
        top = self.top_fraction_indices(fraction)
        mean = float(self.values[top].mean()) if top.size else float("nan")
        return mean, self.infinite_count

    def rows(self):
        for i in range(self.n):
            yield i, float(self.values[i]), bool(self.flags[i]), bool(self.masked[i])

    def save_csv(self, path: Union[str, Path]) -> Path:
        """Write (index, score, flag, masked) rows."""
        return write_table(path, ("index", "score", "flag", "masked"), self.rows())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "config": self.config,
            "scores": [json_number(v) for v in self.values],
            "flags": self.flags.tolist(),
            "masked": self.masked.tolist(),
            "errors": {str(k): v for k, v in sorted(self.errors.items())},
        }

    def save_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as handle:
            json.dump(self.to_dict(), handle, indent=2)
        return path


def json_number(value: float) -> Union[float, str, None]:
    if np.isnan(value):
        return None
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


def dichotomize(report: ScoreReport, quantile: float = 0.95) -> np.ndarray:
    """
    Mark points at or above the ``quantile`` of finite scores.

    Infinite scores are always marked; masked and failed points never are.
    """
    marked = report.computed & np.isposinf(report.values)
    finite = report.finite
    if np.any(finite):
        threshold = np.quantile(report.values[finite], quantile)
        marked |= finite & (report.values >= threshold)
    return marked


def top_fraction_jaccard(first: ScoreReport, second: ScoreReport, fraction: float = 0.1) -> float:
    """Jaccard index of the top-``fraction`` point sets of two reports."""
    a = set(first.top_fraction_indices(fraction).tolist())
    b = set(second.top_fraction_indices(fraction).tolist())
    union = a | b
    return len(a & b) / len(union) if union else 1.0
