"""
MetricReport: scalar metrics and per-point vectors for one embedding.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from core.errors import NescopeError
from data.csv_io import write_table
from metrics.clustering import db_index, wcdr, wilks_lambda
from metrics.entropy import entropy_difference
from metrics.neighborhood import neighborhood_preservation
from scores.report import json_number

logger = logging.getLogger(__name__)


@dataclass
class MetricReport:
    """
    Named scalars (e.g. ``db_index``) and length-n vectors (e.g.
    ``entropy_difference``), plus the parameters they were computed with.
    """

    n: int
    scalars: Dict[str, float] = field(default_factory=dict)
    vectors: Dict[str, np.ndarray] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    notes: Dict[str, str] = field(default_factory=dict)

    def add_vector(self, name: str, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.n,):
            raise ValueError(f"vector {name!r} must have length {self.n}")
        self.vectors[name] = values

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "parameters": self.parameters,
            "scalars": {name: json_number(value) for name, value in self.scalars.items()},
            "vectors": {name: [json_number(v) for v in values] for name, values in self.vectors.items()},
            "notes": self.notes,
        }

    def save_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as handle:
            json.dump(self.to_dict(), handle, indent=2)
        return path

    def save_csv(self, path: Union[str, Path]) -> Path:
        """Per-point vectors, one column each, with a leading index column."""
        names = sorted(self.vectors)
        rows = ((i, *(float(self.vectors[name][i]) for name in names)) for i in range(self.n))
        return write_table(path, ("index", *names), rows)


def compute_metrics(X: np.ndarray, Y: np.ndarray, labels: Optional[np.ndarray] = None,
                    k: Optional[int] = None) -> MetricReport:
    """
    Evaluate an embedding.

    Neighborhood preservation is always computed; the label-based metrics
    need ``labels``. A label-based metric that fails numerically is recorded
    as NaN with a note instead of aborting the report.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    report = MetricReport(n=X.shape[0])

    preservation = neighborhood_preservation(X, Y, k)
    report.add_vector("neighborhood_preservation", preservation.scores)
    report.scalars["neighborhood_preservation_median"] = preservation.median
    report.parameters["k"] = preservation.k
    if preservation.zero_variance.any():
        report.notes["neighborhood_preservation"] = (
            f"{int(preservation.zero_variance.sum())} zero-variance points scored 0")

    if labels is None:
        return report

    labels = np.asarray(labels)
    report.parameters["classes"] = int(np.unique(labels).size)
    for name, metric in (("db_index", db_index), ("wcdr", wcdr), ("wilks_lambda", wilks_lambda)):
        try:
            report.scalars[name] = metric(Y, labels)
        except (NescopeError, ValueError) as exc:
            logger.warning("%s unavailable: %s", name, exc)
            report.scalars[name] = float("nan")
            report.notes[name] = str(exc)

    try:
        difference = entropy_difference(X, Y, labels)
        report.add_vector("entropy_difference", difference.values)
        report.scalars["entropy_difference_mean"] = float(difference.values.mean())
        if difference.regularized_classes:
            report.notes["entropy_difference"] = (
                f"regularized covariance for classes {difference.regularized_classes}")
    except (NescopeError, ValueError) as exc:
        logger.warning("entropy difference unavailable: %s", exc)
        report.notes["entropy_difference"] = str(exc)

    return report
