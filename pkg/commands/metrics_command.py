"""
`metrics`: evaluate an embedding; with a score file, also test the scores
against entropy differences, distances to cluster centers and one class.
"""

import logging
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from commands.base_command import BaseCommand
from core.errors import DataFormatError
from data.csv_io import read_table
from metrics.report import MetricReport, compute_metrics
from metrics.statistics import cluster_center_spearman, majority_significant, roc_auc, spearman_test
from utils.constants import METRICS_CSV, METRICS_JSON

logger = logging.getLogger(__name__)


def load_scores(path: str, n: int) -> np.ndarray:
    """
    Score column of a ScoreReport CSV, ordered by its index column.

    Raises:
        DataFormatError: On a missing column, a wrong row count, or a bad
            index or score (rows are 1-based file lines, the header is line 1)
    """
    try:
        frame = read_table(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise DataFormatError(f"unreadable score table ({exc})", path)
    absent = {"index", "score"} - set(frame.columns)
    if absent:
        raise DataFormatError(f"missing column(s) {', '.join(sorted(absent))}", path)
    if len(frame) != n:
        raise DataFormatError(f"expected {n} score rows, found {len(frame)}", path)

    index = pd.to_numeric(frame["index"], errors="coerce").to_numpy(dtype=np.float64)
    bad_index = ~np.isfinite(index) | (index != np.round(index)) | (index < 0) | (index >= n)
    if bad_index.any():
        i = int(np.flatnonzero(bad_index)[0])
        raise DataFormatError(f"index {frame['index'].iat[i]!r} is not a point index below {n}", path, i + 2)
    index = index.astype(np.int64)
    duplicated = pd.Series(index).duplicated().to_numpy()
    if duplicated.any():
        i = int(np.flatnonzero(duplicated)[0])
        raise DataFormatError(f"index {index[i]} appears twice", path, i + 2)

    scores = pd.to_numeric(frame["score"], errors="coerce")
    unparsed = scores.isna() & frame["score"].notna()
    if unparsed.any():
        i = int(np.flatnonzero(unparsed.to_numpy())[0])
        raise DataFormatError(f"non-numeric score {frame['score'].iat[i]!r}", path, i + 2)

    return scores.set_axis(index).reindex(range(n)).to_numpy(dtype=np.float64)


def minority_label(labels: np.ndarray) -> int:
    """Least frequent label; ties go to the smallest label."""
    values, counts = np.unique(labels, return_counts=True)
    return int(values[np.argmin(counts)])


class MetricsCommand(BaseCommand):
    name = "metrics"
    help = "neighborhood preservation, clustering indices and entropy differences"

    @classmethod
    def add_arguments(cls, parser) -> None:
        parser.add_argument("--embedding", help="evaluate this n×2 embedding CSV instead of running t-SNE")
        parser.add_argument("--k", type=int, help="neighborhood size (default: n/5)")
        parser.add_argument("--scores", help="score CSV written by `score`, tested against the metrics")
        parser.add_argument("--positive-label", type=int,
                            help="label whose points the scores should rank highest (default: the minority class)")

    def run(self, args) -> Dict[str, Any]:
        matrix = self.matrix()
        _, Y = self.embedding_for(args)
        k = self.option(args, "k", "metrics.k")
        report = compute_metrics(matrix.values, Y, matrix.labels, k)
        report.parameters["perplexity"] = self.config.tsne.perplexity

        if args.scores:
            scores = load_scores(args.scores, matrix.n)
            self._score_tests(report, scores, Y, matrix.labels)
            if matrix.labels is not None:
                self._score_auroc(report, scores, matrix.labels, args.positive_label)

        self.record(report.save_json(self.output_path(METRICS_JSON)))
        self.record(report.save_csv(self.output_path(METRICS_CSV)))
        return {name: value for name, value in report.scalars.items()}

    def _score_auroc(self, report: MetricReport, scores: np.ndarray, labels: np.ndarray,
                     positive: Optional[int]) -> None:
        if positive is None:
            positive = minority_label(labels)
        report.parameters["auroc_positive_label"] = positive
        # Infinite scores rank first; unscored points are left out
        scored = ~np.isnan(scores)
        try:
            report.scalars["score_auroc"] = roc_auc(scores[scored], labels[scored] == positive)
        except ValueError as exc:
            report.notes["score_auroc"] = str(exc)
            logger.warning("AUROC not computed: %s", exc)

    def _score_tests(self, report, scores: np.ndarray, Y: np.ndarray, labels) -> None:
        report.add_vector("score", scores)
        finite = np.isfinite(scores)

        if "entropy_difference" in report.vectors:
            try:
                result = spearman_test(scores[finite], report.vectors["entropy_difference"][finite])
                report.scalars["score_entropy_rho"] = result.rho
                report.scalars["score_entropy_p"] = result.p_value
            except ValueError as exc:
                report.notes["score_entropy"] = str(exc)

        if labels is not None:
            tests = cluster_center_spearman(Y, labels, scores)
            for test in tests:
                report.scalars[f"center_rho_{test.label}"] = test.result.rho
                report.scalars[f"center_p_{test.label}"] = test.result.p_value
            report.scalars["center_majority_significant"] = float(majority_significant(tests))
