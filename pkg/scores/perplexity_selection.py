"""
Perplexity selection from the fracture-inducing (FI) curve: the mean of the
top 5% singularity scores as a function of perplexity. The recommended
perplexity is the elbow of that curve.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from core.affinity import AffinityContext
from core.cache import ResultCache, make_key
from core.errors import NescopeError, NumericalError, SpecValidationError
from core.tsne import Embedding, TsneConfig, embed_context
from data.csv_io import write_table
from data.generators import InputMatrix
from scores.report import ScoreReport
from scores.singularity import singularity_scores

logger = logging.getLogger(__name__)

TOP_FRACTION = 0.05
ELBOW_RULES = ("log", "linear")


def elbow_index(curve: Sequence[float], rule: str = "log") -> int:
    """
    Index of the elbow of a decreasing curve.

    The elbow is the middle point of the backward second difference
    c_k - 2 c_{k-1} + c_{k-2} with the largest value, computed on log(curve)
    for the "log" rule.

    Raises:
        SpecValidationError: With fewer than 3 values or an unknown rule
        NumericalError: If a curve value is NaN or infinite
    """
    values = np.asarray(curve, dtype=np.float64)
    if values.size < 3:
        raise SpecValidationError("an elbow needs at least 3 curve values", "curve")
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"curve has non-finite values at {np.flatnonzero(~np.isfinite(values)).tolist()}")
    if rule not in ELBOW_RULES:
        raise SpecValidationError(f"rule must be one of {ELBOW_RULES}", "rule")
    if rule == "log":
        if np.any(values <= 0):
            raise SpecValidationError("log-scale elbow needs a positive curve", "curve")
        values = np.log(values)
    second = values[2:] - 2.0 * values[1:-1] + values[:-2]
    return int(np.argmax(second)) + 1


@dataclass
class FiCurve:
    """Top-fraction singularity means per candidate perplexity."""

    perplexities: np.ndarray
    top_means: np.ndarray
    infinite_counts: np.ndarray
    chosen_index: int
    skipped: List[float] = field(default_factory=list)
    embeddings: Dict[float, Embedding] = field(default_factory=dict)
    reports: Dict[float, ScoreReport] = field(default_factory=dict)

    @property
    def chosen(self) -> float:
        return float(self.perplexities[self.chosen_index])

    def rows(self):
        for k, (perplexity, mean) in enumerate(zip(self.perplexities, self.top_means)):
            yield float(perplexity), float(mean), int(self.infinite_counts[k]), k == self.chosen_index

    def save_csv(self, path):
        return write_table(path, ("perplexity", "top5_mean", "infinite", "chosen"), self.rows())


def embed_at(matrix: InputMatrix, config: TsneConfig, perplexity: float, threads: int = 1,
             cache: Optional[ResultCache] = None) -> Embedding:
    """Embed ``matrix`` at one perplexity, reusing a cached result when available."""
    settings = config.to_dict()
    settings["perplexity"] = float(perplexity)
    run_config = TsneConfig(**settings)

    def compute() -> Embedding:
        context = AffinityContext.build(matrix, perplexity, run_config.pca_dim, run_config.entropy_tol, threads)
        return embed_context(context, run_config, threads=threads)

    if cache is None:
        return compute()
    return cache.get_or_compute(make_key("embedding", matrix.values, run_config.to_dict()), compute)


def select_perplexity(matrix: InputMatrix, candidates: Sequence[float], config: TsneConfig,
                      fraction: float = TOP_FRACTION, rule: str = "log", threads: int = 1,
                      cache: Optional[ResultCache] = None, progress: bool = False) -> FiCurve:
    """
    Embed at each candidate perplexity and pick the elbow of the FI curve.

    Candidates whose embedding fails are skipped with a warning.

    Args:
        matrix: Raw input
        candidates: At least 3 ascending perplexities
        config: Base t-SNE settings
        fraction: Top fraction of finite singularity scores to average
        rule: Elbow rule ("log" or "linear")
        threads: Candidates run in parallel on this many threads
        cache: Optional memo for candidate embeddings
        progress: Show a progress bar

    Returns:
        FiCurve over the successful candidates

    Raises:
        NumericalError: If fewer than 3 candidates succeed
    """
    candidates = [float(p) for p in candidates]
    if len(candidates) < 3:
        raise SpecValidationError("at least 3 candidate perplexities are required", "candidates")
    if any(b <= a for a, b in zip(candidates, candidates[1:])):
        raise SpecValidationError("candidate perplexities must be strictly ascending", "candidates")

    def evaluate(perplexity: float):
        try:
            embedding = embed_at(matrix, config, perplexity, 1, cache)
            report = singularity_scores(embedding.Y, embedding.similarity, "tsne")
            return perplexity, embedding, report, None
        except NescopeError as exc:
            return perplexity, None, None, exc

    results = []
    with tqdm(total=len(candidates), desc="Perplexity candidates", disable=not progress) as bar:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for result in pool.map(evaluate, candidates):
                    results.append(result)
                    bar.update(1)
        else:
            for perplexity in candidates:
                results.append(evaluate(perplexity))
                bar.update(1)

    kept, means, infinite, skipped = [], [], [], []
    embeddings, reports = {}, {}
    for perplexity, embedding, report, error in results:
        if error is not None:
            logger.warning("Skipping perplexity %.4g: %s", perplexity, error)
            skipped.append(perplexity)
            continue
        mean, infinite_count = report.top_fraction_mean(fraction)
        if not np.isfinite(mean):
            logger.warning("Skipping perplexity %.4g: no finite singularity scores", perplexity)
            skipped.append(perplexity)
            continue
        kept.append(perplexity)
        means.append(mean)
        infinite.append(infinite_count)
        embeddings[perplexity] = embedding
        reports[perplexity] = report
        logger.info("Perplexity %.4g: top-%g%% singularity mean %.6g (%d infinite)",
                    perplexity, 100 * fraction, mean, infinite_count)

    if len(kept) < 3:
        raise NumericalError(f"only {len(kept)} candidate perplexities succeeded; at least 3 are required")

    chosen = elbow_index(means, rule)
    curve = FiCurve(np.array(kept), np.array(means), np.array(infinite), chosen, skipped, embeddings, reports)
    logger.info("Elbow perplexity: %.4g", curve.chosen)
    return curve
