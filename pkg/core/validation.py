"""
Empirical check of the leave-one-out assumption.

Each trial embeds X, then adds (or deletes) one point and re-optimizes from
the previous embedding without early exaggeration. The relative Frobenius
change of the shared rows, ε_n = ‖Y - Ỹ‖_F / ‖Y‖_F, measures how much the
other points moved.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from sklearn.neighbors import NearestNeighbors
from tqdm import tqdm

from core.cache import ResultCache, make_key
from core.errors import SpecValidationError
from core.tsne import Embedding, TsneConfig, run_tsne
from data.generators import InputMatrix
from data.spec_files import GeneratorSource

logger = logging.getLogger(__name__)

MODES = ("add", "delete")
DEFAULT_RERUN_ITERATIONS = 250


@dataclass
class LooValidationReport:
    epsilons: np.ndarray
    n: int
    perplexity: float
    mode: str = "add"
    rerun_iterations: int = DEFAULT_RERUN_ITERATIONS

    @property
    def trials(self) -> int:
        return int(self.epsilons.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.epsilons))

    @property
    def std(self) -> float:
        return float(np.std(self.epsilons, ddof=1)) if self.epsilons.size > 1 else 0.0


def relative_change(Y: np.ndarray, Y_tilde: np.ndarray) -> float:
    """‖Y - Ỹ‖_F / ‖Y‖_F."""
    norm = np.linalg.norm(Y)
    if norm == 0:
        raise ValueError("reference embedding has zero norm")
    return float(np.linalg.norm(Y - Y_tilde) / norm)


def _trial_data(source: Union[GeneratorSource, InputMatrix], n: Optional[int], mode: str,
                child: np.random.SeedSequence) -> Tuple[InputMatrix, Optional[np.ndarray], int]:
    """Base data, added point (add mode) and the varied index for one trial."""
    data_seed, point_seed, index_seed = (int(s) for s in child.generate_state(3))
    rng = np.random.Generator(np.random.PCG64(index_seed))

    if isinstance(source, GeneratorSource):
        matrix = source.sample(n=n, seed=data_seed)
        if mode == "add":
            return matrix, source.sample_point(point_seed), matrix.n
        return matrix, None, int(rng.integers(matrix.n))

    index = int(rng.integers(source.n))
    if mode == "add":
        return source.delete_row(index), source.values[index], source.n - 1
    return source, None, index


def _embed(matrix: InputMatrix, config: TsneConfig, cache: Optional[ResultCache]) -> Embedding:
    if cache is None:
        return run_tsne(matrix, config)
    key = make_key("embedding", matrix.values, config.to_dict())
    return cache.get_or_compute(key, lambda: run_tsne(matrix, config))


def loo_trial(matrix: InputMatrix, config: TsneConfig, mode: str = "add", x_new: Optional[np.ndarray] = None,
              index: Optional[int] = None, rerun_iterations: int = DEFAULT_RERUN_ITERATIONS,
              cache: Optional[ResultCache] = None) -> float:
    """
    One ε_n measurement.

    Args:
        matrix: Base data X
        config: Settings of the first run
        mode: "add" appends ``x_new``; "delete" removes row ``index``
        x_new: Point to add (add mode)
        index: Row to delete (delete mode)
        rerun_iterations: Iterations of the warm-started rerun
        cache: Optional memo for the first-run embedding

    Returns:
        ε_n for this trial
    """
    embedding = _embed(matrix, config, cache)
    Y = embedding.Y
    rerun = config.warm_start(rerun_iterations)

    if mode == "add":
        x_new = np.asarray(x_new, dtype=np.float64)
        nearest = NearestNeighbors(n_neighbors=1).fit(matrix.values).kneighbors(x_new[None, :],
                                                                                return_distance=False)[0, 0]
        init = np.vstack([Y, Y[nearest]])
        Y_tilde = run_tsne(matrix.append_row(x_new), rerun, init=init).Y
        return relative_change(Y, Y_tilde[:-1])

    keep = np.arange(matrix.n) != index
    Y_kept = Y[keep]
    Y_tilde = run_tsne(matrix.delete_row(index), rerun, init=Y_kept).Y
    return relative_change(Y_kept, Y_tilde)


def validate_loo(source: Union[GeneratorSource, InputMatrix], config: TsneConfig, trials: int = 20,
                 n: Optional[int] = None, mode: str = "add", rerun_iterations: int = DEFAULT_RERUN_ITERATIONS,
                 seed: int = 0, threads: int = 1, cache: Optional[ResultCache] = None,
                 progress: bool = False) -> LooValidationReport:
    """
    Repeat the add-one (or delete-one) experiment and aggregate ε_n.

    With a generator source every trial draws fresh data of size ``n`` and a
    fresh added point; with a fixed matrix the added point is a random held
    out row.

    Args:
        source: Generator or fixed data
        config: t-SNE settings of the first run
        trials: Number of trials (≥ 1)
        n: Sample size for generator sources (default: the source's n)
        mode: "add" or "delete"
        rerun_iterations: Warm-started rerun length
        seed: Root seed; each trial gets its own child stream
        threads: Trials run in parallel on this many threads
        cache: Optional memo for first-run embeddings
        progress: Show a progress bar

    Returns:
        LooValidationReport
    """
    if trials < 1:
        raise SpecValidationError("at least one trial is required", "trials")
    if mode not in MODES:
        raise SpecValidationError(f"mode must be one of {MODES}", "mode")
    if rerun_iterations < 0:
        raise SpecValidationError("rerun_iterations must be nonnegative", "rerun_iterations")

    children = np.random.SeedSequence(seed).spawn(trials)

    def run(child: np.random.SeedSequence) -> float:
        matrix, x_new, index = _trial_data(source, n, mode, child)
        return loo_trial(matrix, config, mode, x_new, index, rerun_iterations, cache)

    with tqdm(total=trials, desc=f"LOO validation ({mode})", disable=not progress) as bar:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                epsilons = []
                for value in pool.map(run, children):
                    epsilons.append(value)
                    bar.update(1)
        else:
            epsilons = []
            for child in children:
                epsilons.append(run(child))
                bar.update(1)

    if isinstance(source, GeneratorSource):
        size = n if n is not None else source.n
    else:
        size = source.n - 1 if mode == "add" else source.n
    report = LooValidationReport(np.array(epsilons), int(size), float(config.perplexity), mode, rerun_iterations)
    logger.info("LOO validation n=%d perplexity %.4g (%s): mean ε %.4f ± %.4f over %d trials",
                report.n, report.perplexity, mode, report.mean, report.std, trials)
    return report
