"""
`score`: per-point perturbation or singularity scores.
"""

import logging
from dataclasses import replace
from typing import Any, Dict

import numpy as np
from sklearn.neighbors import NearestNeighbors

from commands.base_command import BaseCommand
from scores.perturbation import perturbation_scores_batch
from scores.report import KINDS, dichotomize
from scores.singularity import METHODS, singularity_scores
from utils.constants import SCORES_CSV, SCORES_JSON

logger = logging.getLogger(__name__)


def knn_edges(features: np.ndarray, k: int) -> np.ndarray:
    """k-nearest-neighbor graph of the input as an (n·k)×2 index array."""
    k = min(k, features.shape[0] - 1)
    _, neighbors = NearestNeighbors(n_neighbors=k).fit(features).kneighbors()
    rows = np.repeat(np.arange(features.shape[0]), k)
    return np.column_stack([rows, neighbors.ravel()])


class ScoreCommand(BaseCommand):
    name = "score"
    help = "compute perturbation or singularity scores for every point"

    @classmethod
    def add_arguments(cls, parser) -> None:
        parser.add_argument("--kind", choices=KINDS, default="singularity", help="score type")
        parser.add_argument("--method", choices=METHODS, help="loss whose Hessian defines singularity scores")
        parser.add_argument("--embedding", help="score this n×2 embedding CSV instead of running t-SNE")
        parser.add_argument("--length", type=float, help="perturbation length (default: 10%% of the input diameter)")
        parser.add_argument("--prescreen", action="store_true", default=None,
                            help="score only points on cluster peripheries")

    def run(self, args) -> Dict[str, Any]:
        context, Y = self.embedding_for(args)

        if args.kind == "perturbation":
            cfg = self.config.perturbation
            overrides = {}
            if args.length is not None:
                overrides["length"] = args.length
            if args.prescreen:
                overrides["prescreen"] = True
            if overrides:
                cfg = replace(cfg, **overrides)
            report = perturbation_scores_batch(context, Y, cfg, threads=self.config.threads,
                                               progress=self.config.progress)
        else:
            report = self._singularity(args, context, Y)

        self.record(report.save_csv(self.output_path(SCORES_CSV.format(kind=report.kind))))
        self.record(report.save_json(self.output_path(SCORES_JSON.format(kind=report.kind))))

        top_mean, infinite = report.top_fraction_mean(0.05)
        return {
            "kind": report.kind,
            "scored": int(report.computed.sum()),
            "top5_mean": top_mean,
            "infinite": infinite,
            "marked": int(dichotomize(report).sum()),
            "failures": len(report.errors),
        }

    def _singularity(self, args, context, Y):
        settings = self.config.singularity
        method = args.method or settings.get("method", "tsne")
        if method == "umap":
            return singularity_scores(Y, context.similarity, "umap",
                                      a=settings.get("umap_a"), b=settings.get("umap_b"))
        if method == "largevis":
            edges = knn_edges(context.features, int(settings.get("largevis_neighbors", 15)))
            return singularity_scores(Y, context.similarity, "largevis", edges=edges,
                                      gamma=settings.get("largevis_gamma"))
        return singularity_scores(Y, context.similarity, "tsne")
