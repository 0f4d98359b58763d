"""
Base command class for nescope subcommands.
"""

import argparse
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.affinity import AffinityContext
from core.cache import make_key
from core.errors import SpecValidationError, UsageError
from core.tsne import Embedding, TsneConfig, embed_context
from data.csv_io import load_csv
from data.generators import InputMatrix

logger = logging.getLogger(__name__)


def parse_floats(text: Optional[str], name: str) -> Optional[List[float]]:
    """Comma-separated numbers, e.g. "5,10,30"."""
    if text is None:
        return None
    try:
        return [float(part) for part in str(text).split(',') if part.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}")


class BaseCommand:
    """Base class for all pipeline subcommands."""

    name = "base"
    help = ""

    def __init__(self, app):
        """
        Initialize base command.

        Args:
            app: Reference to main application instance
        """
        self.app = app
        self.config = app.pipeline_config
        self.outputs: List[Path] = []
        self.started = time.time()
        self._matrix: Optional[InputMatrix] = None

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        """
        Register command-specific flags.
        Override in subclasses.
        """

    def run(self, args: argparse.Namespace) -> Dict[str, Any]:
        """
        Execute the command and return a summary.
        Must be implemented by subclasses.
        """
        raise NotImplementedError

    def option(self, args: argparse.Namespace, attribute: str, path: str, default: Any = None) -> Any:
        """A command flag if given, else the configuration value at ``path``."""
        value = getattr(args, attribute, None)
        if value is not None:
            return value
        return self.app.config_manager.get(path, default)

    def matrix(self) -> InputMatrix:
        """The input data, loaded once per command."""
        if self._matrix is None:
            self._matrix = self.config.load_matrix()
            logger.info("Input: %d points in %d dimensions", self._matrix.n, self._matrix.d)
            self.app.check_resources(self._matrix.n)
        return self._matrix

    def tsne_config(self, perplexity: Optional[float] = None) -> TsneConfig:
        settings = self.config.tsne.to_dict()
        if perplexity is not None:
            settings['perplexity'] = float(perplexity)
        config = TsneConfig(**settings)
        config.validate(self.matrix().n)
        return config

    def context(self, perplexity: Optional[float] = None) -> AffinityContext:
        config = self.tsne_config(perplexity)
        return AffinityContext.build(self.matrix(), config.perplexity, config.pca_dim,
                                     config.entropy_tol, self.config.threads)

    def embed(self, context: AffinityContext) -> Embedding:
        """Embed a context, reusing an earlier embedding of the same data and settings."""
        config = self.tsne_config(context.perplexity)
        key = make_key("embedding", context.matrix.values, config.to_dict())
        return self.app.cache.get_or_compute(
            key, lambda: embed_context(context, config, threads=self.config.threads))

    def embedding_for(self, args: argparse.Namespace,
                      perplexity: Optional[float] = None) -> Tuple[AffinityContext, np.ndarray]:
        """
        The context and embedding to analyse: ``--embedding`` when given, else a fresh t-SNE run.

        Raises:
            FileNotFoundError: If the embedding file is missing
            SpecValidationError: If its shape does not match the input
        """
        context = self.context(perplexity)
        path = getattr(args, 'embedding', None)
        if path:
            Y = load_csv(path).values
            if Y.shape != (context.n, 2):
                raise SpecValidationError(
                    f"embedding must be {context.n}×2, found {Y.shape[0]}×{Y.shape[1]}", "embedding")
            return context, Y
        return context, self.embed(context).Y

    def output_path(self, filename: str) -> Path:
        return self.config.output_dir / filename

    def record(self, path: Path) -> Path:
        """Remember a written file."""
        self.outputs.append(Path(path))
        logger.info("Wrote %s", path)
        return path

    def write_json(self, filename: str, document: Dict[str, Any]) -> Path:
        path = self.output_path(filename)
        with open(path, 'w') as handle:
            json.dump(document, handle, indent=2)
        return self.record(path)

    def point_arg(self, text: Optional[str], name: str) -> Optional[np.ndarray]:
        """Parse a point given as comma-separated coordinates in input space."""
        values = parse_floats(text, name)
        if values is None:
            return None
        point = np.asarray(values, dtype=np.float64)
        if point.shape != (self.matrix().d,):
            raise UsageError(f"--{name} needs {self.matrix().d} coordinates, got {point.size}")
        return point

    def class_means(self, count: int = 2) -> Sequence[np.ndarray]:
        """Means of the ``count`` largest classes of the input."""
        matrix = self.matrix()
        if matrix.labels is None:
            raise UsageError("input has no labels; pass the points explicitly")
        classes, sizes = np.unique(matrix.labels, return_counts=True)
        if classes.size < count:
            raise UsageError(f"input has fewer than {count} classes")
        largest = classes[np.argsort(-sizes, kind='stable')[:count]]
        return [matrix.values[matrix.labels == label].mean(axis=0) for label in sorted(largest)]

    def get_command_info(self) -> Dict[str, Any]:
        """
        Get information about this command run.

        Returns:
            Dictionary with command information
        """
        return {
            'name': self.name,
            'outputs': [str(path) for path in self.outputs],
            'elapsed': time.time() - self.started
        }
