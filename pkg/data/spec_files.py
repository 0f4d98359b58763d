"""
JSON spec files for the generators.

Gaussian mixture::

    {"components": [{"mean": [0, 0], "cov": [[1, 0], [0, 1]], "weight": 0.5}, ...],
     "n": 700, "seed": 1}

Swiss roll::

    {"type": "swiss_roll", "n": 800, "angle_range": [4.71, 14.14],
     "height_range": [0, 20], "seed": 1}

Presets::

    {"preset": "gmm8", "n": 800, "seed": 1}
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from core.errors import DataFormatError, SpecValidationError
from data.generators import (
    PRESETS, GmmComponent, GmmSpec, InputMatrix, SwissRollSpec, sample_gmm, sample_swiss_roll,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_SIZE = 500


@dataclass
class GeneratorSource:
    """A generator plus the sample size and seed it should be drawn with."""

    spec: Union[GmmSpec, SwissRollSpec]
    n: int
    seed: int

    @property
    def kind(self) -> str:
        return "swiss_roll" if isinstance(self.spec, SwissRollSpec) else "gmm"

    def sample(self, n: int = None, seed: int = None) -> InputMatrix:
        n = self.n if n is None else n
        seed = self.seed if seed is None else seed
        if isinstance(self.spec, SwissRollSpec):
            spec = SwissRollSpec(n, self.spec.angle_range, self.spec.height_range, seed, self.spec.angle_bins)
            return sample_swiss_roll(spec)
        return sample_gmm(self.spec, n, seed)

    def sample_point(self, seed: int) -> np.ndarray:
        """One extra point from the same generator, on its own seed."""
        return self.sample(n=1, seed=seed).values[0]


def parse_generator_spec(document: Dict[str, Any]) -> GeneratorSource:
    """
    Build a GeneratorSource from a decoded JSON document.

    Raises:
        SpecValidationError: On unknown presets or invalid fields
    """
    n = int(document.get("n", DEFAULT_SAMPLE_SIZE))
    seed = int(document.get("seed", 0))

    if "preset" in document:
        name = document["preset"]
        if name == "swiss_roll":
            return GeneratorSource(SwissRollSpec(n, seed=seed), n, seed)
        if name not in PRESETS:
            raise SpecValidationError(f"unknown preset {name!r} (known: {', '.join(sorted(PRESETS))}, swiss_roll)", "preset")
        return GeneratorSource(PRESETS[name](), n, seed)

    if document.get("type") == "swiss_roll":
        spec = SwissRollSpec(
            n,
            angle_range=document.get("angle_range", (1.5 * np.pi, 4.5 * np.pi)),
            height_range=document.get("height_range", (0.0, 20.0)),
            seed=seed,
            angle_bins=int(document.get("angle_bins", 10)),
        )
        return GeneratorSource(spec, n, seed)

    if "components" not in document:
        raise SpecValidationError("expected 'components', 'preset' or type 'swiss_roll'", "spec")
    try:
        components = [
            GmmComponent(np.asarray(c["mean"], dtype=np.float64), np.asarray(c["cov"], dtype=np.float64), float(c["weight"]))
            for c in document["components"]
        ]
    except (KeyError, TypeError) as exc:
        raise SpecValidationError(f"malformed component: {exc}", "components")
    return GeneratorSource(GmmSpec(components), n, seed)


def load_generator_spec(path: Union[str, Path]) -> GeneratorSource:
    """
    Read a generator spec file.

    Raises:
        FileNotFoundError: If the file does not exist
        DataFormatError: If the file is not valid JSON
    """
    path = Path(path)
    with open(path, "r") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"invalid JSON: {exc.msg}", str(path), exc.lineno, exc.colno)
    return parse_generator_spec(document)


def gmm_spec_to_dict(spec: GmmSpec, n: int, seed: int) -> Dict[str, Any]:
    return {
        "components": [
            {"mean": c.mean.tolist(), "cov": c.cov.tolist(), "weight": c.weight} for c in spec.components
        ],
        "n": n,
        "seed": seed,
    }
