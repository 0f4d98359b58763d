"""
`gen`: sample a synthetic dataset and write it with its generator spec.
"""

import logging
from typing import Any, Dict

from commands.base_command import BaseCommand
from core.errors import UsageError
from data.csv_io import save_csv
from data.spec_files import gmm_spec_to_dict
from utils.constants import DATA_FILE, SPEC_FILE

logger = logging.getLogger(__name__)


class GenCommand(BaseCommand):
    """Write data.csv (features plus a label column) and spec.json."""

    name = "gen"
    help = "sample a synthetic dataset (GMM preset, GMM spec file or Swiss roll)"

    def run(self, args) -> Dict[str, Any]:
        source = self.config.generator
        if source is None:
            raise UsageError("gen needs a generator (--generator), not an input file")

        matrix = self.matrix()
        self.record(save_csv(matrix, self.output_path(DATA_FILE)))

        if source.kind == "gmm":
            document = gmm_spec_to_dict(source.spec, source.n, source.seed)
        else:
            spec = source.spec
            document = {
                "type": "swiss_roll",
                "n": source.n,
                "seed": source.seed,
                "angle_range": list(spec.angle_range),
                "height_range": list(spec.height_range),
                "angle_bins": spec.angle_bins,
            }
        self.write_json(SPEC_FILE, document)

        return {"kind": source.kind, "n": matrix.n, "d": matrix.d}
