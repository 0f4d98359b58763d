"""
`landscape`: LOO loss landscape of one added point, optionally with a
minima count across perplexities.
"""

import logging
from typing import Any, Dict

from commands.base_command import BaseCommand, parse_floats
from core.affinity import APPROXIMATIONS
from core.landscape import landscape, minima_count_sweep
from core.loo import make_loo_problem
from data.csv_io import write_table
from utils.constants import LANDSCAPE_FILE

logger = logging.getLogger(__name__)

SWEEP_FILE = "minima_counts.csv"


class LandscapeCommand(BaseCommand):
    name = "landscape"
    help = "evaluate the LOO loss of an added point on a grid and locate its minima"

    @classmethod
    def add_arguments(cls, parser) -> None:
        parser.add_argument("--x", help="added point, comma-separated input coordinates "
                                        "(default: midpoint of the two largest class means)")
        parser.add_argument("--resolution", type=int, help="grid cells per axis")
        parser.add_argument("--approximation", choices=APPROXIMATIONS, help="similarity-column recipe")
        parser.add_argument("--embedding", help="use this n×2 embedding CSV instead of running t-SNE")
        parser.add_argument("--sweep", help="comma-separated perplexities for a minima count sweep")

    def run(self, args) -> Dict[str, Any]:
        resolution = int(self.option(args, "resolution", "loo.grid_resolution", 50))
        approximation = self.option(args, "approximation", "loo.approximation", "exact")
        x_new = self.point_arg(args.x, "x")
        if x_new is None:
            first, second = self.class_means()
            x_new = 0.5 * (first + second)

        context, Y = self.embedding_for(args)
        grid = landscape(make_loo_problem(context, Y, x_new, approximation), resolution=resolution)
        document = grid.to_dict()
        document.update(x=x_new.tolist(), perplexity=context.perplexity, approximation=approximation)
        self.write_json(LANDSCAPE_FILE, document)
        summary = {"minima": grid.minima_count, "resolution": resolution}

        sweep = parse_floats(args.sweep, "sweep")
        if sweep:
            counts = minima_count_sweep(self.matrix(), sweep, x_new, self.config.tsne, resolution=resolution,
                                        approximation=approximation, threads=self.config.threads)
            self.record(write_table(self.output_path(SWEEP_FILE), ("perplexity", "minima"), counts))
            summary["sweep"] = counts
        return summary
