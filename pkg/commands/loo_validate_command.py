"""
`loo-validate`: add-one / delete-one experiments over a grid of sample sizes
and perplexities, one result row per (dataset, n, perplexity).
"""

import logging
from typing import Any, Dict

from commands.base_command import BaseCommand, parse_floats
from core.tsne import TsneConfig
from core.validation import MODES, validate_loo
from data.csv_io import write_table
from utils.constants import VALIDATION_FILE

logger = logging.getLogger(__name__)


class LooValidateCommand(BaseCommand):
    name = "loo-validate"
    help = "measure how much adding or deleting one point moves the embedding"

    @classmethod
    def add_arguments(cls, parser) -> None:
        parser.add_argument("--sizes", help="comma-separated sample sizes (generator input only)")
        parser.add_argument("--perplexities", help="comma-separated perplexities (default: the configured one)")
        parser.add_argument("--trials", type=int, help="trials per setting")
        parser.add_argument("--mode", choices=MODES, help="add or delete one point")
        parser.add_argument("--rerun-iterations", type=int, dest="rerun_iterations",
                            help="iterations of the warm-started rerun")

    def run(self, args) -> Dict[str, Any]:
        trials = int(self.option(args, "trials", "loo.trials", 20))
        mode = self.option(args, "mode", "loo.mode", "add")
        rerun_iterations = int(self.option(args, "rerun_iterations", "loo.rerun_iterations", 250))
        perplexities = parse_floats(args.perplexities, "perplexities") or [self.config.tsne.perplexity]

        generator = self.config.generator
        if generator is not None:
            sizes = [int(s) for s in (parse_floats(args.sizes, "sizes") or [generator.n])]
            source = generator
        else:
            if args.sizes:
                logger.warning("--sizes is ignored for a fixed input file")
            source = self.matrix()
            sizes = [None]

        rows = []
        for size in sizes:
            for perplexity in perplexities:
                settings = self.config.tsne.to_dict()
                settings["perplexity"] = perplexity
                report = validate_loo(source, TsneConfig(**settings), trials=trials, n=size, mode=mode,
                                      rerun_iterations=rerun_iterations, seed=self.config.seed,
                                      threads=self.config.threads, cache=self.app.cache,
                                      progress=self.config.progress)
                rows.append((self.config.describe_input(), report.n, report.perplexity, mode,
                             report.trials, report.mean, report.std))

        self.record(write_table(self.output_path(VALIDATION_FILE),
                                ("dataset", "n", "perplexity", "mode", "trials", "mean", "std"), rows))
        return {"settings": len(rows), "trials": trials, "mode": mode}
