"""
`select-perplexity`: FI curve over candidate perplexities and its elbow.
"""

from typing import Any, Dict

from commands.base_command import BaseCommand, parse_floats
from data.csv_io import save_csv
from scores.perplexity_selection import ELBOW_RULES, select_perplexity
from utils.constants import EMBEDDING_FILE, SELECTION_FILE, SELECTION_SUMMARY


class SelectPerplexityCommand(BaseCommand):
    name = "select-perplexity"
    help = "recommend a perplexity from the elbow of the top-5% singularity curve"

    @classmethod
    def add_arguments(cls, parser) -> None:
        parser.add_argument("--candidates", help="comma-separated ascending perplexities (at least 3)")
        parser.add_argument("--fraction", type=float, help="top fraction of singularity scores to average")
        parser.add_argument("--rule", choices=ELBOW_RULES, help="elbow rule")

    def run(self, args) -> Dict[str, Any]:
        candidates = parse_floats(args.candidates, "candidates") or self.config.selection.get("candidates")
        fraction = float(self.option(args, "fraction", "selection.fraction", 0.05))
        rule = self.option(args, "rule", "selection.rule", "log")

        curve = select_perplexity(self.matrix(), candidates, self.config.tsne, fraction=fraction, rule=rule,
                                  threads=self.config.threads, cache=self.app.cache,
                                  progress=self.config.progress)

        self.record(curve.save_csv(self.output_path(SELECTION_FILE)))
        self.record(save_csv(curve.embeddings[curve.chosen].Y, self.output_path(EMBEDDING_FILE)))
        self.write_json(SELECTION_SUMMARY, {
            "chosen": curve.chosen,
            "candidates": [float(p) for p in curve.perplexities],
            "skipped": curve.skipped,
            "fraction": fraction,
            "rule": rule,
        })
        return {"chosen": curve.chosen, "skipped": curve.skipped}
