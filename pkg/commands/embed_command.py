"""
`embed`: run exact t-SNE and write the embedding and its loss trace.
"""

from typing import Any, Dict

from commands.base_command import BaseCommand
from data.csv_io import save_csv, write_table
from utils.constants import EMBEDDING_FILE, LOSS_TRACE_FILE


class EmbedCommand(BaseCommand):
    name = "embed"
    help = "embed the input with exact t-SNE"

    def run(self, args) -> Dict[str, Any]:
        context = self.context()
        embedding = self.embed(context)

        self.record(save_csv(embedding.Y, self.output_path(EMBEDDING_FILE)))
        self.record(write_table(self.output_path(LOSS_TRACE_FILE), ("iteration", "loss"), embedding.loss_trace))

        return {"n": embedding.n, "perplexity": context.perplexity, "loss": embedding.loss}
