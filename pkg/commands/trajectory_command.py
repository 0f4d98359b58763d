"""
`trajectory`: follow the LOO-map along the segment between two input points.
"""

from typing import Any, Dict

from commands.base_command import BaseCommand
from core.affinity import APPROXIMATIONS
from core.landscape import interpolation_trajectory
from data.csv_io import write_table
from utils.constants import TRAJECTORY_FILE


class TrajectoryCommand(BaseCommand):
    name = "trajectory"
    help = "track the LOO-map of x(t) = t·c1 + (1 - t)·c2 for t in [0, 1]"

    @classmethod
    def add_arguments(cls, parser) -> None:
        parser.add_argument("--c1", help="first endpoint (default: mean of the first of the two largest classes)")
        parser.add_argument("--c2", help="second endpoint (default: mean of the other class)")
        parser.add_argument("--steps", type=int, help="number of evenly spaced t values")
        parser.add_argument("--approximation", choices=APPROXIMATIONS, help="similarity-column recipe")
        parser.add_argument("--embedding", help="use this n×2 embedding CSV instead of running t-SNE")

    def run(self, args) -> Dict[str, Any]:
        steps = int(self.option(args, "steps", "loo.steps", 51))
        approximation = self.option(args, "approximation", "perturbation.approximation", "approx2")
        c1 = self.point_arg(args.c1, "c1")
        c2 = self.point_arg(args.c2, "c2")
        if c1 is None or c2 is None:
            first, second = self.class_means()
            c1 = first if c1 is None else c1
            c2 = second if c2 is None else c2

        context, Y = self.embedding_for(args)
        trajectory = interpolation_trajectory(context, Y, c1, c2, steps=steps, approximation=approximation,
                                              threads=self.config.threads)
        self.record(write_table(self.output_path(TRAJECTORY_FILE), ("t", "y1", "y2", "jump"), trajectory.rows()))

        lo, hi = trajectory.max_jump_interval
        return {"steps": steps, "max_jump": trajectory.max_jump, "max_jump_interval": [lo, hi],
                "step_variance": trajectory.step_variance}
