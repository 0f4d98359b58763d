"""
Pipeline application for nescope: resolves configuration and dispatches subcommands.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.config_manager import ConfigManager
from core.cache import ResultCache
from core.errors import SpecValidationError
from core.tsne import TsneConfig
from data.csv_io import load_csv
from data.generators import InputMatrix
from data.spec_files import GeneratorSource, load_generator_spec, parse_generator_spec
from scores.perturbation import PerturbationConfig
from utils.constants import get_runtime_constants
from utils.system_resources import SystemResources

from commands.embed_command import EmbedCommand
from commands.gen_command import GenCommand
from commands.landscape_command import LandscapeCommand
from commands.loo_validate_command import LooValidateCommand
from commands.metrics_command import MetricsCommand
from commands.score_command import ScoreCommand
from commands.select_perplexity_command import SelectPerplexityCommand
from commands.trajectory_command import TrajectoryCommand

logger = logging.getLogger(__name__)

COMMANDS = (
    GenCommand,
    EmbedCommand,
    LooValidateCommand,
    ScoreCommand,
    LandscapeCommand,
    TrajectoryCommand,
    SelectPerplexityCommand,
    MetricsCommand,
)


@dataclass
class PipelineConfig:
    """
    Resolved settings shared by every subcommand.

    Exactly one of ``input_path`` and ``generator`` is set.
    """

    output_dir: Path
    tsne: TsneConfig
    perturbation: PerturbationConfig
    input_path: Optional[Path] = None
    header: bool = False
    labels: bool = False
    generator: Optional[GeneratorSource] = None
    singularity: Dict[str, Any] = field(default_factory=dict)
    selection: Dict[str, Any] = field(default_factory=dict)
    loo: Dict[str, Any] = field(default_factory=dict)
    metrics_k: Optional[int] = None
    seed: int = 0
    threads: int = 1
    progress: bool = False

    @classmethod
    def from_config(cls, config_manager: ConfigManager, runtime: Dict[str, Any]) -> "PipelineConfig":
        """
        Build from a resolved ConfigManager.

        Raises:
            FileNotFoundError: If the input CSV or generator spec file is missing
            SpecValidationError: On invalid settings
        """
        seed = runtime['SEED']
        data = config_manager.get_section('data')

        input_path = None
        generator = None
        if data.get('input'):
            input_path = Path(data['input'])
            if not input_path.exists():
                raise FileNotFoundError(f"Input file not found: {input_path}")
        else:
            generator = cls._resolve_generator(data.get('generator') or 'gmm2', data.get('n'), seed)

        tsne_settings = dict(config_manager.get_section('tsne'))
        tsne_settings.update(seed=seed, pca_dim=config_manager.get('preprocessing.pca_dim'))
        tsne = TsneConfig.from_dict(tsne_settings)

        perturbation = config_manager.get_section('perturbation')
        perturbation_config = PerturbationConfig(
            length=perturbation.get('length'),
            directions=int(perturbation.get('directions', 3)),
            approximation=perturbation.get('approximation', 'approx2'),
            prescreen=bool(perturbation.get('prescreen', False)),
            min_samples=int(perturbation.get('min_samples', 10)),
        )
        perturbation_config.strategy.seed = seed

        output_dir = Path(runtime['OUTPUT_DIR'])
        output_dir.mkdir(parents=True, exist_ok=True)

        return cls(
            output_dir=output_dir,
            tsne=tsne,
            perturbation=perturbation_config,
            input_path=input_path,
            header=bool(data.get('header', False)),
            labels=bool(data.get('labels', False)),
            generator=generator,
            singularity=dict(config_manager.get_section('singularity')),
            selection=dict(config_manager.get_section('selection')),
            loo=dict(config_manager.get_section('loo')),
            metrics_k=config_manager.get('metrics.k'),
            seed=seed,
            threads=runtime['THREADS'],
            progress=runtime['PROGRESS'],
        )

    @staticmethod
    def _resolve_generator(name: str, n: Optional[int], seed: int) -> GeneratorSource:
        """A preset name or a path to a JSON generator spec."""
        if str(name).endswith('.json'):
            path = Path(name)
            if not path.exists():
                raise FileNotFoundError(f"Generator spec not found: {path}")
            source = load_generator_spec(path)
            if n is not None:
                source.n = int(n)
            return source
        document = {"preset": name, "seed": seed}
        if n is not None:
            document["n"] = int(n)
        return parse_generator_spec(document)

    def load_matrix(self) -> InputMatrix:
        """The configured input data."""
        if self.input_path is not None:
            return load_csv(self.input_path, header=self.header, labels=self.labels)
        return self.generator.sample()

    def describe_input(self) -> str:
        if self.input_path is not None:
            return self.input_path.stem
        return f"{self.generator.kind}"

    def snapshot(self) -> Dict[str, Any]:
        """JSON-friendly provenance for result files."""
        return {
            "input": str(self.input_path) if self.input_path else None,
            "generator": self.generator.kind if self.generator else None,
            "n": self.generator.n if self.generator else None,
            "tsne": self.tsne.to_dict(),
            "seed": self.seed,
            "threads": self.threads,
        }


class PipelineApp:
    """Main application class for nescope."""

    def __init__(self, config_file: str = 'config.json', overrides: Optional[Dict[str, Any]] = None,
                 env_file: str = '.env'):
        """
        Initialize the pipeline application.

        Args:
            config_file: Path to JSON configuration file
            overrides: Dot-path values from command-line flags (None entries are ignored)
            env_file: Path to .env file
        """
        self.config_manager = ConfigManager(config_file, env_file)
        self.config_manager.apply_overrides(overrides or {})

        self.runtime_config = get_runtime_constants(self.config_manager)
        self._show_config_status()

        self.pipeline_config = PipelineConfig.from_config(self.config_manager, self.runtime_config)
        self.cache = ResultCache()
        self.commands = {command.name: command for command in COMMANDS}
        self.outputs: List[Path] = []

    def _show_config_status(self) -> None:
        """Log configuration status and warnings."""
        status = self.config_manager.get_config_status()
        logger.info("Configuration source: %s", status['config_sources'])
        logger.info("Threads: %d, seed: %d, output: %s",
                    self.runtime_config['THREADS'], self.runtime_config['SEED'], self.runtime_config['OUTPUT_DIR'])
        for warning in self.config_manager.validate_configuration():
            logger.warning(warning)

    def check_resources(self, n: int) -> None:
        """Warn when dense n×n work may not fit in memory."""
        SystemResources.check_capacity(n)

    def run(self, command_name: str, args) -> Dict[str, Any]:
        """
        Run one subcommand.

        Args:
            command_name: Registered subcommand name
            args: Parsed argparse namespace

        Returns:
            The command's summary dictionary
        """
        if command_name not in self.commands:
            raise SpecValidationError(f"unknown command {command_name!r}", "command")
        command = self.commands[command_name](self)
        logger.info("Running %s", command_name)
        summary = command.run(args)
        self.outputs.extend(command.outputs)
        return summary
