#!/usr/bin/env python3
"""
nescope - Main Entry Point
==========================

Reliability diagnostics for t-SNE embeddings: exact t-SNE, leave-one-out
(LOO) loss landscapes and maps, perturbation and singularity scores, LOO
validation, perplexity selection and embedding quality metrics.

Usage:
    python3 app.py <command> [options]
    python3 app.py embed --generator gmm2 --perplexity 30 --out results/
    python3 app.py score --kind singularity --input data.csv --labels

Run `python3 app.py <command> --help` for the options of each command.
"""

import argparse
import logging
import sys
import traceback
from typing import Any, Dict, List, Optional

from core.errors import DataFormatError, NescopeError, SpecValidationError, UsageError
from utils.constants import (
    APP_NAME, EXIT_INTERRUPTED, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, LOG_FORMAT, VERSION,
)

# Command-line flag -> configuration path
FLAG_PATHS = {
    'seed': 'app.seed',
    'threads': 'app.threads',
    'out': 'output.dir',
    'log_level': 'app.log_level',
    'progress': 'app.progress',
    'input': 'data.input',
    'header': 'data.header',
    'labels': 'data.labels',
    'generator': 'data.generator',
    'n': 'data.n',
    'pca_dim': 'preprocessing.pca_dim',
    'perplexity': 'tsne.perplexity',
    'max_iter': 'tsne.max_iter',
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message, self.format_usage())


def common_options() -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    parent = ArgumentParser(add_help=False)
    parent.add_argument('--config', default='config.json', help='JSON configuration file')
    parent.add_argument('--seed', type=int, help='random seed')
    parent.add_argument('--threads', type=int, help='worker threads (default: NESCOPE_THREADS or all cores)')
    parent.add_argument('--out', help='output directory')
    parent.add_argument('--log-level', dest='log_level', help='DEBUG, INFO, WARNING or ERROR')
    parent.add_argument('--progress', action=argparse.BooleanOptionalAction, default=None,
                        help='show progress bars')

    source = parent.add_argument_group('input')
    source.add_argument('--input', help='CSV input file')
    source.add_argument('--header', action='store_true', default=None, help='input CSV has a header row')
    source.add_argument('--labels', action='store_true', default=None, help='last CSV column holds integer labels')
    source.add_argument('--generator', help='GMM preset name (gmm2, gmm5, ...), swiss_roll or a JSON spec file')
    source.add_argument('-n', type=int, help='sample size for generated data')
    source.add_argument('--pca-dim', dest='pca_dim', type=int, help='PCA width applied before affinities')
    source.add_argument('--perplexity', type=float, help='t-SNE perplexity')
    source.add_argument('--max-iter', dest='max_iter', type=int, help='t-SNE iterations')
    return parent


def build_parser() -> ArgumentParser:
    """Top-level parser with one subparser per registered command."""
    from core.pipeline_app import COMMANDS

    parser = ArgumentParser(prog=APP_NAME, description="Reliability diagnostics for t-SNE embeddings")
    parser.add_argument('--version', action='version', version=f"{APP_NAME} {VERSION}")
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    parent = common_options()
    for command in COMMANDS:
        subparser = subparsers.add_parser(command.name, help=command.help, parents=[parent])
        command.add_arguments(subparser)
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    return {path: getattr(args, flag, None) for flag, path in FLAG_PATHS.items()}


def setup_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT, force=True)


def print_banner() -> None:
    print("=" * 60)
    print(f"{APP_NAME} - t-SNE reliability diagnostics")
    print(f"Version: {VERSION}")
    print("=" * 60)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for nescope.

    Args:
        argv: Command-line arguments (default: sys.argv[1:])

    Returns:
        Process exit code
    """
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required", parser.format_usage())

        from core.pipeline_app import PipelineApp

        setup_logging(args.log_level or 'INFO')
        print_banner()
        app = PipelineApp(args.config, overrides_from(args))
        setup_logging(app.runtime_config['LOG_LEVEL'])

        summary = app.run(args.command, args)

        print(f"\n{args.command} finished")
        for key, value in summary.items():
            print(f"  {key}: {value}")
        for path in app.outputs:
            print(f"  wrote {path}")
        return EXIT_OK

    except UsageError as e:
        if e.usage:
            print(e.usage, file=sys.stderr, end='')
        print(f"Usage Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    except SpecValidationError as e:
        print(f"Invalid Settings: {e}", file=sys.stderr)
        return EXIT_USAGE

    except DataFormatError as e:
        print(f"Data Format Error: {e}", file=sys.stderr)
        return EXIT_IO

    except FileNotFoundError as e:
        print(f"File Not Found Error: {e}", file=sys.stderr)
        print("\nCheck the --input, --generator and --config paths.", file=sys.stderr)
        return EXIT_IO

    except OSError as e:
        print(f"I/O Error: {e}", file=sys.stderr)
        return EXIT_IO

    except NescopeError as e:
        print(f"Numerical Error: {e}", file=sys.stderr)
        print("\nThis may be due to:", file=sys.stderr)
        print("- A perplexity too large or too small for the data", file=sys.stderr)
        print("- Duplicate input points", file=sys.stderr)
        print("- A learning rate that makes t-SNE diverge", file=sys.stderr)
        return EXIT_NUMERICAL

    except ImportError as e:
        print("Import Error: Missing required dependency", file=sys.stderr)
        print(f"Error details: {e}", file=sys.stderr)
        print("\nPlease install required dependencies:", file=sys.stderr)
        print("  pip3 install -r requirements.txt", file=sys.stderr)
        return EXIT_IO

    except KeyboardInterrupt:
        print("\nShutdown requested by user (Ctrl+C)", file=sys.stderr)
        return EXIT_INTERRUPTED

    except Exception as e:
        print(f"Unexpected error: {e}", file=sys.stderr)
        print("\nFull error traceback:", file=sys.stderr)
        traceback.print_exc()
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
