"""
Constants and configuration values for nescope.
"""

import sys

from utils.system_resources import SystemResources

APP_NAME = "nescope"
VERSION = "1.0"

# Exit codes
EXIT_OK = 0
EXIT_IO = 2
EXIT_USAGE = 64
EXIT_NUMERICAL = 70
EXIT_INTERRUPTED = 130

# Defaults (overridable via config file, env vars or flags)
DEFAULT_SEED = 0
DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_OUTPUT_DIR = "nescope_out"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Output file names
EMBEDDING_FILE = "embedding.csv"
LOSS_TRACE_FILE = "loss_trace.csv"
DATA_FILE = "data.csv"
SPEC_FILE = "spec.json"
VALIDATION_FILE = "loo_validation.csv"
SCORES_CSV = "{kind}_scores.csv"
SCORES_JSON = "{kind}_scores.json"
LANDSCAPE_FILE = "landscape.json"
TRAJECTORY_FILE = "trajectory.csv"
SELECTION_FILE = "fi_curve.csv"
SELECTION_SUMMARY = "selection.json"
METRICS_JSON = "metrics.json"
METRICS_CSV = "metrics_points.csv"


def get_runtime_constants(config_manager):
    """
    Get runtime constants from configuration manager.
    These values can be overridden by environment variables, config files or flags.

    Args:
        config_manager: ConfigManager instance

    Returns:
        Dictionary with runtime configuration values
    """
    threads = config_manager.get('app.threads')
    if threads is None or threads < 1:
        threads = SystemResources.get_cpu_count()

    progress = config_manager.get('app.progress')
    if progress is None:
        progress = sys.stderr.isatty()

    return {
        'THREADS': int(threads),
        'SEED': int(config_manager.get('app.seed', DEFAULT_SEED)),
        'LOG_LEVEL': str(config_manager.get('app.log_level', DEFAULT_LOG_LEVEL)).upper(),
        'OUTPUT_DIR': config_manager.get('output.dir', DEFAULT_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR,
        'PROGRESS': bool(progress)
    }
