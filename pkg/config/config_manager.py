"""
Configuration management for nescope.
Layers: built-in defaults -> JSON file -> .env / NESCOPE_* environment variables.
Command-line flags are applied on top with ConfigManager.set.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

# Import dotenv for environment variable loading
try:
    from dotenv import load_dotenv
    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False

logger = logging.getLogger(__name__)

# (environment variable, config path, parser)
ENV_OVERRIDES = (
    ("NESCOPE_THREADS", "app.threads", int),
    ("NESCOPE_SEED", "app.seed", int),
    ("NESCOPE_LOG_LEVEL", "app.log_level", lambda value: value.upper()),
    ("NESCOPE_OUTPUT_DIR", "output.dir", str),
    ("NESCOPE_PERPLEXITY", "tsne.perplexity", float),
    ("NESCOPE_MAX_ITER", "tsne.max_iter", int),
)


class ConfigManager:
    """
    Manages pipeline configuration with support for:
    1. Built-in defaults
    2. JSON configuration file
    3. Environment variables (optionally loaded from a .env file)
    """

    def __init__(self, config_file: str = 'config.json', env_file: str = '.env'):
        """
        Initialize configuration manager.

        Args:
            config_file: Path to JSON configuration file
            env_file: Path to .env file
        """
        self.config_file = config_file
        self.env_file = env_file

        self._load_env_file()
        self.config = self._load_config()

        logger.debug("Configuration loaded from: %s", self._get_config_sources())

    def _load_env_file(self) -> None:
        """Load environment variables from .env file if available."""
        if DOTENV_AVAILABLE and os.path.exists(self.env_file):
            load_dotenv(self.env_file)
            logger.debug("Loaded environment variables from %s", self.env_file)
        elif os.path.exists(self.env_file):
            logger.warning("Found %s but python-dotenv is not installed", self.env_file)

    def _get_config_sources(self) -> str:
        """Get string describing configuration sources."""
        sources = ["defaults"]

        if os.path.exists(self.config_file):
            sources.append(Path(self.config_file).name)

        if self.is_env_configured() or any(os.getenv(name) for name, _, _ in ENV_OVERRIDES):
            sources.append("environment variables")

        return " -> ".join(sources)

    def _load_config(self) -> Dict[str, Any]:
        """
        Merge defaults, the JSON file and environment variables, later layers winning.

        Returns:
            Configuration dictionary
        """
        config = self._get_default_config()

        json_config = self._load_json_config()
        if json_config:
            config = self._deep_merge(config, json_config)

        env_config = self._load_env_config()
        config = self._deep_merge(config, env_config)

        return config

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default configuration values."""
        return {
            "data": {
                "input": None,
                "generator": "gmm2",
                "n": None,
                "header": False,
                "labels": False
            },
            "preprocessing": {
                "pca_dim": None
            },
            "tsne": {
                "perplexity": 30.0,
                "max_iter": 1000,
                "learning_rate": 200.0,
                "exaggeration": 12.0,
                "exaggeration_iters": 250,
                "init": "pca"
            },
            "loo": {
                "approximation": "exact",
                "grid_resolution": 50,
                "steps": 51,
                "trials": 20,
                "rerun_iterations": 250,
                "mode": "add"
            },
            "perturbation": {
                "length": None,
                "directions": 3,
                "approximation": "approx2",
                "prescreen": False,
                "min_samples": 10
            },
            "singularity": {
                "method": "tsne",
                "umap_a": 1.577,
                "umap_b": 0.895,
                "largevis_gamma": 7.0,
                "largevis_neighbors": 15
            },
            "selection": {
                "candidates": [5, 10, 20, 30, 50, 75, 100],
                "fraction": 0.05,
                "rule": "log"
            },
            "metrics": {
                "k": None
            },
            "output": {
                "dir": "nescope_out"
            },
            "app": {
                "threads": None,
                "seed": 0,
                "log_level": "INFO",
                "progress": None
            }
        }

    def _load_json_config(self) -> Dict[str, Any]:
        """Load configuration from JSON file."""
        try:
            with open(self.config_file, 'r') as f:
                return json.load(f)
        except FileNotFoundError:
            return {}
        except json.JSONDecodeError as e:
            logger.error("Error parsing %s: %s", self.config_file, e)
            return {}

    def _load_env_config(self) -> Dict[str, Any]:
        """Load configuration from NESCOPE_* environment variables."""
        config: Dict[str, Any] = {}

        for name, path, parse in ENV_OVERRIDES:
            raw = os.getenv(name)
            if not raw:
                continue
            try:
                value = parse(raw)
            except ValueError:
                logger.warning("Invalid %s value %r, using default", name, raw)
                continue
            section, key = path.split('.')
            config.setdefault(section, {})[key] = value

        if os.getenv('NESCOPE_PROGRESS'):
            config.setdefault('app', {})['progress'] = os.getenv('NESCOPE_PROGRESS').lower() in ('true', '1', 'yes', 'on')

        return config

    def _deep_merge(self, base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
        """
        Deep merge two dictionaries.

        Args:
            base: Base dictionary
            update: Dictionary to merge into base

        Returns:
            Merged dictionary
        """
        result = base.copy()

        for key, value in update.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._deep_merge(result[key], value)
            else:
                result[key] = value

        return result

    def get(self, path: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation.

        Args:
            path: Configuration path (e.g., 'tsne.perplexity')
            default: Default value if path not found

        Returns:
            Configuration value or default
        """
        keys = path.split('.')
        value = self.config

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default

        return value

    def set(self, path: str, value: Any) -> None:
        """
        Set configuration value using dot notation.
        Note: This only affects the in-memory configuration.

        Args:
            path: Configuration path (e.g., 'app.threads')
            value: Value to set
        """
        keys = path.split('.')
        config = self.config

        for key in keys[:-1]:
            if key not in config:
                config[key] = {}
            config = config[key]

        config[keys[-1]] = value

    def apply_overrides(self, overrides: Dict[str, Any]) -> None:
        """Set every dot-path whose value is not None (command-line flags)."""
        for path, value in overrides.items():
            if value is not None:
                self.set(path, value)

    def get_section(self, section: str) -> Dict[str, Any]:
        """
        Get entire configuration section.

        Args:
            section: Section name

        Returns:
            Section configuration or empty dict
        """
        return self.config.get(section, {})

    def is_env_configured(self) -> bool:
        """
        Check if a .env file is being used for configuration.

        Returns:
            True if .env file exists and dotenv is available
        """
        return DOTENV_AVAILABLE and os.path.exists(self.env_file)

    def get_config_status(self) -> Dict[str, Any]:
        """
        Get configuration status and information.

        Returns:
            Dictionary with configuration status
        """
        input_file = self.get('data.input')
        return {
            'env_file_exists': os.path.exists(self.env_file),
            'json_file_exists': os.path.exists(self.config_file),
            'dotenv_available': DOTENV_AVAILABLE,
            'using_env_vars': self.is_env_configured(),
            'input_configured': bool(input_file),
            'input_exists': bool(input_file) and os.path.exists(input_file),
            'config_sources': self._get_config_sources()
        }

    def validate_configuration(self, n: Optional[int] = None, d: Optional[int] = None) -> List[str]:
        """
        Validate configuration and return list of warnings.

        Args:
            n: Number of input points, when already known
            d: Input dimension, when already known

        Returns:
            List of validation warnings
        """
        warnings = []

        input_file = self.get('data.input')
        if input_file and not os.path.exists(input_file):
            warnings.append(f"Input file not found: {input_file}")

        n = n if n is not None else (None if input_file else self.get('data.n'))
        perplexity = self.get('tsne.perplexity')
        if n is not None and perplexity is not None and perplexity >= n:
            warnings.append(f"Perplexity {perplexity} must be smaller than the number of points ({n})")

        pca_dim = self.get('preprocessing.pca_dim')
        if pca_dim is not None and d is not None and pca_dim > d:
            warnings.append(f"PCA width {pca_dim} exceeds the input width {d}; PCA will be skipped")

        candidates = self.get('selection.candidates') or []
        if len(candidates) < 3:
            warnings.append("Perplexity selection needs at least 3 candidates")

        threads = self.get('app.threads')
        if threads is not None and threads < 1:
            warnings.append(f"Thread count {threads} is not positive; using all cores")

        return warnings
