"""
Host resource queries used to size thread pools and warn about dense n×n work.
"""

import logging
from typing import Any, Dict

import psutil

logger = logging.getLogger(__name__)

# Exact t-SNE keeps about this many dense float64 n×n matrices alive at once.
DENSE_MATRICES = 6


class SystemResources:
    """Host CPU and memory statistics."""

    @staticmethod
    def get_cpu_count() -> int:
        """
        Get the number of logical cores.

        Returns:
            Logical core count, at least 1
        """
        try:
            return psutil.cpu_count(logical=True) or 1
        except Exception:
            return 1

    @staticmethod
    def get_memory_info() -> Dict[str, Any]:
        """
        Get memory usage information.

        Returns:
            Dictionary with memory statistics
        """
        try:
            memory = psutil.virtual_memory()
            return {
                'total': memory.total,
                'available': memory.available,
                'percent': memory.percent,
                'total_gb': memory.total / (1024**3),
                'available_gb': memory.available / (1024**3)
            }
        except Exception:
            return {'total': 0, 'available': 0, 'percent': 0, 'total_gb': 0, 'available_gb': 0}

    @staticmethod
    def dense_bytes(n: int) -> int:
        """Estimated peak bytes held by dense n×n float64 matrices."""
        return DENSE_MATRICES * n * n * 8

    @staticmethod
    def check_capacity(n: int) -> Dict[str, Any]:
        """
        Compare the dense-matrix estimate for n points with available memory.

        Returns:
            Dictionary with the estimate, the available memory and a warning
            (None when the estimate fits in half the available memory)
        """
        required = SystemResources.dense_bytes(n)
        available = SystemResources.get_memory_info()['available']
        warning = None
        if available and required > available / 2:
            warning = (f"Exact t-SNE on {n} points needs about {required / 1024**3:.1f} GB; "
                       f"only {available / 1024**3:.1f} GB available")
            logger.warning(warning)
        return {'required': required, 'available': available, 'warning': warning}
