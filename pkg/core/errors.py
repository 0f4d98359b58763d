"""
Exception hierarchy for nescope.

Every numerical failure derives from NumericalError so the CLI can map it to a
single exit code, while data and usage problems keep the builtin base classes
callers already expect (ValueError, OSError).
"""

from typing import Any, Optional

import numpy as np


class NescopeError(Exception):
    """Base class for all nescope errors."""


class UsageError(NescopeError):
    """Invalid command line usage (unknown subcommand, bad flag)."""

    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class DataFormatError(NescopeError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None,
                 row: Optional[int] = None, column: Optional[int] = None):
        location = []
        if path is not None:
            location.append(str(path))
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)
        self.path = path
        self.row = row
        self.column = column


class SpecValidationError(NescopeError, ValueError):
    """A generator or configuration spec violates its invariants."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class NumericalError(NescopeError):
    """Base class for numerical failures (CLI exit code 70)."""


class CalibrationError(NumericalError):
    """Bandwidth search failed for one row of the distance matrix."""

    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


class DivergenceError(NumericalError):
    """The t-SNE optimizer produced a non-finite loss."""

    def __init__(self, message: str, iteration: int, last_state: np.ndarray):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.last_state = last_state


class LooSolveError(NumericalError):
    """No start of the multi-start LOO-map search converged."""

    def __init__(self, message: str, best_iterate: Optional[np.ndarray] = None,
                 gradient_norm: float = float("nan"), context: Any = None):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.gradient_norm = gradient_norm
        self.context = context


class SingularCovarianceError(NumericalError):
    """A class covariance stayed singular after regularization."""

    def __init__(self, message: str, label: Any):
        super().__init__(f"class {label}: {message}")
        self.label = label
