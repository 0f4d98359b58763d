"""
CSV ingestion and export.

Format: comma separated, '.' decimal point, an optional single header row and,
optionally, integer labels in the final column.
"""

import logging
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.errors import DataFormatError
from data.generators import InputMatrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"
NAN_TEXT = "nan"


def _read_cells(path: Path, header: bool) -> pd.DataFrame:
    """All cells as stripped strings; short rows leave missing cells."""
    try:
        frame = pd.read_csv(path, header=None, skiprows=1 if header else 0, dtype=str,
                            keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise DataFormatError("no data rows", str(path))
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        row = int(match.group(1)) if match else None
        raise DataFormatError(f"ragged row ({exc})", str(path), row)
    return frame.apply(lambda column: column.str.strip())


def load_csv(path: PathLike, header: bool = False, labels: bool = False) -> InputMatrix:
    """
    Read a rectangular numeric table.

    Args:
        path: CSV file
        header: Skip the first line
        labels: Treat the final column as integer labels

    Returns:
        InputMatrix

    Raises:
        FileNotFoundError: If the file does not exist
        DataFormatError: On ragged rows or non-numeric cells (1-based row/column)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No such file: {path}")

    cells = _read_cells(path, header)
    if cells.empty:
        raise DataFormatError("no data rows", str(path))
    width = cells.shape[1]
    if labels and width < 2:
        raise DataFormatError("a label column needs at least one feature column", str(path), 1 + header)

    missing = cells.isna().to_numpy() | (cells == "").to_numpy()
    numeric = cells.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = missing | ~np.isfinite(numeric)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        row, column = int(i) + 1 + header, int(j) + 1
        if missing[i, j]:
            raise DataFormatError(f"expected {width} fields", str(path), row)
        cell = cells.iat[i, j]
        kind = "non-numeric" if np.isnan(numeric[i, j]) and cell.lower() != NAN_TEXT else "non-finite"
        raise DataFormatError(f"{kind} cell {cell!r}", str(path), row, column)

    # float() per cell keeps the written digits exact
    values = cells.to_numpy(dtype=object).astype(np.float64)
    label_values = None
    if labels:
        label_values = values[:, -1]
        fractional = np.flatnonzero(label_values != np.round(label_values))
        if fractional.size:
            i = int(fractional[0])
            raise DataFormatError(f"label {label_values[i]!r} is not an integer", str(path), i + 1 + header, width)
        values, label_values = values[:, :-1], label_values.astype(np.int64)

    logger.debug("Loaded %d×%d matrix from %s", values.shape[0], values.shape[1], path)
    return InputMatrix(np.ascontiguousarray(values), label_values)


def save_csv(matrix: Union[InputMatrix, np.ndarray], path: PathLike,
             header: Optional[Sequence[str]] = None, labels: bool = True) -> Path:
    """
    Write a matrix with full float precision (17 significant digits).

    Args:
        matrix: InputMatrix or plain array
        path: Destination file (parent directories are created)
        header: Optional column names, written as a single header row
        labels: Append the InputMatrix labels as a final integer column

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(matrix, InputMatrix):
        values, label_column = matrix.values, matrix.labels if labels else None
    else:
        values, label_column = np.atleast_2d(np.asarray(matrix, dtype=np.float64)), None

    frame = pd.DataFrame(values)
    if label_column is not None:
        frame[frame.shape[1]] = np.asarray(label_column).astype(np.int64)
    frame.to_csv(path, header=list(header) if header is not None else False, index=False,
                 float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a small mixed-type table; floats keep full precision, booleans become 0/1."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(header))
    for name in frame.select_dtypes(include="bool").columns:
        frame[name] = frame[name].astype(np.int64)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep=NAN_TEXT, lineterminator="\n")
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    """Read a table written by write_table."""
    return pd.read_csv(path, float_precision="round_trip")
