"""
Matrix persistence.

Text format: a header line "M N" followed by M lines of N whitespace
separated values. CSV: one matrix row per line, no header. Both are written
with 17 significant digits, which reads back bit-exactly.
"""

import os
from pathlib import Path
from typing import Union

import numpy as np

from app.core.config import get_settings
from app.core.exceptions import MatrixFormatError
from app.core.logging_config import get_logger

logger = get_logger(__name__)

PathLike = Union[str, os.PathLike]


def _fmt() -> str:
    return f"%.{get_settings().MATRIX_PRECISION}g"


def _as_matrix(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        return matrix[:, None]
    if matrix.ndim != 2:
        raise MatrixFormatError("<memory>", f"expected a 2-D matrix, got {matrix.ndim} dimensions")
    return matrix


def write_matrix_text(path: PathLike, matrix: np.ndarray) -> None:
    """Write ``matrix`` in the "M N" header text format."""
    matrix = _as_matrix(matrix)
    m, n = matrix.shape
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{m} {n}\n")
        fmt = _fmt()
        for row in matrix:
            handle.write(" ".join(fmt % value for value in row) + "\n")
    logger.debug(f"Wrote {m}x{n} matrix to {path}")


def read_matrix_text(path: PathLike) -> np.ndarray:
    """Read a matrix written by ``write_matrix_text``."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = [line for line in handle.read().splitlines() if line.strip()]
    except OSError as e:
        raise MatrixFormatError(str(path), f"cannot read file: {e}") from e
    if not lines:
        raise MatrixFormatError(str(path), "empty file")

    header = lines[0].split()
    try:
        m, n = (int(token) for token in header)
    except ValueError as e:
        raise MatrixFormatError(str(path), f"bad header {lines[0]!r}, expected 'M N'") from e
    if len(lines) - 1 != m:
        raise MatrixFormatError(str(path), f"header declares {m} rows, found {len(lines) - 1}")

    matrix = np.empty((m, n))
    for index, line in enumerate(lines[1:]):
        tokens = line.split()
        if len(tokens) != n:
            raise MatrixFormatError(str(path), f"row {index + 1} has {len(tokens)} values, expected {n}")
        try:
            matrix[index] = [float(token) for token in tokens]
        except ValueError as e:
            raise MatrixFormatError(str(path), f"row {index + 1}: {e}") from e
    return matrix


def write_matrix_csv(path: PathLike, matrix: np.ndarray) -> None:
    """Write ``matrix`` as headerless CSV."""
    matrix = _as_matrix(matrix)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, matrix, fmt=_fmt(), delimiter=",")


def read_matrix_csv(path: PathLike) -> np.ndarray:
    """Read a headerless CSV matrix."""
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise MatrixFormatError(str(path), str(e)) from e
