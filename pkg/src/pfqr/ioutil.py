"""File helpers: atomic writes and the pinned CSV dialect.

CSV files use comma separators, '.' decimals, a mandatory header row,
UTF-8, and LF line endings.  Curve files carry the grid in the header
(t_1,...,t_m as decimal reals) and one subject per row.  All outputs are
written to a temp file in the target directory and renamed, so an
interrupted run never leaves a truncated artifact.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fgrid import Grid


def atomic_write_text(path: str | Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_row(values) -> list[str]:
    return [repr(float(v)) for v in values]


def _parse_cell(text: str, row: int, col: int, path) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(
            f"{path}: non-numeric cell at row {row}, column {col}: {text!r}"
        ) from None


def curves_csv_text(grid: Grid, curves: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_format_row(grid.points))
    for row in np.atleast_2d(curves):
        writer.writerow(_format_row(row))
    return buf.getvalue()


def write_curves_csv(path: str | Path, grid: Grid, curves: np.ndarray):
    atomic_write_text(path, curves_csv_text(grid, curves))


def read_curves_csv(path: str | Path) -> tuple[Grid, np.ndarray]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty curves file")
    header = [_parse_cell(c, 0, j, path) for j, c in enumerate(rows[0])]
    grid = Grid(np.asarray(header))
    data = np.empty((len(rows) - 1, grid.m))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != grid.m:
            raise ConfigError(
                f"{path}: row {i} has {len(row)} cells, expected {grid.m}"
            )
        for j, cell in enumerate(row):
            data[i - 1, j] = _parse_cell(cell, i, j, path)
    return grid, data


def column_csv_text(name: str, values) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([name])
    for v in np.asarray(values, dtype=float).ravel():
        writer.writerow([repr(float(v))])
    return buf.getvalue()


def write_column_csv(path: str | Path, name: str, values):
    atomic_write_text(path, column_csv_text(name, values))


def read_column_csv(path: str | Path, column: str | None = None) -> np.ndarray:
    """Read one numeric column; by name when given, else the first."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = rows[0]
    if column is None:
        idx = 0
    else:
        try:
            idx = header.index(column)
        except ValueError:
            raise ConfigError(f"{path}: no column named {column!r}") from None
    out = np.empty(len(rows) - 1)
    for i, row in enumerate(rows[1:], start=1):
        if idx >= len(row):
            raise ConfigError(f"{path}: row {i} is missing column {idx}")
        out[i - 1] = _parse_cell(row[idx], i, idx, path)
    return out


def matrix_csv_text(names: list[str], values: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in np.atleast_2d(values):
        writer.writerow(_format_row(row))
    return buf.getvalue()


def write_matrix_csv(path: str | Path, names: list[str], values: np.ndarray):
    atomic_write_text(path, matrix_csv_text(names, values))


def read_matrix_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    names = rows[0]
    data = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(names):
            raise ConfigError(
                f"{path}: row {i} has {len(row)} cells, expected {len(names)}"
            )
        for j, cell in enumerate(row):
            data[i - 1, j] = _parse_cell(cell, i, j, path)
    return names, data
