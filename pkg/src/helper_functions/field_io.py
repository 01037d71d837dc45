"""Read and write grid fields, result tables and run manifests as plain text."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

try:
    from ..grid import Grid, ScalarField
except ImportError:
    from grid import Grid, ScalarField

FIELD_COLUMNS = ["i", "j", "value"]
FLOAT_FORMAT = "%.12e"


class FieldFormatError(ValueError):
    """Raised when a grid CSV does not match the expected layout."""


def field_frame(values: np.ndarray, *, offset: int = 1) -> pd.DataFrame:
    """Flatten a 2D nodal array into ``i,j,value`` rows in row-major order."""
    rows, cols = values.shape
    i_index, j_index = np.meshgrid(np.arange(rows) + offset, np.arange(cols) + offset, indexing="ij")
    return pd.DataFrame(
        {"i": i_index.ravel(), "j": j_index.ravel(), "value": np.asarray(values, dtype=float).ravel()},
        columns=FIELD_COLUMNS,
    )


def write_field_csv(field: ScalarField, path: str | Path, *, include_boundary: bool = False) -> Path:
    """Write a field as ``i,j,value`` rows.

    Parameters
    ----------
    field : ScalarField
        Field to export.
    path : str | Path
        Destination CSV; parent directories are created.
    include_boundary : bool, optional
        Write all ``(n+2)^2`` nodes with indices ``0..n+1`` instead of the interior
        nodes ``1..n``.

    Returns
    -------
    Path
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if include_boundary:
        frame = field_frame(field.padded(), offset=0)
    else:
        frame = field_frame(field.values)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_field_csv(path: str | Path, grid: Grid, *, include_boundary: bool = False) -> ScalarField:
    """Load a field written by :func:`write_field_csv`.

    With ``include_boundary`` the file must list every node ``0..n+1`` and the result
    carries the boundary entries as its closure; otherwise it lists the interior nodes
    and the result uses the implicit-zero closure.

    Raises
    ------
    FieldFormatError
        Raised for missing columns, missing or duplicated nodes, or indices outside
        the grid.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise FieldFormatError(f"Could not read grid CSV {path}: {exc}") from exc

    missing = [column for column in FIELD_COLUMNS if column not in frame.columns]
    if missing:
        raise FieldFormatError(f"Grid CSV {path} is missing columns: {', '.join(missing)}")

    low, high = (0, grid.n + 1) if include_boundary else (1, grid.n)
    size = high - low + 1
    # Every node must appear exactly once; order in the file is not relied on.
    if len(frame) != size * size:
        raise FieldFormatError(f"Grid CSV {path} has {len(frame)} rows, expected {size * size} for n={grid.n}.")
    i_index = frame["i"].to_numpy(dtype=int)
    j_index = frame["j"].to_numpy(dtype=int)
    if i_index.min() < low or i_index.max() > high or j_index.min() < low or j_index.max() > high:
        raise FieldFormatError(f"Grid CSV {path} has indices outside {low}..{high}.")
    values = np.full((size, size), np.nan)
    values[i_index - low, j_index - low] = frame["value"].to_numpy(dtype=float)
    if np.isnan(values).any():
        raise FieldFormatError(f"Grid CSV {path} lists some nodes twice and misses others.")

    if include_boundary:
        return ScalarField(grid, values[1:-1, 1:-1], values)
    return ScalarField(grid, values)


def write_table(frame: pd.DataFrame, path: str | Path) -> Path:
    """Write a result table with a fixed float format so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_manifest(entries: Mapping[str, object], path: str | Path) -> Path:
    """Write ``key = value`` lines in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {value}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> dict[str, str]:
    """Parse a manifest written by :func:`write_manifest`."""
    entries: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        entries[key] = value
    return entries
