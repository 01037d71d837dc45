"""Tests for grid CSV and manifest helpers."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.grid import ScalarField, build_grid
from src.helper_functions.field_io import (
    FIELD_COLUMNS,
    FieldFormatError,
    read_field_csv,
    read_manifest,
    write_field_csv,
    write_manifest,
    write_table,
)


def test_interior_field_csv_layout(tmp_path: Path) -> None:
    """Interior exports list i, j in 1..n in row-major order."""
    grid = build_grid(2)
    field = ScalarField(grid, np.array([[1.0, 2.0], [3.0, 4.0]]))
    path = write_field_csv(field, tmp_path / "nested" / "field.csv")
    frame = pd.read_csv(path)

    assert list(frame.columns) == FIELD_COLUMNS
    assert list(zip(frame["i"], frame["j"])) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    np.testing.assert_array_equal(read_field_csv(path, grid).values, field.values)


def test_boundary_field_csv_keeps_closure(tmp_path: Path) -> None:
    """With include_boundary the file lists nodes 0..n+1 and the closure is restored."""
    grid = build_grid(3)
    field = ScalarField.from_function(grid, lambda xs, ys: 1.0 + xs + ys, with_boundary=True)
    path = write_field_csv(field, tmp_path / "g.csv", include_boundary=True)
    loaded = read_field_csv(path, grid, include_boundary=True)

    assert len(pd.read_csv(path)) == 25
    np.testing.assert_allclose(loaded.padded(), field.padded(), rtol=1e-12)


def test_rows_may_come_in_any_order(tmp_path: Path) -> None:
    """Reading relies on the indices, not on row order."""
    grid = build_grid(2)
    path = tmp_path / "shuffled.csv"
    pd.DataFrame({"i": [2, 1, 2, 1], "j": [2, 1, 1, 2], "value": [4.0, 1.0, 3.0, 2.0]}).to_csv(path, index=False)

    np.testing.assert_array_equal(read_field_csv(path, grid).values, [[1.0, 2.0], [3.0, 4.0]])


@pytest.mark.parametrize(
    "frame,message",
    [
        (pd.DataFrame({"i": [1, 1, 2, 2], "j": [1, 2, 1, 2]}), "missing columns"),
        (pd.DataFrame({"i": [1, 1, 2], "j": [1, 2, 1], "value": [0.0, 0.0, 0.0]}), "expected 4"),
        (pd.DataFrame({"i": [1, 1, 2, 3], "j": [1, 2, 1, 1], "value": [0.0] * 4}), "outside"),
        (pd.DataFrame({"i": [1, 1, 2, 2], "j": [1, 1, 1, 2], "value": [0.0] * 4}), "twice"),
    ],
)
def test_malformed_field_csv_is_rejected(tmp_path: Path, frame: pd.DataFrame, message: str) -> None:
    """Missing columns, wrong row counts, bad indices and duplicates raise FieldFormatError."""
    path = tmp_path / "bad.csv"
    frame.to_csv(path, index=False)

    with pytest.raises(FieldFormatError, match=message):
        read_field_csv(path, build_grid(2))


def test_missing_file_is_a_format_error(tmp_path: Path) -> None:
    """Unreadable paths surface as FieldFormatError."""
    with pytest.raises(FieldFormatError, match="Could not read"):
        read_field_csv(tmp_path / "absent.csv", build_grid(2))


def test_tables_use_fixed_float_format(tmp_path: Path) -> None:
    """Result tables print floats with twelve significant decimals."""
    path = write_table(pd.DataFrame({"delta": [0.1], "iters": [3]}), tmp_path / "table.csv")

    assert path.read_text(encoding="utf-8").splitlines() == ["delta,iters", "1.000000000000e-01,3"]


def test_manifest_round_trip(tmp_path: Path) -> None:
    """Manifests keep insertion order and values as text."""
    entries = {"command": "rates", "seed": 7, "experiment.deltas": "0.1,0.01"}
    path = write_manifest(entries, tmp_path / "manifest.txt")

    assert path.read_text(encoding="utf-8").splitlines()[0] == "command = rates"
    assert read_manifest(path) == {"command": "rates", "seed": "7", "experiment.deltas": "0.1,0.01"}
