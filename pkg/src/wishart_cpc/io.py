"""CSV and JSON readers/writers for matrices and samples."""
from __future__ import annotations

import csv
import io
import json
import os
from typing import TextIO

import numpy as np

from .covmodel import SpdMatrix
from .sampling import SampleMatrix


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _open_text(target, mode):
    if isinstance(target, (str, os.PathLike)):
        return open(target, mode, newline=""), True
    return target, False


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_numeric_csv(source, header: bool | None = None) -> tuple[np.ndarray, list | None]:
    """Parse a dense numeric CSV.

    With ``header=None`` the first row is taken as a header when any of its
    cells is not a number. Raises ``ValueError`` on ragged or non-numeric data.
    """
    fh, owned = _open_text(source, "r")
    try:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    finally:
        if owned:
            fh.close()
    if not rows:
        raise ValueError("CSV has no rows")
    names = None
    first = [c.strip() for c in rows[0]]
    if header is True or (header is None and not all(_is_number(c) for c in first)):
        names = first
        rows = rows[1:]
    if not rows:
        raise ValueError("CSV has a header but no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"row {i + 1} has {len(r)} fields, expected {width}")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"non-numeric value in CSV: {exc}") from exc
    if names is not None and len(names) != width:
        raise ValueError("header width does not match data width")
    return data, names


def write_numeric_csv(array, target, names=None) -> None:
    fh, owned = _open_text(target, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        if names is not None:
            w.writerow(names)
        for row in np.atleast_2d(np.asarray(array, dtype=float)):
            w.writerow([_fmt(v) for v in row])
    finally:
        if owned:
            fh.close()


def read_sample_csv(source, header: bool | None = None, label: str = "") -> SampleMatrix:
    data, _ = read_numeric_csv(source, header)
    return SampleMatrix(data, label)


def write_sample_csv(sample, target, header: bool = False) -> None:
    rows = np.asarray(sample, dtype=float)
    names = [f"v{j}" for j in range(rows.shape[1])] if header else None
    write_numeric_csv(rows, target, names)


def read_matrix_csv(source) -> SpdMatrix:
    data, _ = read_numeric_csv(source, header=False)
    return SpdMatrix(data)


def write_matrix_csv(matrix, target) -> None:
    write_numeric_csv(np.asarray(matrix, dtype=float), target)


def matrix_to_json(matrix: SpdMatrix) -> str:
    return json.dumps(matrix.to_dict())


def matrix_from_json(text: str) -> SpdMatrix:
    return SpdMatrix.from_dict(json.loads(text))


def dumps(payload) -> str:
    """JSON text; floats use the shortest repr that round-trips exactly."""
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)
