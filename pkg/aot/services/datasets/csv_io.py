"""
CSV ingestion and output for point datasets.

Format: a header row, comma-separated decimal floats, and an optional
trailing integer column named `label`.
"""

import csv
import math
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import structlog

from aot.errors import DatasetFormatError
from aot.models.dataset import Dataset
from aot.utils.csv_format import vector_columns, write_rows

log = structlog.get_logger()

LABEL_COLUMN = "label"

PathLike = Union[str, Path]


def load_csv(path: PathLike) -> Dataset:
    """Parse a dataset CSV; errors carry the offending line number."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DatasetFormatError(f"cannot read {path}: {e}") from e

    rows = csv.reader(text.splitlines())
    header = next(rows, None)
    if header is None or not any(cell.strip() for cell in header):
        raise DatasetFormatError(f"{path} is empty", line=1)
    header = [cell.strip() for cell in header]
    labeled = header[-1] == LABEL_COLUMN
    dim = len(header) - 1 if labeled else len(header)
    if dim < 1:
        raise DatasetFormatError("no coordinate columns", line=1)
    if LABEL_COLUMN in header[:-1]:
        raise DatasetFormatError("label must be the last column", line=1)

    points: List[List[float]] = []
    labels: List[int] = []
    for line, row in enumerate(rows, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DatasetFormatError(
                f"expected {len(header)} columns, got {len(row)}", line=line
            )
        try:
            values = [float(cell) for cell in row[:dim]]
        except ValueError as e:
            raise DatasetFormatError(f"non-numeric value: {e}", line=line) from e
        if not all(math.isfinite(v) for v in values):
            raise DatasetFormatError("non-finite value", line=line)
        points.append(values)
        if labeled:
            try:
                label = int(row[-1])
            except ValueError as e:
                raise DatasetFormatError(
                    f"label must be an integer, got '{row[-1]}'", line=line
                ) from e
            if label < 0:
                raise DatasetFormatError("label must be non-negative", line=line)
            labels.append(label)

    if not points:
        raise DatasetFormatError(f"{path} has no data rows", line=2)

    label_array: Optional[np.ndarray] = np.array(labels) if labeled else None
    class_count = int(label_array.max()) + 1 if label_array is not None else 1
    log.debug("dataset loaded", path=str(path), count=len(points), dim=dim)
    return Dataset(
        points=np.array(points, dtype=np.float64),
        labels=label_array,
        class_count=class_count,
    )


def write_csv(
    path: PathLike,
    points: np.ndarray,
    labels: Optional[np.ndarray] = None,
    prefix: str = "x",
) -> None:
    """Write points (and labels) so `load_csv` reproduces them bit for bit."""
    points = np.asarray(points, dtype=np.float64)
    header = vector_columns(prefix, points.shape[1])
    if labels is not None:
        header.append(LABEL_COLUMN)
        rows = (
            [*row.tolist(), int(label)] for row, label in zip(points, labels)
        )
    else:
        rows = (row.tolist() for row in points)
    with open(path, "w", newline="") as stream:
        write_rows(stream, header, rows)
