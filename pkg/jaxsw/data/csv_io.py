"""
CSV ingestion for point clouds.

Contract: one row per point, d numeric columns, optionally a final column
named `weight`. A first row containing any non-numeric cell is a header; a
`weight` column can only be declared through the header. Without weights the
measure is uniform.
"""
import csv
from typing import Optional

import numpy as np

from jaxsw.common.errors import CsvParseError, InvalidMeasureError
from jaxsw.data.measures import EmpiricalMeasure

WEIGHT_COLUMN = "weight"


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_measure_csv(path: str) -> EmpiricalMeasure:
    with open(path, newline="", encoding="utf-8") as f:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(f)) if row and any(c.strip() for c in row)]
    if not rows:
        raise CsvParseError(path, 1, 1, "no data rows")

    has_weight = False
    first_line, first = rows[0]
    if not all(_is_number(c) for c in first):
        has_weight = first[-1].strip().lower() == WEIGHT_COLUMN
        rows = rows[1:]
        if not rows:
            raise CsvParseError(path, first_line, 1, "header without data rows")

    width = len(rows[0][1])
    values = np.empty((len(rows), width), dtype=np.float64)
    for r, (line, row) in enumerate(rows):
        if len(row) != width:
            raise CsvParseError(
                path, line, min(len(row), width) + 1, f"expected {width} columns, got {len(row)}"
            )
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise CsvParseError(path, line, c + 1, f"not a number: {cell!r}") from None
            if not np.isfinite(values[r, c]):
                raise CsvParseError(path, line, c + 1, f"not a finite number: {cell!r}")

    if has_weight:
        if width < 2:
            raise CsvParseError(path, first_line, 1, "weight column without coordinates")
        points, weights = values[:, :-1], values[:, -1]
    else:
        points, weights = values, None
    try:
        return EmpiricalMeasure.create(points, weights)
    except InvalidMeasureError as e:
        raise CsvParseError(path, rows[0][0], 1, str(e)) from e


def write_measure_csv(measure: EmpiricalMeasure, path: str, with_weights: Optional[bool] = None):
    points = np.asarray(measure.points)
    weights = np.asarray(measure.weights)
    if with_weights is None:
        with_weights = not measure.is_uniform
    header = [f"x{i}" for i in range(points.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        if with_weights:
            writer.writerow(header + [WEIGHT_COLUMN])
            for row, w in zip(points, weights):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(w))])
        else:
            writer.writerow(header)
            for row in points:
                writer.writerow([repr(float(v)) for v in row])
