"""JSON and CSV emission for reports.

JSON keeps the insertion order of keys and prints floats with 17 significant
digits, so identical inputs give byte-identical files. Non-finite floats are
written as null, since JSON has no NaN or infinity.
"""
import csv
import io
import json
import math
import sys
from typing import Any, Iterable, Optional, Sequence

import numpy as np
import jax


def to_builtin(obj: Any) -> Any:
    """Converts numpy / jax scalars and arrays into plain python values."""
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, (np.ndarray, jax.Array)):
        return to_builtin(np.asarray(obj).tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _encode(obj: Any) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, list):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"Cannot encode {type(obj)} as JSON")


def dumps(report: dict) -> str:
    return _encode(to_builtin(report)) + "\n"


def write_json(report: dict, path: Optional[str] = None):
    text = dumps(report)
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format(v, ".17g") if isinstance(v, float) else v for v in to_builtin(list(row))]
        )
    return out.getvalue()


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], path: Optional[str] = None):
    text = csv_text(header, rows)
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
