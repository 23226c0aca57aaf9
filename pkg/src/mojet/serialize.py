"""JSON/CSV emission helpers: reproducible float formatting and file writing.

Floats are printed with 17 significant digits, which round-trips every
finite IEEE-754 double bit-exactly. CSV output follows RFC 4180 quoting.
"""

from __future__ import annotations

import csv
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ValidationError

FLOAT_FORMAT = "%.17g"


def fmt_float(x: float) -> str:
    """Render a float at 17 significant digits (bit-exact round trip)."""
    if not math.isfinite(x):
        raise ValidationError(f"cannot serialize non-finite value {x!r}")
    return FLOAT_FORMAT % float(x)


def vector_to_list(v: np.ndarray) -> list[float]:
    return [float(x) for x in np.asarray(v, dtype=float).ravel()]


def matrix_to_lists(m: np.ndarray) -> list[list[float]]:
    m = np.asarray(m, dtype=float)
    return [[float(x) for x in row] for row in m]


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays so json.dump accepts them."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def dump_json(path, obj: Any) -> None:
    """Write JSON with sorted keys so identical content is byte-identical."""
    text = json.dumps(to_jsonable(obj), sort_keys=True, indent=2)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def load_json(path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """RFC-4180 CSV with floats at 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            out = []
            for cell in row:
                if isinstance(cell, (float, np.floating)):
                    out.append(fmt_float(float(cell)))
                elif isinstance(cell, (int, np.integer)):
                    out.append(str(int(cell)))
                else:
                    out.append(cell)
            writer.writerow(out)
