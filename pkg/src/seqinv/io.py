"""CSV and JSON serialisation.

CSV output uses a header row, comma separators and ``\\n`` line endings;
floats are written with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .model import Observations


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def csv_text(header: list[str], rows: Iterable, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        # JSON has no inf/nan; keep them readable as strings
        return v if math.isfinite(v) else str(v)
    return value


def json_text(data) -> str:
    return json.dumps(_jsonable(data), indent=2, sort_keys=False) + "\n"


def emit(text: str, path: str | None, stream: TextIO) -> None:
    """Write to ``path`` when given, else to ``stream``."""
    if path is None or path == "-":
        stream.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def observations_csv(obs: Observations, n_equiv: bool = True) -> str:
    seed = obs.seed if isinstance(obs.seed, (int, np.integer)) or obs.seed is None else \
        ":".join(str(s) for s in obs.seed)
    comment = f"eps={fmt(obs.eps)},seed={fmt(seed)},n={obs.n}"
    return csv_text(["i", "y"], ((i, v) for i, v in enumerate(obs.y, start=1)), comment)


def read_observations(path: str) -> Observations:
    """Inverse of :func:`observations_csv`; ``eps`` comes from the comment line."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '# eps=...' header line")
    meta = dict(part.split("=", 1) for part in lines[0][1:].strip().split(","))
    if "eps" not in meta:
        raise ValueError(f"{path}: header line has no eps")
    reader = csv.DictReader(lines[1:])
    ys = []
    for expected, row in enumerate(reader, start=1):
        if int(row["i"]) != expected:
            raise ValueError(f"{path}: indices must run 1..N in order")
        ys.append(float(row["y"]))
    if not ys:
        raise ValueError(f"{path}: no observations")
    seed = meta.get("seed") or None
    return Observations(np.array(ys), float(meta["eps"]), seed)


def result_csv(result) -> str:
    cols = result.columns()
    return csv_text(cols, ([row.get(c) for c in cols] for row in result.rows))
