"""Atomic CSV/JSON output for grid scans and reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """Shortest round-tripping text for a float; negative zero prints as 0."""
    x = float(x) + 0.0
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    text = repr(x)
    return text[:-2] if text.endswith(".0") else text


def fmt_point(p) -> str:
    return ",".join(fmt(t) for t in np.ravel(p))


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class GridTable:
    """Rows of (coordinates, values) plus one summary row of per-column max and mean."""

    def __init__(self, coord_names, value_names, meta: dict | None = None):
        self.coord_names = list(coord_names)
        self.value_names = list(value_names)
        self.meta = dict(meta or {})
        self.rows: list[tuple[list, list]] = []

    def add(self, coords, values) -> None:
        self.rows.append((list(np.ravel(coords)), list(np.ravel(values))))

    def extend(self, coords, values) -> None:
        coords = np.atleast_2d(coords)
        values = np.asarray(values, dtype=float).reshape(len(coords), -1)
        for c, v in zip(coords, values):
            self.add(c, v)

    def summary(self) -> dict:
        vals = np.array([v for _, v in self.rows], dtype=float).reshape(len(self.rows), -1)
        return {
            "max": {n: float(np.max(vals[:, i])) for i, n in enumerate(self.value_names)},
            "mean": {n: float(np.mean(vals[:, i])) for i, n in enumerate(self.value_names)},
            "count": len(self.rows),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        mean_cols = [f"mean_{n}" for n in self.value_names]
        writer.writerow(["kind", *self.coord_names, *self.value_names, *mean_cols])
        for coords, values in self.rows:
            writer.writerow(["data", *(fmt(c) for c in coords), *(fmt(v) for v in values),
                             *([""] * len(mean_cols))])
        s = self.summary()
        writer.writerow(["summary", *([""] * len(self.coord_names)),
                         *(fmt(s["max"][n]) for n in self.value_names),
                         *(fmt(s["mean"][n]) for n in self.value_names)])
        return buf.getvalue()

    def to_json(self) -> str:
        return dumps_json({
            "columns": self.coord_names + self.value_names,
            "rows": [coords + values for coords, values in self.rows],
            "summary": self.summary(),
            "meta": self.meta,
        })

    def write(self, path, fmt_name: str = "csv") -> Path:
        return atomic_write(path, self.to_csv() if fmt_name == "csv" else self.to_json())
