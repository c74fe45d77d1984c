"""CSV and JSON readers/writers; every write goes through a temp file and rename."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import Dataset

__all__ = [
    "read_table",
    "read_dataset",
    "read_candidates",
    "read_sequence",
    "read_long_grid",
    "has_index_column",
    "write_dataset",
    "atomic_write",
    "dump_json",
    "to_jsonable",
    "csv_text",
]


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(obj):
    """Convert numpy scalars/arrays; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)) or hasattr(obj, "__float__"):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dump_json(obj) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None
    if data.size == 0:
        data = data.reshape(0, len(header))
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match the header")
    return header, data


def _x_columns(header, path):
    xs = [h for h in header if h.startswith("x") and h[1:].isdigit()]
    expected = [f"x{i}" for i in range(1, len(xs) + 1)]
    if not xs or xs != expected or header[: len(xs)] != expected:
        raise ValueError(f"{path}: header must start with x1,...,xd")
    return len(xs)


def read_dataset(path) -> Dataset:
    """``x1,...,xd,f[,cost]``."""
    header, data = read_table(path)
    d = _x_columns(header, path)
    rest = header[d:]
    if rest not in (["f"], ["f", "cost"]):
        raise ValueError(f"{path}: expected columns x1..x{d},f[,cost], got {header}")
    costs = data[:, d + 1] if "cost" in rest else None
    return Dataset(data[:, :d], data[:, d], costs)


def read_long_grid(path):
    """``x1,...,xd,t,f`` long format; returns ``(points, t, f)``."""
    header, data = read_table(path)
    d = _x_columns(header, path)
    if header[d:] != ["t", "f"]:
        raise ValueError(f"{path}: expected columns x1..x{d},t,f")
    return data[:, :d], data[:, d], data[:, d + 1]


def has_index_column(path) -> bool:
    header, _ = read_table(path)
    return "t" in header


def read_candidates(path):
    """``x1,...,xd,cost``."""
    header, data = read_table(path)
    d = _x_columns(header, path)
    if header[d:] != ["cost"]:
        raise ValueError(f"{path}: expected columns x1..x{d},cost")
    return data[:, :d], data[:, d]


def read_sequence(path):
    """``x,y`` (or just ``y``) rows, coarse to fine."""
    header, data = read_table(path)
    if header == ["y"]:
        return None, data[:, 0]
    if header != ["x", "y"]:
        raise ValueError(f"{path}: expected columns x,y or y")
    return data[:, 0], data[:, 1]


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_dataset(path, dataset: Dataset) -> None:
    d = dataset.dim
    header = [f"x{i + 1}" for i in range(d)] + ["f"] + (["cost"] if dataset.costs is not None else [])
    rows = []
    for i in range(dataset.n):
        row = list(dataset.points[i]) + [float(dataset.values[i])]
        if dataset.costs is not None:
            row.append(dataset.costs[i])
        rows.append(row)
    atomic_write(path, csv_text(header, rows))
