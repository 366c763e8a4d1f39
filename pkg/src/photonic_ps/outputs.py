"""Plot-ready artifact files: CSV with a ``#`` provenance header, and JSON documents.

Floats are written with a fixed ``repr``-free format so identical runs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import __version__

FLOAT_FORMAT = "{:.12g}"


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def header_lines(config_hash: Optional[str], extra: Optional[Mapping[str, str]] = None) -> list:
    lines = [f"# photonic_ps {__version__}"]
    if config_hash is not None:
        lines.append(f"# config_hash {config_hash}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key} {value}")
    return lines


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config_hash: Optional[str] = None,
              extra: Optional[Mapping[str, str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in header_lines(config_hash, extra):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())
    return path


def read_csv(path) -> tuple:
    """Return (comment lines, column names, rows as lists of strings)."""
    comments, rows = [], []
    with open(path, newline="") as fh:
        data = [line for line in fh]
    body = []
    for line in data:
        (comments if line.startswith("#") else body).append(line.rstrip("\n"))
    reader = csv.reader(body)
    columns = next(reader)
    rows = [r for r in reader]
    return comments, columns, rows


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, doc) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(path, json.dumps(_to_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


STAGE1_COLUMNS = ("percept", "p_red", "p_blue", "p_circle", "p_square")


def stage1_rows(probabilities: Mapping[int, Sequence[float]]):
    return [[p, *[float(v) for v in probabilities[p]]] for p in sorted(probabilities)]
