"""Problem files and tabular output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .matpoly import MatPoly, frac_matrix

__all__ = ["load_problem", "read_problem", "format_records", "write_records"]


def read_problem(obj):
    """Build ``(A, Y0)`` from ``{"dim": n, "poly": [...], "y0": [[...]]?}``."""
    if not isinstance(obj, dict) or "poly" not in obj:
        raise ValueError("problem must be a JSON object with a 'poly' entry")
    A = MatPoly.from_json(obj)
    if "y0" in obj:
        Y0 = frac_matrix(obj["y0"]).astype(float)
        if Y0.shape != (A.dim, A.dim):
            raise ValueError("y0 shape does not match dim")
    else:
        Y0 = np.eye(A.dim)
    return A, Y0


def load_problem(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return read_problem(obj)


def _plain(v):
    if isinstance(v, float):
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.floating,)):
        return _plain(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v if isinstance(v, (int, str, bool)) or v is None else str(v)


def format_records(records, fmt, fields=None):
    """Render records as CSV (one header line) or as a JSON list."""
    if fields is None:
        fields = list(records[0]) if records else []
    if fmt == "json":
        return json.dumps([{k: _plain(r.get(k)) for k in fields} for r in records], indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return buf.getvalue()


def write_records(path, text):
    """Write ``text`` atomically so a failed run never leaves a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
