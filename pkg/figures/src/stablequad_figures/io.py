"""Readers for the three on-disk formats the figure scripts consume.

The formats are owned by the ``stablequad`` command-line tool; this
package depends only on the files, never on the library, so figures can
be rendered anywhere the artifacts were copied to.

* Trajectory CSV — header ``t,x1,...,xn``, one snapshot per row.
* Sweep CSV — header ``param,value,method,mean_relative_l2,
  certificate_valid,diverged_count,status,model_file``.
* Model JSON — ``{"schema": "stablequad-model-v1", "A": ..., ...}``.
"""

import csv
import json
from pathlib import Path

import numpy as np

MODEL_SCHEMA = "stablequad-model-v1"

SWEEP_COLUMNS = (
    "param",
    "value",
    "method",
    "mean_relative_l2",
    "certificate_valid",
    "diverged_count",
    "status",
    "model_file",
)


class SchemaError(Exception):
    """An input file does not match the format it was claimed to be."""


def _open_text(path):
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"{path}: no such file")
    return path


def read_trajectory(path):
    """Trajectory CSV -> (times (T,), states (T, n))."""
    path = _open_text(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise SchemaError(f"{path}: expected a trajectory CSV with header t,x1,...,xn")
    header = rows[0]
    expected = ["t"] + [f"x{i}" for i in range(1, len(header))]
    if header != expected:
        raise SchemaError(f"{path}: malformed trajectory header {header[:4]}...")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric trajectory entry ({exc})") from exc
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(header):
        raise SchemaError(f"{path}: trajectory body does not match its header")
    return data[:, 0], data[:, 1:]


def read_sweep(path):
    """Sweep CSV -> list of row dicts (strings, as stored)."""
    path = _open_text(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SWEEP_COLUMNS:
            raise SchemaError(
                f"{path}: expected sweep columns {','.join(SWEEP_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: sweep file has no rows")
    return rows


def sweep_curves(rows, param):
    """Group usable sweep rows into per-method (values, errors) curves.

    Cells that failed or went unstable carry no parseable error and are
    simply absent from the returned curves (missing markers).
    """
    if any(r["param"] != param for r in rows):
        found = sorted({r["param"] for r in rows})
        raise SchemaError(f"sweep file varies {found}, expected {param!r}")
    curves = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        try:
            x = float(row["value"])
            y = float(row["mean_relative_l2"])
        except (TypeError, ValueError):
            continue
        curves.setdefault(row["method"], []).append((x, y))
    return {
        method: tuple(np.array(v) for v in zip(*sorted(points)))
        for method, points in curves.items()
    }


def read_model(path):
    """Model JSON -> dict with operator arrays under A, H, B."""
    path = _open_text(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("schema") != MODEL_SCHEMA:
        raise SchemaError(f"{path}: expected a {MODEL_SCHEMA} model file")
    out = dict(doc)
    try:
        for key in ("A", "H", "B"):
            out[key] = np.asarray(doc[key], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: model operators malformed ({exc})") from exc
    if out["A"].ndim != 2 or out["A"].shape[0] != out["A"].shape[1]:
        raise SchemaError(f"{path}: A must be square, got shape {out['A'].shape}")
    return out
