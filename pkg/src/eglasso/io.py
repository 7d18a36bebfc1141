"""File formats.

Matrices: headerless dense CSV, or JSON ``{"d": d, "entries": [row-major]}``.
Edge sets: JSON ``{"d": d, "edges": [[i, j], ...]}`` with 1-based nodes.
Samples: CSV with a header row of node labels, one observation per row.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .hr_core import EdgeSet


class DataError(ValueError):
    """Malformed or unusable input data."""


def fmt_float(x):
    return format(float(x), ".17g")


def matrix_to_json(a):
    a = np.asarray(a, dtype=float)
    return {"d": int(a.shape[0]), "entries": [float(v) for v in a.ravel()]}


def matrix_from_json(obj):
    try:
        d = int(obj["d"])
        entries = np.asarray(obj["entries"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid matrix JSON: {exc}") from exc
    if entries.ndim == 2:
        entries = entries.ravel()
    if entries.size != d * d:
        raise DataError(f"matrix JSON has {entries.size} entries, expected {d * d}")
    return entries.reshape(d, d)


def edges_to_json(edges: EdgeSet):
    return {"d": edges.d, "edges": [[i + 1, j + 1] for i, j in edges.sorted()]}


def edges_from_json(obj):
    try:
        d = int(obj["d"])
        pairs = [(int(i) - 1, int(j) - 1) for i, j in obj["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid edge-set JSON: {exc}") from exc
    try:
        return EdgeSet(d, pairs)
    except ValueError as exc:
        raise DataError(f"invalid edge-set JSON: {exc}") from exc


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def write_matrix_csv(path, a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in a:
            writer.writerow([fmt_float(v) for v in row])


def read_matrix(path):
    """Read a square matrix from ``.json`` or headerless ``.csv``."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        obj = read_json(path)
        if isinstance(obj, dict) and "entries" not in obj:
            for key in ("S_star", "theta_lasso", "theta"):
                if key in obj:
                    obj = obj[key]
                    break
        return matrix_from_json(obj)
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
    a = np.asarray(rows, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"{path}: expected a square matrix, got {len(rows)} rows")
    return a


def read_sample_csv(path, min_rows=2, min_cols=2):
    """Return ``(labels, values)`` from a CSV with a header row."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        labels = [h.strip() for h in header]
        if len(labels) < min_cols:
            raise DataError(f"{path}: need at least {min_cols} columns, found {len(labels)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(labels):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(labels)} fields, found {len(row)}"
                )
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            if not all(np.isfinite(vals)):
                raise DataError(f"{path}: line {lineno}: non-finite value")
            rows.append(vals)
    if len(rows) < min_rows:
        raise DataError(f"{path}: need at least {min_rows} data rows, found {len(rows)}")
    return labels, np.asarray(rows, dtype=float)


def write_sample_csv(path, x, labels=None):
    x = np.asarray(x, dtype=float)
    if labels is None:
        labels = [f"X{j + 1}" for j in range(x.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(labels)
        for row in x:
            writer.writerow([fmt_float(v) for v in row])


def edges_to_dot(edges: EdgeSet, labels=None, weights=None, name="extremal_graph"):
    """Graphviz ``graph`` source; ``weights`` is an optional d x d matrix used as edge labels."""
    if labels is None:
        labels = [str(i + 1) for i in range(edges.d)]
    lines = [f"graph {name} {{"]
    for i, lab in enumerate(labels):
        lines.append(f'  n{i + 1} [label="{lab}"];')
    for i, j in edges.sorted():
        attr = ""
        if weights is not None:
            attr = f' [label="{float(weights[i][j]):.4g}"]'
        lines.append(f"  n{i + 1} -- n{j + 1}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"
