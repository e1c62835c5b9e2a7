"""Plain-text readers and writers for data matrices, graphs, histories and manifests.

Numbers are written with ``repr``-style round-trip precision (17 significant
digits), so files written by one run can be diffed against another.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from .exceptions import ValidationError

BUILD_ID = "ddcd-0.1.0"


def fmt(x) -> str:
    return repr(float(x))


def _parse_float(text, path, line):
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"{path}:{line}: not a number: {text!r}") from None


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


# ------------------------------------------------------------------ matrices


def write_matrix_csv(path, X, column_names=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if column_names is not None:
            w.writerow(column_names)
        for row in X:
            w.writerow([fmt(v) for v in row])


def read_matrix_csv(path):
    """Read a numeric CSV; returns ``(X, column_names or None)``.

    A first row that is not entirely numeric is taken as a header. Rows with
    a different field count raise ``ValidationError`` naming the line.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    names = None
    rows = []
    width = None
    with open(path, newline="") as fh:
        for line, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            fields = [f.strip() for f in fields]
            if line == 1 and not all(_is_number(f) for f in fields):
                names = fields
                width = len(fields)
                continue
            if width is None:
                width = len(fields)
            if len(fields) != width:
                raise ValidationError(f"{path}:{line}: expected {width} fields, found {len(fields)}")
            rows.append([_parse_float(f, path, line) for f in fields])
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return np.array(rows), names


# -------------------------------------------------------------------- graphs


def write_adjacency_tsv(path, W, edge_list=False, names=None):
    """Dense tab-separated matrix, or an edge list of the nonzero entries.

    The edge list starts with a ``# d=<n>`` line so isolated trailing nodes
    survive a round trip.
    """
    W = np.asarray(W, dtype=float)
    with open(path, "w", newline="") as fh:
        if edge_list:
            fh.write(f"# d={W.shape[0]}\n")
            fh.write("source\ttarget\tweight\n")
            for i, j in zip(*np.nonzero(W)):
                src = names[i] if names else str(i)
                dst = names[j] if names else str(j)
                fh.write(f"{src}\t{dst}\t{fmt(W[i, j])}\n")
        else:
            for row in W:
                fh.write("\t".join(fmt(v) for v in row) + "\n")


def read_adjacency_tsv(path):
    """Read either TSV layout written by :func:`write_adjacency_tsv`."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path) as fh:
        lines = [(k, ln.rstrip("\n")) for k, ln in enumerate(fh, start=1)]
    lines = [(k, ln) for k, ln in lines if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty file")
    first = lines[0][1]
    if first.startswith("#") or first.split("\t")[:2] == ["source", "target"]:
        return _read_edge_list(path, lines)
    rows = []
    for k, ln in lines:
        fields = ln.split("\t")
        if rows and len(fields) != len(rows[0]):
            raise ValidationError(f"{path}:{k}: expected {len(rows[0])} fields, found {len(fields)}")
        rows.append([_parse_float(f, path, k) for f in fields])
    W = np.array(rows)
    if W.shape[0] != W.shape[1]:
        raise ValidationError(f"{path}: adjacency must be square, got {W.shape}")
    return W


def _read_edge_list(path, lines):
    d = None
    edges = []
    for k, ln in lines:
        if ln.startswith("#"):
            key, _, value = ln[1:].strip().partition("=")
            if key.strip() == "d":
                d = int(value)
            continue
        fields = ln.split("\t")
        if fields[:2] == ["source", "target"]:
            continue
        if len(fields) != 3:
            raise ValidationError(f"{path}:{k}: expected 3 fields, found {len(fields)}")
        src, dst = (int(f[1:]) if f.startswith("x") and f[1:].isdigit() else int(f) for f in fields[:2])
        edges.append((src, dst, _parse_float(fields[2], path, k)))
    if d is None:
        d = 1 + max((max(s, t) for s, t, _ in edges), default=-1)
    W = np.zeros((d, d))
    for s, t, w in edges:
        W[s, t] = w
    return W


# ---------------------------------------------------------------- tabular


def write_rows_csv(path, rows, columns=None):
    """Write dict rows; columns default to first-seen key order across rows."""
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return v


def read_rows_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_curve_csv(path, x, y):
    write_rows_csv(path, [{"x": a, "y": b} for a, b in zip(np.ravel(x), np.ravel(y))], ["x", "y"])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path) as fh:
        return json.load(fh)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# ---------------------------------------------------------------- manifests


def fingerprint(obj) -> str:
    text = json.dumps(obj, sort_keys=True, default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_manifest(path, command, config=None, seed=None, inputs=(), outputs=(), started=None, finished=None, extra=None):
    """Record what a run did, with enough detail to replay it."""
    manifest = {
        "command": command,
        "config": config,
        "config_fingerprint": fingerprint(config) if config is not None else None,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "build": BUILD_ID,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "cwd": os.getcwd(),
        "started": started,
        "finished": finished if finished is not None else time.time(),
    }
    if extra:
        manifest.update(extra)
    write_json(path, manifest)
    return manifest
