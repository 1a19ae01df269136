"""Versioned CSV tables for run artifacts and replay input.

Every file starts with a comment line ``# eqvslam <kind> v<version>``
followed by a header row. Floats are written with ``repr`` so values
round-trip exactly and output is byte-identical across runs.

Schemas (version 1):

==================  =========================================================
``truth``           t, x, y, z, r11 .. r33
``estimate``        t, x, y, z, r11 .. r33, degenerate
``landmarks``       t, id, x, y, z, r_hat, range_ratio, bearing_error, storage
``true_landmarks``  id, x, y, z
``innovation``      t, omega1, omega2, omega3, v1, v2, v3
``records``         t, id, y1, y2, y3, depth (id empty: frame without bearings)
``velocity``        t, omega1, omega2, omega3, v1, v2, v3
``map``             id, x, y, z
``reference``       t, x, y, z (extra columns ignored)
==================  =========================================================
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

VERSION = 1
ROT_COLS = [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)]

SCHEMAS = {
    "truth": ["t", "x", "y", "z", *ROT_COLS],
    "estimate": ["t", "x", "y", "z", *ROT_COLS, "degenerate"],
    "landmarks": ["t", "id", "x", "y", "z", "r_hat", "range_ratio", "bearing_error", "storage"],
    "true_landmarks": ["id", "x", "y", "z"],
    "innovation": ["t", "omega1", "omega2", "omega3", "v1", "v2", "v3"],
    "records": ["t", "id", "y1", "y2", "y3", "depth"],
    "velocity": ["t", "omega1", "omega2", "omega3", "v1", "v2", "v3"],
    "map": ["id", "x", "y", "z"],
}


class DataError(ValueError):
    """Malformed input table; ``line`` is 1-based within the file."""

    def __init__(self, msg: str, line: int | None = None, source: str = "<table>"):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {msg}")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_table(kind: str, rows, header=None) -> str:
    header = SCHEMAS[kind] if header is None else header
    buf = io.StringIO()
    buf.write(f"# eqvslam {kind} v{VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_table(path, kind: str, rows, header=None) -> Path:
    path = Path(path)
    path.write_text(render_table(kind, rows, header))
    return path


def read_table(path, kind: str | None = None, required=None):
    """Read a table; returns ``(header, rows)`` where rows are ``(line, fields)``.

    The version comment is optional so hand-written files load too, but a
    comment naming a different kind or version is rejected.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read: {exc.strerror}", None, str(path)) from None
    lines = text.splitlines()
    start = 0
    if lines and lines[0].startswith("#"):
        parts = lines[0].lstrip("#").split()
        if len(parts) >= 3 and parts[0] == "eqvslam":
            if kind is not None and parts[1] != kind:
                raise DataError(f"expected a '{kind}' table, found '{parts[1]}'", 1, str(path))
            if parts[2] != f"v{VERSION}":
                raise DataError(f"unsupported version {parts[2]}", 1, str(path))
        start = 1
    reader = csv.reader(lines[start:])
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("missing header row", start + 1, str(path)) from None
    need = required if required is not None else (SCHEMAS.get(kind) if kind else None)
    if need:
        missing = [c for c in need if c not in header]
        if missing:
            raise DataError(f"missing columns {missing}", start + 1, str(path))
    noun = "record" if kind == "records" else "row"
    rows = []
    for offset, fields in enumerate(reader):
        line = start + 2 + offset
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(header):
            raise DataError(f"{noun} {len(rows) + 1}: expected {len(header)} fields, got {len(fields)}",
                            line, str(path))
        rows.append((line, [f.strip() for f in fields]))
    return header, rows


def pose_row(t, R, x, *extra):
    return [t, *np.asarray(x).ravel(), *np.asarray(R).ravel(), *extra]


def write_simulation(result, out_dir) -> dict:
    """Write every trace of a simulation result; returns paths by kind."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = result.times
    n = result.landmarks.shape[0]
    paths = {}
    paths["truth"] = write_table(out / "truth.csv", "truth",
                                 (pose_row(t[k], result.true_R[k], result.true_x[k]) for k in range(t.size)))
    paths["estimate"] = write_table(
        out / "estimate.csv", "estimate",
        (pose_row(t[k], result.est_R[k], result.est_x[k], bool(result.degenerate[k])) for k in range(t.size)))
    paths["landmarks"] = write_table(out / "landmarks.csv", "landmarks", (
        [t[k], i, *result.est_landmarks[k, i], result.r_hat[k, i], result.range_ratio[k, i],
         result.bearing_error[k, i], result.storage[k, i]]
        for k in range(t.size) for i in range(n)))
    paths["true_landmarks"] = write_table(out / "true_landmarks.csv", "true_landmarks",
                                          ([i, *result.landmarks[i]] for i in range(n)))
    paths["innovation"] = write_table(out / "innovation.csv", "innovation",
                                      ([t[k], *result.innovation[k]] for k in range(t.size - 1)))
    paths["records"] = write_table(out / "records.csv", "records", (
        [t[k], i, *result.bearings[k, i], None] for k in range(t.size) for i in range(n))
        if n else ([t[k], None, None, None, None, None] for k in range(t.size)))
    paths["velocity"] = write_table(out / "velocity.csv", "velocity",
                                    ([t[k], *result.velocities[k]] for k in range(t.size)))
    return paths
