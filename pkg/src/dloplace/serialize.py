"""CSV/JSON file formats.

Shape files are CSV with a single JSON header line (prefixed by ``#``)
carrying the generating parameters, followed by ``s,x,y,phi,kappa`` rows.
Point files hold ``x,y`` rows, optionally with the same kind of header.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .elastica import DLOShape, ElasticaParams, Pose, ShapeError, StiffnessSpec

SHAPE_COLUMNS = ("s", "x", "y", "phi", "kappa")


def _fmt(v):
    return repr(float(v))


def shape_header(shape: DLOShape) -> dict:
    p = shape.params
    return {
        "k": p.k,
        "s0": p.s0,
        "Ltilde": p.Ltilde,
        "EI": shape.stiffness.EI,
        "L": shape.stiffness.L,
        "base": shape.base.to_dict(),
        "contact_length": shape.contact_length,
        **({k: v for k, v in shape.meta.items() if isinstance(v, (str, int, float))}),
    }


def dumps_shape_csv(shape: DLOShape, extra: dict | None = None) -> str:
    head = shape_header(shape)
    if extra:
        head.update(extra)
    buf = io.StringIO()
    buf.write("# " + json.dumps(head, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SHAPE_COLUMNS)
    for row in zip(shape.s, shape.x, shape.y, shape.phi, shape.kappa):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_shape_csv(path, shape: DLOShape, extra: dict | None = None):
    with open(path, "w", newline="") as fh:
        fh.write(dumps_shape_csv(shape, extra))


def _split(text):
    header, rows, names = {}, [], None
    for line in text.splitlines():
        t = line.strip()
        if not t:
            continue
        if t.startswith("#"):
            body = t[1:].strip()
            if body.startswith("{"):
                try:
                    header = json.loads(body)
                except json.JSONDecodeError as exc:
                    raise ShapeError(f"malformed JSON header: {exc}") from exc
            continue
        parts = [p.strip() for p in t.split(",")]
        if names is None and not rows and not _numeric(parts[0]):
            names = parts
            continue
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ShapeError(f"malformed CSV row: {t!r}") from exc
    if not rows:
        raise ShapeError("no data rows")
    if len({len(r) for r in rows}) != 1:
        raise ShapeError("inconsistent column counts")
    if names is not None and len(names) != len(rows[0]):
        raise ShapeError("column names do not match the data")
    return header, names, np.array(rows)


def _numeric(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_shape_csv(path) -> DLOShape:
    with open(path) as fh:
        header, names, arr = _split(fh.read())
    names = names or list(SHAPE_COLUMNS)
    if tuple(names[:5]) != SHAPE_COLUMNS or arr.shape[1] < 5:
        raise ShapeError(f"expected columns {','.join(SHAPE_COLUMNS)}")
    try:
        params = ElasticaParams(header["k"], header["s0"], header["Ltilde"])
        stiff = StiffnessSpec(header["EI"], header["L"])
        base = Pose.from_dict(header["base"])
    except KeyError as exc:
        raise ShapeError(f"shape header lacks {exc}") from exc
    return DLOShape(*arr[:, :5].T, params, base, stiff, float(header.get("contact_length", 0.0)))


def read_points_csv(path):
    """Return (points (n, 2), header dict). Accepts x,y files and shape files."""
    with open(path) as fh:
        header, names, arr = _split(fh.read())
    if names is not None and "x" in names and "y" in names:
        return arr[:, [names.index("x"), names.index("y")]], header
    if arr.shape[1] == 2:
        return arr, header
    raise ShapeError("expected x,y columns")


def write_points_csv(path, points, header: dict | None = None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "y"))
        for x, y in np.asarray(points):
            w.writerow((_fmt(x), _fmt(y)))
