"""Deterministic SVG rendering of shapes and plans.

World coordinates map to the canvas by the affine transform

    X = a * x + tx,    Y = -a * y + ty

declared on the root element as ``data-transform="a tx ty"``. Coordinates
are written with 4 decimals.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

WIDTH = 800
HEIGHT = 600
MARGIN = 40
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf")


@dataclass
class Curve:
    points: np.ndarray
    dashed: bool = False
    label: str = ""


def viewport(curves, y0):
    pts = [c.points for c in curves if len(c.points)]
    if pts:
        allp = np.vstack(pts)
        xmin, ymin = allp.min(axis=0)
        xmax, ymax = allp.max(axis=0)
        ymin, ymax = min(ymin, y0), max(ymax, y0)
    else:
        xmin, xmax, ymin, ymax = -1.0, 1.0, y0 - 1.0, y0 + 1.0
    span_x = max(xmax - xmin, 1e-9)
    span_y = max(ymax - ymin, 1e-9)
    a = min((WIDTH - 2 * MARGIN) / span_x, (HEIGHT - 2 * MARGIN) / span_y)
    tx = WIDTH / 2 - a * (xmin + xmax) / 2
    ty = HEIGHT / 2 + a * (ymin + ymax) / 2
    return float(a), float(tx), float(ty), (xmin, xmax)


def _f(v):
    return f"{v:.4f}"


def render_svg(curves, y0: float = 0.0, title: str = "") -> str:
    """Solid curves for planned shapes, dashed for fitted/observed ones; colours cycle per curve."""
    a, tx, ty, (xmin, xmax) = viewport(curves, y0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-transform="{a!r} {tx!r} {ty!r}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    ys = ty - a * y0
    out.append(
        f'<line class="surface" x1="0" y1="{_f(ys)}" x2="{WIDTH}" y2="{_f(ys)}" stroke="black" stroke-width="2"/>'
    )
    for i, c in enumerate(curves):
        colour = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_f(a * x + tx)},{_f(ty - a * y)}" for x, y in c.points)
        dash = ' stroke-dasharray="6 4"' if c.dashed else ""
        width = 1.5 if c.dashed else 2.5
        label = f' data-label="{escape(c.label)}"' if c.label else ""
        out.append(
            f'<polyline class="{"fitted" if c.dashed else "planned"}" points="{pts}" fill="none" '
            f'stroke="{colour}" stroke-width="{width}"{dash}{label}/>'
        )
        if len(c.points) and not c.dashed:
            (x0, y0_), (x1, y1) = c.points[0], c.points[-1]
            out.append(f'<circle class="start" cx="{_f(a * x0 + tx)}" cy="{_f(ty - a * y0_)}" r="3" fill="{colour}"/>')
            out.append(f'<circle class="grasp" cx="{_f(a * x1 + tx)}" cy="{_f(ty - a * y1)}" r="3" fill="red"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def parse_polylines(svg: str):
    """Inverse of the canvas transform for every polyline (used to check renders)."""
    import re

    a, tx, ty = map(float, re.search(r'data-transform="([^"]+)"', svg).group(1).split())
    curves = []
    for m in re.finditer(r'<polyline[^>]* points="([^"]*)"', svg):
        body = m.group(1).strip()
        if not body:
            curves.append(np.zeros((0, 2)))
            continue
        xy = np.array([[float(v) for v in p.split(",")] for p in body.split()])
        curves.append(np.column_stack([(xy[:, 0] - tx) / a, (ty - xy[:, 1]) / a]))
    return curves
