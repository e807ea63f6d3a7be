"""Minimal SVG overlay plot of a density CSV.

Written by hand so the output is deterministic and needs no plotting stack.
Series are ``<polyline class="series">`` elements labeled ``p`` (target),
``pi`` (closed form) and ``pi_hat`` (empirical, drawn as steps).
"""

from __future__ import annotations

import logging
import math
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .runner import read_csv

log = logging.getLogger(__name__)

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=60, right=110, top=30, bottom=45)
COLORS = {"p": "#1f77b4", "pi": "#d62728", "pi_hat": "#2ca02c"}


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


def _points(xs, ys, sx, sy) -> str:
    return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))


def render_svg(left, right, target, closed, empirical=None, title: Optional[str] = None) -> str:
    centers = 0.5 * (left + right)
    x0, x1 = float(left[0]), float(right[-1])
    cols = [target, closed] + ([empirical] if empirical is not None else [])
    ymax = max(float(np.max(c)) for c in cols)
    ymax = ymax * 1.05 if ymax > 0 else 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + ph - y / ymax * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    # axes and ticks
    bx, by = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<g class="axes" stroke="black" fill="none">'
               f'<line x1="{bx}" y1="{by}" x2="{bx + pw}" y2="{by}"/>'
               f'<line x1="{bx}" y1="{MARGIN["top"]}" x2="{bx}" y2="{by}"/></g>')
    out.append('<g class="ticks">')
    for t in nice_ticks(x0, x1):
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{by}" x2="{X:.2f}" y2="{by + 5}" stroke="black"/>'
                   f'<text x="{X:.2f}" y="{by + 18}" text-anchor="middle">{t:g}</text>')
    for t in nice_ticks(0.0, ymax):
        Y = sy(t)
        out.append(f'<line x1="{bx - 5}" y1="{Y:.2f}" x2="{bx}" y2="{Y:.2f}" stroke="black"/>'
                   f'<text x="{bx - 8}" y="{Y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append("</g>")
    out.append(f'<text x="{bx + pw / 2:.1f}" y="{HEIGHT - 8}" text-anchor="middle">theta</text>')

    series = [("p", centers, target), ("pi", centers, closed)]
    if empirical is not None:
        # step plot: flat across each bin
        xs = np.column_stack([left, right]).ravel()
        ys = np.repeat(empirical, 2)
        series.append(("pi_hat", xs, ys))
    for label, xs, ys in series:
        out.append(f'<polyline class="series" data-label="{label}" fill="none" stroke="{COLORS[label]}" '
                   f'stroke-width="1.5" points="{_points(xs, ys, sx, sy)}"/>')
    # legend
    lx, ly = WIDTH - MARGIN["right"] + 15, MARGIN["top"] + 10
    out.append('<g class="legend">')
    for i, (label, _, _) in enumerate(series):
        y = ly + 18 * i
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 20}" y2="{y}" stroke="{COLORS[label]}" stroke-width="2"/>'
                   f'<text x="{lx + 26}" y="{y + 4}">{label}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(csv_path: str, svg_path: Optional[str] = None, title: Optional[str] = None) -> str:
    """Render ``csv_path`` to SVG; returns the SVG path.

    Raises:
        MalformedCSV: if the CSV does not follow the density schema.
    """
    table = read_csv(csv_path)
    if table.empirical is None:
        log.warning("%s has no empirical_density column; plotting 2 series", csv_path)
    if svg_path is None:
        svg_path = csv_path[:-4] + ".svg" if csv_path.endswith(".csv") else csv_path + ".svg"
    text = render_svg(table.bin_left, table.bin_right, table.target, table.closed, table.empirical, title)
    with open(svg_path, "w", newline="") as fh:
        fh.write(text)
    return svg_path
