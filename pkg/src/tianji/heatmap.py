"""Dependency-free SVG heatmaps for the W and B matrices.

Output is plain text built from fixed formatting rules, so identical matrices
give byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from tianji.analysis import LabeledMatrix

CELL = 64
MARGIN_LEFT = 140
MARGIN_TOP = 130
NEG = (33, 102, 172)
POS = (178, 24, 43)
WHITE = (247, 247, 247)
MISSING = "#bdbdbd"


def diverging_color(value: float, limit: float) -> str:
    """Blue for negative, red for positive, white at zero."""
    if math.isnan(value):
        return MISSING
    t = max(-1.0, min(1.0, value / limit)) if limit > 0 else 0.0
    end = POS if t > 0 else NEG
    t = abs(t)
    rgb = [round(w + (e - w) * t) for w, e in zip(WHITE, end)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def heatmap_svg(matrix: LabeledMatrix, title: str, limit: float | None = None) -> str:
    n = len(matrix.labels)
    finite = [abs(v) for v in matrix.values.ravel() if not math.isnan(v)]
    if limit is None:
        limit = max(finite, default=0.0) or 1.0
    width = MARGIN_LEFT + n * CELL + 20
    height = MARGIN_TOP + n * CELL + 40
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<title>{escape(title)}</title>',
        f'<text x="{width / 2:g}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{MARGIN_LEFT + n * CELL / 2:g}" y="40" text-anchor="middle">column agent (side B)</text>',
    ]
    for j, label in enumerate(matrix.labels):
        x = MARGIN_LEFT + j * CELL + CELL / 2
        out.append(f'<text x="{x:g}" y="{MARGIN_TOP - 8}" text-anchor="start" '
                   f'transform="rotate(-45 {x:g} {MARGIN_TOP - 8})">{escape(label)}</text>')
    for i, label in enumerate(matrix.labels):
        y = MARGIN_TOP + i * CELL + CELL / 2
        out.append(f'<text x="{MARGIN_LEFT - 8}" y="{y:g}" text-anchor="end" '
                   f'dominant-baseline="middle">{escape(label)}</text>')
    out.append('<g class="cells">')
    for i in range(n):
        for j in range(n):
            v = float(matrix.values[i, j])
            x, y = MARGIN_LEFT + j * CELL, MARGIN_TOP + i * CELL
            text = matrix.cell_text(i, j)
            if text and not matrix.integer:
                text = f"{v:.2f}"
            out.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{diverging_color(v, limit)}" stroke="#ffffff" '
                f'data-row="{escape(matrix.labels[i])}" data-col="{escape(matrix.labels[j])}"/>'
            )
            out.append(f'<text x="{x + CELL / 2:g}" y="{y + CELL / 2:g}" text-anchor="middle" '
                       f'dominant-baseline="middle">{escape(text or "n/a")}</text>')
    out.append("</g>")
    out.append(f'<text x="{MARGIN_LEFT}" y="{height - 12}">scale: -{limit:g} (blue) to '
               f'+{limit:g} (red)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
