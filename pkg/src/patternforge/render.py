"""SVG drawings of sewing patterns.

Edge kinds map one-to-one onto SVG path commands (L, Q, C, A). Each panel is
drawn in its own group, flipped so that the panel frame's y axis points up;
under that flip the arc sweep flag keeps its meaning.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from . import curves
from .jsonfmt import format_float as _f
from .pattern import EdgeKind, Panel, SewingPattern

FREE_STROKE = "#222222"
STITCH_PALETTE = (
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6",
    "#9a6324", "#800000", "#469990", "#000075", "#bfef45",
)
MARGIN = 5.0


def edge_path(panel: Panel, j: int) -> str:
    e = panel.edges[j]
    x0, y0 = panel.vertices[e.start]
    x1, y1 = panel.vertices[e.end]
    head = f"M {_f(x0)} {_f(y0)} "
    if e.kind is EdgeKind.LINE:
        return head + f"L {_f(x1)} {_f(y1)}"
    if e.kind is EdgeKind.QUAD:
        (cx, cy), = e.control
        return head + f"Q {_f(cx)} {_f(cy)} {_f(x1)} {_f(y1)}"
    if e.kind is EdgeKind.CUBIC:
        (ax, ay), (bx, by) = e.control
        return head + f"C {_f(ax)} {_f(ay)} {_f(bx)} {_f(by)} {_f(x1)} {_f(y1)}"
    r = _f(e.arc.radius)
    return head + f"A {r} {r} 0 {int(e.arc.large_arc)} {int(e.arc.sweep)} {_f(x1)} {_f(y1)}"


def render_svg(p: SewingPattern) -> str:
    """One group per panel on a grid; stitched edge pairs share a stroke color."""
    if not p.panels:
        raise ValueError("pattern has no panels")
    boxes = []
    for panel in p.panels:
        pts = curves.panel_boundary(panel, 16)
        boxes.append((pts.min(axis=0), pts.max(axis=0)))
    cell_w = max(hi[0] - lo[0] for lo, hi in boxes) + 2 * MARGIN
    cell_h = max(hi[1] - lo[1] for lo, hi in boxes) + 2 * MARGIN + 6
    cols = math.ceil(math.sqrt(len(p.panels)))
    rows = math.ceil(len(p.panels) / cols)
    stitch_of = p.stitch_of_edge()

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(cols * cell_w)}" '
           f'height="{_f(rows * cell_h)}" viewBox="0 0 {_f(cols * cell_w)} {_f(rows * cell_h)}">']
    for i, (panel, (lo, hi)) in enumerate(zip(p.panels, boxes)):
        cx, cy = (i % cols) * cell_w, (i // cols) * cell_h
        tx = cx + MARGIN - lo[0]
        ty = cy + MARGIN + 6 + hi[1]
        out.append(f'<text x="{_f(cx + MARGIN)}" y="{_f(cy + MARGIN + 4)}" font-size="4">'
                   f'{escape(panel.name)}</text>')
        out.append(f'<g id="panel_{i}" transform="translate({_f(tx)} {_f(ty)}) scale(1 -1)" '
                   f'fill="none" stroke-width="0.4">')
        for j in range(len(panel.edges)):
            k = stitch_of.get((i, j))
            color = FREE_STROKE if k is None else STITCH_PALETTE[k % len(STITCH_PALETTE)]
            extra = "" if k is None else f' data-stitch="{k}"'
            out.append(f'<path d="{edge_path(panel, j)}" stroke="{color}"{extra}/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
