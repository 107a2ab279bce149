"""Procedural sewing patterns for tests, benchmarks and experiments.

Panels are convex-ish loops on an ellipse with mildly curved edges, so every
generated pattern is valid and has simple (non-self-intersecting) panels.
All values are rounded to 6 decimals, i.e. already canonical.
"""

from __future__ import annotations

import math

import numpy as np

from .curves import panel_boundary, segments_intersect_any
from .pattern import ArcParams, EdgeKind, EdgeSpec, Panel, SewingPattern, Stitch, validate_pattern

PANEL_NAMES = (
    "front", "back", "sleeve_l", "sleeve_r", "collar", "cuff_l", "cuff_r",
    "skirt_front", "skirt_back", "hood_l", "hood_r", "waistband", "pant_l", "pant_r",
)

ALL_KINDS = (EdgeKind.LINE, EdgeKind.QUAD, EdgeKind.CUBIC, EdgeKind.ARC)


def _r(x) -> float:
    return round(float(x), 6)


def random_quaternion(rng: np.random.Generator) -> tuple[float, float, float, float]:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return tuple(_r(c) for c in q)


def _random_edge(rng, p0, p1, start, end, kinds) -> EdgeSpec:
    kind = kinds[rng.integers(len(kinds))]
    chord = p1 - p0
    normal = np.array([-chord[1], chord[0]])  # left of chord (panel interior)
    if kind is EdgeKind.QUAD:
        bulge = rng.uniform(-0.18, 0.18)
        c = (p0 + p1) / 2 + bulge * normal
        return EdgeSpec(start, end, kind, [(_r(c[0]), _r(c[1]))])
    if kind is EdgeKind.CUBIC:
        b0, b1 = rng.uniform(-0.2, 0.2, size=2)
        c0 = p0 + chord / 3 + b0 * normal
        c1 = p0 + 2 * chord / 3 + b1 * normal
        return EdgeSpec(start, end, kind, [(_r(c0[0]), _r(c0[1])), (_r(c1[0]), _r(c1[1]))])
    if kind is EdgeKind.ARC:
        half = float(np.linalg.norm(chord)) / 2
        radius = _r(half * rng.uniform(2.5, 8.0))
        return EdgeSpec(start, end, kind, arc=ArcParams(radius, False, bool(rng.integers(2))))
    return EdgeSpec(start, end, EdgeKind.LINE)


def random_panel(rng: np.random.Generator, n_edges: int | None = None, kinds=ALL_KINDS,
                 name: str | None = None) -> Panel:
    if n_edges is None:
        n_edges = int(rng.integers(3, 9))
    # angles with bounded gaps keep every corner turn below ~120 degrees
    while True:
        gaps = rng.uniform(0.6, 1.4, size=n_edges)
        gaps *= 2 * math.pi / gaps.sum()
        if gaps.max() <= math.radians(125):
            break
    angles = rng.uniform(0, 2 * math.pi) + np.concatenate([[0.0], np.cumsum(gaps)[:-1]])
    rx = rng.uniform(8, 30)
    ry = rx * rng.uniform(0.65, 1.5)
    center = rng.uniform(-10, 10, size=2)
    pts = np.stack([center[0] + rx * np.cos(angles), center[1] + ry * np.sin(angles)], axis=1)
    pts = np.round(pts, 6)
    edges = [_random_edge(rng, pts[j], pts[(j + 1) % n_edges], j, (j + 1) % n_edges, kinds)
             for j in range(n_edges)]
    return Panel(
        name=name if name is not None else PANEL_NAMES[rng.integers(len(PANEL_NAMES))],
        vertices=[tuple(p) for p in pts],
        edges=edges,
        rotation=random_quaternion(rng),
        translation=tuple(_r(c) for c in rng.uniform(-60, 60, size=3)),
    )


def random_pattern(rng: np.random.Generator | int, n_panels: int | None = None, max_panels: int = 8,
                   max_stitches: int = 6, kinds=ALL_KINDS) -> SewingPattern:
    """A valid pattern with 1..max_panels panels and 0..max_stitches stitches."""
    rng = np.random.default_rng(rng)
    if n_panels is None:
        n_panels = int(rng.integers(1, max_panels + 1))
    while True:
        panels = [random_panel(rng, kinds=kinds) for _ in range(n_panels)]
        refs = [(i, j) for i, p in enumerate(panels) for j in range(len(p.edges))]
        n_st = int(rng.integers(0, min(max_stitches, len(refs) // 2) + 1))
        chosen = rng.permutation(len(refs))[: 2 * n_st]
        stitches = [Stitch(refs[chosen[2 * k]], refs[chosen[2 * k + 1]]) for k in range(n_st)]
        pattern = SewingPattern(tuple(panels), tuple(stitches))
        report = validate_pattern(pattern)
        if report.valid and not any(segments_intersect_any(panel_boundary(p, 48)) for p in panels):
            return pattern


def square_panel(size: float = 1.0, name: str = "front", rotation=(0.0, 0.0, 0.0, 1.0),
                 translation=(0.0, 0.0, 0.0), origin=(0.0, 0.0)) -> Panel:
    x, y = origin
    return Panel(
        name=name,
        vertices=[(x, y), (x + size, y), (x + size, y + size), (x, y + size)],
        edges=[EdgeSpec(j, (j + 1) % 4) for j in range(4)],
        rotation=rotation,
        translation=translation,
    )
