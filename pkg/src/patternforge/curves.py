"""Edge evaluation and 2D polygon primitives.

Edges are evaluated in the panel frame with y pointing up. Arcs use the SVG
endpoint parameterization restricted to circles: ``sweep=True`` traverses the
circle counterclockwise, ``large_arc`` picks the arc spanning more than pi.

Polygons are plain ``(n, 2)`` float arrays without a repeated closing point.
"""

from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import GeometryError
from .pattern import ARC_INFLATE_TOL, ArcParams, EdgeKind, EdgeSpec, Panel

RASTER_RES = 2048


class ArcGeometry(NamedTuple):
    center: np.ndarray
    radius: float
    start_angle: float
    sweep_angle: float  # signed, positive = counterclockwise


def solve_arc(p0, p1, arc: ArcParams) -> ArcGeometry:
    """Circle center and swept angle for an arc from ``p0`` to ``p1``.

    A radius short of half the chord by at most ``1e-6 * chord`` is inflated
    to exactly half the chord; anything shorter raises GeometryError.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    chord_vec = p1 - p0
    chord = float(np.hypot(*chord_vec))
    if chord == 0.0:
        raise GeometryError("arc endpoints coincide")
    r = float(arc.radius)
    half = chord / 2
    if r < half:
        if half - r > ARC_INFLATE_TOL * chord:
            raise GeometryError(f"arc radius {r:g} is smaller than half the chord {half:g}")
        r = half
    h = math.sqrt(max(r * r - half * half, 0.0))
    normal = np.array([-chord_vec[1], chord_vec[0]]) / chord  # left of p0 -> p1
    side = 1.0 if bool(arc.large_arc) != bool(arc.sweep) else -1.0
    center = (p0 + p1) / 2 + side * h * normal
    a0 = math.atan2(p0[1] - center[1], p0[0] - center[0])
    a1 = math.atan2(p1[1] - center[1], p1[0] - center[0])
    if arc.sweep:
        delta = (a1 - a0) % (2 * math.pi)
    else:
        delta = -((a0 - a1) % (2 * math.pi))
    if delta == 0.0:
        delta = 2 * math.pi if arc.sweep else -2 * math.pi
    return ArcGeometry(center, r, a0, delta)


def _edge_points(panel: Panel, edge: EdgeSpec) -> tuple[np.ndarray, np.ndarray]:
    return (np.asarray(panel.vertices[edge.start], dtype=float),
            np.asarray(panel.vertices[edge.end], dtype=float))


def eval_edge_many(panel: Panel, edge: EdgeSpec, t) -> np.ndarray:
    """Points on ``edge`` at parameters ``t`` (array-like), shape ``(len(t), 2)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
    p0, p1 = _edge_points(panel, edge)
    s = 1.0 - t
    if edge.kind is EdgeKind.LINE:
        out = s * p0 + t * p1
    elif edge.kind is EdgeKind.QUAD:
        c = np.asarray(edge.control[0])
        out = s * s * p0 + 2 * s * t * c + t * t * p1
    elif edge.kind is EdgeKind.CUBIC:
        c0, c1 = np.asarray(edge.control[0]), np.asarray(edge.control[1])
        out = s ** 3 * p0 + 3 * s * s * t * c0 + 3 * s * t * t * c1 + t ** 3 * p1
    else:
        g = solve_arc(p0, p1, edge.arc)
        ang = g.start_angle + t[:, 0] * g.sweep_angle
        out = g.center + g.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # endpoints are reproduced exactly
    out[t[:, 0] == 0.0] = p0
    out[t[:, 0] == 1.0] = p1
    return out


def eval_edge(panel: Panel, edge: EdgeSpec, t: float) -> np.ndarray:
    return eval_edge_many(panel, edge, [t])[0]


def _bezier_speed(panel: Panel, edge: EdgeSpec):
    p0, p1 = _edge_points(panel, edge)
    if edge.kind is EdgeKind.QUAD:
        c = np.asarray(edge.control[0])
        a, b = 2 * (c - p0), 2 * (p1 - c)
        return lambda t: float(np.hypot(*((1 - t) * a + t * b)))
    c0, c1 = np.asarray(edge.control[0]), np.asarray(edge.control[1])
    a, b, c = 3 * (c0 - p0), 3 * (c1 - c0), 3 * (p1 - c1)
    return lambda t: float(np.hypot(*((1 - t) ** 2 * a + 2 * (1 - t) * t * b + t * t * c)))


def edge_arc_length(panel: Panel, edge: EdgeSpec) -> float:
    p0, p1 = _edge_points(panel, edge)
    if edge.kind is EdgeKind.LINE:
        return float(np.hypot(*(p1 - p0)))
    if edge.kind is EdgeKind.ARC:
        g = solve_arc(p0, p1, edge.arc)
        return abs(g.sweep_angle) * g.radius
    value, _ = integrate.quad(_bezier_speed(panel, edge), 0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=200)
    return float(value)


def discretize_edge(panel: Panel, edge: EdgeSpec, n: int) -> np.ndarray:
    """``n + 1`` points at uniform parameter steps, endpoints exact."""
    if n < 1:
        raise ValueError("sample count must be at least 1")
    return eval_edge_many(panel, edge, np.arange(n + 1) / n)


def panel_boundary(panel: Panel, samples) -> np.ndarray:
    """Closed boundary loop (no repeated point) with ``samples[j]`` segments on edge j."""
    if np.isscalar(samples):
        samples = [int(samples)] * len(panel.edges)
    parts = [discretize_edge(panel, e, n)[:-1] for e, n in zip(panel.edges, samples)]
    return np.concatenate(parts, axis=0)


def as_polygon(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise GeometryError("a polygon needs at least 3 two-dimensional points")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite polygon coordinate")
    return pts


def polygon_area(poly) -> float:
    """Signed shoelace area, positive for counterclockwise loops."""
    pts = np.asarray(poly, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd test, vectorized over points."""
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    px, py = pts[:, 0:1], pts[:, 1:2]
    crosses = (y0 <= py) != (y1 <= py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
    return np.count_nonzero(crosses & (px < xint), axis=1) % 2 == 1


def _segment_distances(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from every point to every segment, shape ``(len(pts), len(a))``."""
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    rel = pts[:, None, :] - a[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(np.einsum("kij,ij->ki", rel, d) / dd, 0.0, 1.0)
    t = np.where(dd > 0, t, 0.0)
    closest = a[None, :, :] + t[..., None] * d[None, :, :]
    return np.linalg.norm(pts[:, None, :] - closest, axis=2)


def _boundary_inside_integral(P: np.ndarray, Q: np.ndarray, keep_shared: bool, tol: float) -> float:
    """Shoelace integral over the parts of ∂P lying inside Q.

    P is split at every crossing with ∂Q (and at the ends of collinear
    overlaps), so each piece is wholly inside, outside or on ∂Q. Pieces on ∂Q
    count only when ``keep_shared`` and both boundaries run the same way.
    """
    p0, p1 = P, np.roll(P, -1, axis=0)
    q0, q1 = Q, np.roll(Q, -1, axis=0)
    d, e = p1 - p0, q1 - q0
    dlen = np.linalg.norm(d, axis=1)
    elen = np.linalg.norm(e, axis=1)

    denom = _cross(d[:, None, :], e[None, :, :])
    r = q0[None, :, :] - p0[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(r, e[None, :, :]) / denom
        u = _cross(r, d[:, None, :]) / denom
    par_tol = 1e-12 * dlen[:, None] * elen[None, :]
    proper = (np.abs(denom) > par_tol)
    t_tol = tol / np.maximum(dlen, 1e-300)[:, None]
    u_tol = tol / np.maximum(elen, 1e-300)[None, :]
    hit = proper & (t >= -t_tol) & (t <= 1 + t_tol) & (u >= -u_tol) & (u <= 1 + u_tol)
    ii, kk = np.nonzero(hit)
    split_i = [ii]
    split_t = [t[ii, kk]]

    # collinear overlaps: ends of each Q segment projected onto P's segment
    collinear = ~proper & (np.abs(_cross(r, d[:, None, :])) <= tol * dlen[:, None])
    ii, kk = np.nonzero(collinear)
    if len(ii):
        dd = np.maximum(dlen[ii] ** 2, 1e-300)
        for ends in (q0[kk], q1[kk]):
            split_i.append(ii)
            split_t.append(np.einsum("ij,ij->i", ends - p0[ii], d[ii]) / dd)

    n = len(P)
    idx = np.concatenate(split_i + [np.arange(n), np.arange(n)])
    ts = np.concatenate(split_t + [np.zeros(n), np.ones(n)])
    ts = np.clip(ts, 0.0, 1.0)
    order = np.lexsort((ts, idx))
    idx, ts = idx[order], ts[order]
    same = idx[1:] == idx[:-1]
    ta, tb, ie = ts[:-1][same], ts[1:][same], idx[:-1][same]
    keep = (tb - ta) * dlen[ie] > tol
    ta, tb, ie = ta[keep], tb[keep], ie[keep]
    if len(ie) == 0:
        return 0.0
    s0 = p0[ie] + ta[:, None] * d[ie]
    s1 = p0[ie] + tb[:, None] * d[ie]
    mid = (s0 + s1) / 2

    dist = _segment_distances(mid, q0, q1)
    nearest = np.argmin(dist, axis=1)
    on_boundary = dist[np.arange(len(mid)), nearest] <= tol
    inside = _points_in_polygon(mid, Q) & ~on_boundary
    if keep_shared:
        same_dir = np.einsum("ij,ij->i", d[ie], e[nearest]) > 0
        inside |= on_boundary & same_dir
    return 0.5 * float(np.sum(_cross(s0[inside], s1[inside])))


def intersection_area(a, b) -> float:
    """Exact area of the intersection of two simple polygons."""
    A, B = _ccw(as_polygon(a)), _ccw(as_polygon(b))
    scale = float(np.ptp(np.concatenate([A, B]), axis=0).max())
    tol = 1e-9 * max(scale, 1e-300)
    area = (_boundary_inside_integral(A, B, True, tol)
            + _boundary_inside_integral(B, A, False, tol))
    limit = min(polygon_area(A), polygon_area(B))
    slack = 1e-9 * max(limit, scale * scale * 1e-6)
    if not -slack <= area <= limit + slack:
        raise GeometryError(f"degenerate clip: intersection area {area:g} outside [0, {limit:g}]")
    return min(max(area, 0.0), limit)


def _ccw(poly: np.ndarray) -> np.ndarray:
    area = polygon_area(poly)
    if area == 0.0:
        raise GeometryError("polygon has zero area")
    return poly if area > 0 else poly[::-1].copy()


def rasterize(poly, bbox: tuple[float, float, float, float], res: int = RASTER_RES) -> np.ndarray:
    """Boolean mask of pixel centers inside ``poly`` over ``bbox`` = (xmin, ymin, xmax, ymax).

    Scanline fill: each boundary crossing toggles the parity from its column on.
    """
    pts = np.asarray(poly, dtype=float)
    xmin, ymin, xmax, ymax = bbox
    w, h = (xmax - xmin) / res, (ymax - ymin) / res
    rows_y = ymin + (np.arange(res) + 0.5) * h
    toggles = np.zeros((res, res + 1), dtype=np.int32)
    for (x0, y0), (x1, y1) in zip(pts, np.roll(pts, -1, axis=0)):
        if y0 == y1:
            continue
        lo, hi = min(y0, y1), max(y0, y1)
        rows = np.nonzero((rows_y >= lo) & (rows_y < hi))[0]
        if len(rows) == 0:
            continue
        xs = x0 + (rows_y[rows] - y0) * (x1 - x0) / (y1 - y0)
        cols = np.clip(np.ceil((xs - xmin) / w - 0.5), 0, res).astype(int)
        np.add.at(toggles, (rows, cols), 1)
    return (np.cumsum(toggles, axis=1)[:, :res] % 2) == 1


def raster_iou(a, b, res: int = RASTER_RES) -> float:
    A, B = np.asarray(a, float), np.asarray(b, float)
    both = np.concatenate([A, B])
    lo, hi = both.min(axis=0), both.max(axis=0)
    bbox = (lo[0], lo[1], hi[0], hi[1])
    ma, mb = rasterize(A, bbox, res), rasterize(B, bbox, res)
    union = np.count_nonzero(ma | mb)
    return np.count_nonzero(ma & mb) / union if union else 0.0


def polygon_iou(a, b) -> float:
    """Intersection over union of two simple polygons, in [0, 1].

    Computed exactly by boundary splitting; if that degenerates numerically the
    result falls back to a 2048x2048 rasterization and a warning is issued.
    """
    A, B = _ccw(as_polygon(a)), _ccw(as_polygon(b))
    try:
        inter = intersection_area(A, B)
    except GeometryError as exc:
        warnings.warn(f"exact polygon clip failed ({exc}); using rasterized IoU", RuntimeWarning)
        return raster_iou(A, B)
    union = polygon_area(A) + polygon_area(B) - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def triangulate_polygon(poly) -> np.ndarray:
    """Ear-clipping triangulation, shape ``(n - 2, 3)`` of indices into ``poly``.

    Triangles are counterclockwise. Ears must be strictly convex and contain
    no other remaining vertex, including on their sides, so collinear runs of
    boundary samples never produce zero-area triangles.
    """
    pts = as_polygon(poly)
    n = len(pts)
    total = polygon_area(pts)
    if abs(total) <= 0.0:
        raise GeometryError("polygon has zero area")
    order = np.arange(n) if total > 0 else np.arange(n)[::-1]
    P = pts[order]
    min_cross = 2e-12 * abs(total)
    eps = 1e-12 * abs(total)

    prev = np.roll(np.arange(n), 1)
    nxt = np.roll(np.arange(n), -1)
    alive = np.ones(n, dtype=bool)

    def is_ear(v: int) -> bool:
        a, b = prev[v], nxt[v]
        pa, pv, pb = P[a], P[v], P[b]
        if _cross(pv - pa, pb - pv) <= min_cross:
            return False
        cand = np.nonzero(alive)[0]
        cand = cand[(cand != a) & (cand != v) & (cand != b)]
        if len(cand) == 0:
            return True
        q = P[cand]
        c1 = _cross(pv - pa, q - pa)
        c2 = _cross(pb - pv, q - pv)
        c3 = _cross(pa - pb, q - pb)
        return not np.any((c1 >= -eps) & (c2 >= -eps) & (c3 >= -eps))

    tris = []
    remaining = n
    v = 0
    misses = 0
    while remaining > 3:
        if is_ear(v):
            a, b = prev[v], nxt[v]
            tris.append((a, v, b))
            alive[v] = False
            nxt[a], prev[b] = b, a
            remaining -= 1
            misses = 0
            v = a
        else:
            misses += 1
            if misses > remaining:
                raise GeometryError("no ear found; polygon boundary is not simple")
            v = nxt[v]
    last = np.nonzero(alive)[0]
    a = last[0]
    tri = (prev[a], a, nxt[a])
    pa, pv, pb = P[tri[0]], P[tri[1]], P[tri[2]]
    if _cross(pv - pa, pb - pv) <= min_cross:
        raise GeometryError("degenerate final triangle; polygon boundary is not simple")
    tris.append(tri)
    return order[np.array(tris, dtype=int)]


def segments_intersect_any(loop: np.ndarray) -> bool:
    """True if two non-adjacent segments of the closed loop touch or cross."""
    p0 = loop
    p1 = np.roll(loop, -1, axis=0)
    n = len(loop)
    if n < 4:
        return False
    d = p1 - p0
    denom = _cross(d[:, None, :], d[None, :, :])
    r = p0[None, :, :] - p0[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(r, d[None, :, :]) / denom
        u = _cross(r, d[:, None, :]) / denom
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    gap = (j - i) % n
    non_adjacent = (gap > 1) & (gap < n - 1)
    lengths = np.linalg.norm(d, axis=1)
    parallel = np.abs(denom) <= 1e-12 * lengths[:, None] * lengths[None, :]
    hit = ~parallel & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    scale = float(np.ptp(loop, axis=0).max())
    collinear = parallel & (np.abs(_cross(r, d[:, None, :])) <= 1e-12 * scale * scale)
    a, b = np.nonzero(collinear & non_adjacent)
    if len(a):
        # overlapping collinear pieces: project b's ends onto a
        dd = np.einsum("ij,ij->i", d[a], d[a])
        ok = dd > 0
        a, b, dd = a[ok], b[ok], dd[ok]
        s0 = np.einsum("ij,ij->i", p0[b] - p0[a], d[a]) / dd
        s1 = np.einsum("ij,ij->i", p1[b] - p0[a], d[a]) / dd
        if np.any((np.maximum(s0, s1) >= 0) & (np.minimum(s0, s1) <= 1)):
            return True
    return bool(np.any(hit & non_adjacent))


def loop_self_intersects(panel: Panel, samples: int = 16) -> bool:
    return segments_intersect_any(panel_boundary(panel, samples))
