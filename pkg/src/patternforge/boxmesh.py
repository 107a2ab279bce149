"""BoxMesh construction from a sewing pattern.

Every panel is discretized, triangulated in its own plane and lifted into 3D
by its rigid placement. Each stitch becomes a triangle strip joining the two
discretized edges sample by sample. Faces carry a label saying which panel or
stitch produced them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import curves
from .errors import BudgetError, FormatError, GeometryError, StitchError
from .pattern import Panel, SewingPattern

DEFAULT_FACE_BUDGET = 1600
MIN_SEGMENT_CM = 0.5
SEGMENTS_PER_DIAMETER = 16
AREA_DRIFT_WARN = 0.02


class FaceLabel(NamedTuple):
    kind: str  # "panel" or "stitch"
    index: int

    def __str__(self) -> str:
        return f"{self.kind}_{self.index}"

    @classmethod
    def parse(cls, text: str) -> "FaceLabel":
        kind, _, idx = text.rpartition("_")
        if kind not in ("panel", "stitch") or not idx.isdigit():
            raise FormatError(f"unknown material {text!r}")
        return cls(kind, int(idx))


@dataclass(frozen=True)
class BuildConfig:
    """Discretization and budget settings.

    ``samples_per_edge`` fixes the segment count of every edge; otherwise each
    edge gets ``ceil(length / segment)`` segments with ``segment_cm`` or, when
    unset, ``max(panel diameter / 16, 0.5 cm)``. ``coarsen`` doubles the
    segment length (halves fixed counts) per level and is used by budgeting.
    """

    samples_per_edge: int | None = None
    segment_cm: float | None = None
    face_budget: int = DEFAULT_FACE_BUDGET
    stitch_rows: int = 1
    coarsen: int = 0

    def __post_init__(self):
        if self.samples_per_edge is not None and self.samples_per_edge < 1:
            raise ValueError("samples_per_edge must be at least 1")
        if self.segment_cm is not None and not self.segment_cm > 0:
            raise ValueError("segment_cm must be positive")
        if self.face_budget < 4:
            raise BudgetError(f"face budget {self.face_budget} is below the minimum of 4")
        if self.stitch_rows < 1:
            raise ValueError("stitch_rows must be at least 1")


@dataclass(frozen=True, eq=False)
class BoxMesh:
    vertices: np.ndarray  # (V, 3) float
    faces: np.ndarray  # (F, 3) int
    labels: tuple  # FaceLabel per face, or None for unlabeled imports
    source: SewingPattern | None = None
    config: BuildConfig | None = None

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        tri = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(np.ptp(self.vertices, axis=0))) if len(self.vertices) else 0.0

    def label_mask(self, kind: str, index: int | None = None) -> np.ndarray:
        return np.array([lab is not None and lab.kind == kind and (index is None or lab.index == index)
                         for lab in self.labels], dtype=bool)


def quaternion_matrix(q) -> np.ndarray:
    """Rotation matrix of a quaternion ``(x, y, z, w)``; the input is normalized first."""
    x, y, z, w = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def place_panel(panel: Panel, points2d) -> np.ndarray:
    """Lift panel-local 2D points to 3D: pad with z = 0, rotate, translate."""
    pts = np.asarray(points2d, dtype=float).reshape(-1, 2)
    padded = np.column_stack([pts, np.zeros(len(pts))])
    return padded @ quaternion_matrix(panel.rotation).T + np.asarray(panel.translation, dtype=float)


def _panel_diameter(panel: Panel) -> float:
    pts = curves.panel_boundary(panel, 8)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1).max()))


def edge_sample_counts(p: SewingPattern, cfg: BuildConfig) -> list[list[int]]:
    """Segment count per (panel, edge); stitched pairs share the larger count."""
    factor = 2 ** cfg.coarsen
    counts = []
    for panel in p.panels:
        if cfg.samples_per_edge is not None:
            counts.append([max(1, math.ceil(cfg.samples_per_edge / factor))] * len(panel.edges))
            continue
        seg = cfg.segment_cm if cfg.segment_cm is not None else max(
            _panel_diameter(panel) / SEGMENTS_PER_DIAMETER, MIN_SEGMENT_CM)
        seg *= factor
        counts.append([max(1, math.ceil(curves.edge_arc_length(panel, e) / seg - 1e-9))
                       for e in panel.edges])
    for s in p.stitches:
        (pa, ea), (pb, eb) = s.first, s.second
        n = max(counts[pa][ea], counts[pb][eb])
        counts[pa][ea] = counts[pb][eb] = n
    return counts


def _tri_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)


def _strip(pa: np.ndarray, pb: np.ndarray, rows: int):
    """Rows of points between paired polylines and the strip triangles over them.

    Returns ``(grid, tris)``: ``grid`` has shape ``(rows + 1, n + 1, 3)`` with
    row 0 = pa and the last row = pb; ``tris`` index the flattened grid.
    """
    n1 = len(pa)
    s = np.linspace(0.0, 1.0, rows + 1)[:, None, None]
    grid = (1 - s) * pa[None] + s * pb[None]
    tris = []
    for r in range(rows):
        for j in range(n1 - 1):
            a0, a1 = r * n1 + j, r * n1 + j + 1
            b0, b1 = (r + 1) * n1 + j, (r + 1) * n1 + j + 1
            tris.append((a0, a1, b1))
            tris.append((a0, b1, b0))
    return grid, np.array(tris, dtype=int).reshape(-1, 3)


def _strip_area(pa, pb, rows) -> float:
    grid, tris = _strip(pa, pb, rows)
    flat = grid.reshape(-1, 3)
    return float(_tri_area(flat[tris[:, 0]], flat[tris[:, 1]], flat[tris[:, 2]]).sum())


def build_boxmesh(p: SewingPattern, cfg: BuildConfig | None = None, budget: bool = True) -> BoxMesh:
    """BoxMesh of ``p``; with ``budget`` the result is coarsened to ``cfg.face_budget``."""
    cfg = cfg or BuildConfig()
    mesh = _build(p, cfg)
    return remesh_to_budget(mesh, cfg.face_budget) if budget else mesh


def _build(p: SewingPattern, cfg: BuildConfig) -> BoxMesh:
    counts = edge_sample_counts(p, cfg)
    vertices: list[np.ndarray] = []
    faces: list[np.ndarray] = []
    labels: list[FaceLabel] = []
    edge_ids: dict[tuple[int, int], np.ndarray] = {}
    offset = 0

    for i, panel in enumerate(p.panels):
        loop = curves.panel_boundary(panel, counts[i])
        n_loop = len(loop)
        tris = curves.triangulate_polygon(loop)
        vertices.append(place_panel(panel, loop))
        faces.append(tris + offset)
        labels.extend([FaceLabel("panel", i)] * len(tris))
        start = 0
        for j, n in enumerate(counts[i]):
            edge_ids[(i, j)] = offset + (start + np.arange(n + 1)) % n_loop
            start += n
        offset += n_loop

    verts = np.concatenate(vertices) if vertices else np.zeros((0, 3))
    scale2 = float(np.ptp(verts, axis=0) @ np.ptp(verts, axis=0)) if len(verts) else 0.0
    min_area = 1e-12 * scale2
    extra: list[np.ndarray] = []

    for k, s in enumerate(p.stitches):
        ia, ib = edge_ids[s.first], edge_ids[s.second]
        if len(ia) != len(ib):
            raise StitchError(f"stitch {k}: edges sampled with {len(ia) - 1} and {len(ib) - 1} segments")
        pa = verts[ia]
        forward, reverse = ib, ib[::-1]
        area_f = _strip_area(pa, verts[forward], cfg.stitch_rows)
        area_r = _strip_area(pa, verts[reverse], cfg.stitch_rows)
        ib = reverse if area_r < area_f else forward
        grid, tris = _strip(pa, verts[ib], cfg.stitch_rows)
        n1 = len(ia)
        ids = np.empty((cfg.stitch_rows + 1) * n1, dtype=int)
        ids[:n1] = ia
        ids[-n1:] = ib
        inner = grid[1:-1].reshape(-1, 3)
        if len(inner):
            ids[n1:-n1] = offset + np.arange(len(inner))
            extra.append(inner)
            offset += len(inner)
        flat = grid.reshape(-1, 3)
        keep = _tri_area(flat[tris[:, 0]], flat[tris[:, 1]], flat[tris[:, 2]]) > min_area
        faces.append(ids[tris[keep]])
        labels.extend([FaceLabel("stitch", k)] * int(keep.sum()))

    if extra:
        verts = np.concatenate([verts] + extra)
    face_arr = np.concatenate(faces).astype(int) if faces else np.zeros((0, 3), dtype=int)
    return BoxMesh(verts, face_arr, tuple(labels), source=p, config=cfg)


def remesh_to_budget(m: BoxMesh, budget: int) -> BoxMesh:
    """Coarsen the sampling of ``m`` until it has at most ``budget`` faces.

    The mesh is rebuilt from its source pattern with the segment length doubled
    per step, which keeps panels planar and labels exact.
    """
    if budget < 4:
        raise BudgetError(f"face budget {budget} is below the minimum of 4")
    if m.n_faces <= budget:
        return m
    if m.source is None or m.config is None:
        raise BudgetError("mesh has no source pattern to rebuild from")
    cfg = m.config
    level = cfg.coarsen
    counts = edge_sample_counts(m.source, cfg)
    current = m
    while current.n_faces > budget:
        if all(n == 1 for row in counts for n in row):
            raise BudgetError(f"face budget {budget} is unreachable: {current.n_faces} faces "
                              f"with one segment per edge")
        level += 1
        cfg = replace(cfg, coarsen=level)
        counts = edge_sample_counts(m.source, cfg)
        current = _build(m.source, cfg)
    drift = abs(current.area() - m.area()) / m.area() if m.area() > 0 else 0.0
    if drift > AREA_DRIFT_WARN:
        warnings.warn(f"budgeted mesh area differs by {100 * drift:.2f}% from the input", RuntimeWarning)
    return current


def normalize_mesh(m: BoxMesh) -> tuple[BoxMesh, float, np.ndarray]:
    """Center the bounding box and scale isotropically so the longest axis spans [-1, 1].

    Returns the normalized mesh with the ``scale`` and ``center`` needed by
    :func:`denormalize_mesh`.
    """
    if len(m.vertices) == 0:
        raise GeometryError("cannot normalize an empty mesh")
    lo, hi = m.vertices.min(axis=0), m.vertices.max(axis=0)
    center = (lo + hi) / 2
    extent = float((hi - lo).max())
    scale = 2.0 / extent if extent > 0 else 1.0
    v = np.clip((m.vertices - center) * scale, -1.0, 1.0)
    # pin the longest axis exactly onto [-1, 1]
    axis = int(np.argmax(hi - lo))
    v[m.vertices[:, axis] == lo[axis], axis] = -1.0
    v[m.vertices[:, axis] == hi[axis], axis] = 1.0
    return replace(m, vertices=v), scale, center


def denormalize_mesh(m: BoxMesh, scale: float, center) -> BoxMesh:
    return replace(m, vertices=m.vertices / scale + np.asarray(center, dtype=float))


def export_obj(m: BoxMesh) -> str:
    lines = [f"# boxmesh {len(m.vertices)} vertices {m.n_faces} faces"]
    lines += [f"v {x:.9f} {y:.9f} {z:.9f}" for x, y, z in m.vertices]
    current = object()
    for (a, b, c), lab in zip(m.faces, m.labels):
        if lab != current:
            if lab is not None:
                lines.append(f"usemtl {lab}")
            current = lab
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    return "\n".join(lines) + "\n"


def import_obj(text: str) -> BoxMesh:
    """Read triangles and ``usemtl panel_i``/``stitch_k`` label groups."""
    verts, faces, labels = [], [], []
    label = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "v":
                if len(parts) < 4:
                    raise FormatError(f"line {lineno}: vertex needs 3 coordinates")
                verts.append([float(c) for c in parts[1:4]])
            elif tag == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                if len(idx) != 3:
                    raise FormatError(f"line {lineno}: triangles only, got a {len(idx)}-gon")
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                faces.append(idx)
                labels.append(label)
            elif tag == "usemtl":
                label = FaceLabel.parse(parts[1]) if len(parts) > 1 else None
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"line {lineno}: {exc}") from None
    v = np.array(verts, dtype=float).reshape(-1, 3)
    f = np.array(faces, dtype=int).reshape(-1, 3)
    if len(f) and (f.min() < 0 or f.max() >= len(v)):
        raise FormatError("face index out of range")
    if not np.all(np.isfinite(v)):
        raise FormatError("non-finite vertex coordinate")
    return BoxMesh(v, f, tuple(labels))
