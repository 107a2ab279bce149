"""Parametric sewing-pattern representation.

A pattern is a list of panels plus a list of stitches. Each panel is a closed
loop of typed edges in its own 2D frame (centimeters) together with a rigid
placement (unit quaternion ``(x, y, z, w)`` and translation) that puts it
around the body. A stitch joins two edges, addressed as ``(panel, edge)``.

All types are frozen dataclasses; containers are stored as tuples so that
patterns compare and hash by value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

import numpy as np

from . import jsonfmt
from .errors import InvariantError, NumericError, SchemaError

MAX_PANELS = 64
MAX_EDGES = 64
MIN_EDGES = 3
# 6-decimal serialization of a unit quaternion perturbs its norm by up to ~1e-6
ROTATION_TOL = 1e-5
LENGTH_MISMATCH_WARN = 0.05
ARC_INFLATE_TOL = 1e-6

EdgeRef = tuple[int, int]


class EdgeKind(str, Enum):
    LINE = "line"
    QUAD = "quad"
    CUBIC = "cubic"
    ARC = "arc"

    @property
    def n_control(self) -> int:
        return {"line": 0, "quad": 1, "cubic": 2, "arc": 0}[self.value]


@dataclass(frozen=True)
class ArcParams:
    radius: float
    large_arc: bool = False
    sweep: bool = True


@dataclass(frozen=True)
class EdgeSpec:
    """One edge of a panel loop.

    ``start``/``end`` index into ``Panel.vertices``. Control points are
    absolute panel-local coordinates.
    """

    start: int
    end: int
    kind: EdgeKind = EdgeKind.LINE
    control: tuple[tuple[float, float], ...] = ()
    arc: ArcParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EdgeKind(self.kind))
        object.__setattr__(self, "control", tuple((float(x), float(y)) for x, y in self.control))


def _as_points(points: Iterable, dim: int) -> tuple:
    out = []
    for p in points:
        p = tuple(float(c) for c in p)
        if len(p) != dim:
            raise SchemaError(f"expected {dim}D point, got {len(p)} coordinates")
        out.append(p)
    return tuple(out)


@dataclass(frozen=True)
class Panel:
    name: str
    vertices: tuple[tuple[float, float], ...]
    edges: tuple[EdgeSpec, ...]
    rotation: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _as_points(self.vertices, 2))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "rotation", tuple(float(c) for c in self.rotation))
        object.__setattr__(self, "translation", tuple(float(c) for c in self.translation))

    def start_point(self, j: int) -> np.ndarray:
        return np.asarray(self.vertices[self.edges[j].start], dtype=float)

    def end_point(self, j: int) -> np.ndarray:
        return np.asarray(self.vertices[self.edges[j].end], dtype=float)

    def corner_loop(self) -> np.ndarray:
        """Start vertex of every edge, in loop order, shape ``(n_edges, 2)``."""
        return np.array([self.vertices[e.start] for e in self.edges], dtype=float).reshape(-1, 2)


@dataclass(frozen=True, order=True)
class Stitch:
    """Unordered pair of edges; stored with ``first < second``."""

    first: EdgeRef
    second: EdgeRef

    def __post_init__(self):
        a = (int(self.first[0]), int(self.first[1]))
        b = (int(self.second[0]), int(self.second[1]))
        if b < a:
            a, b = b, a
        object.__setattr__(self, "first", a)
        object.__setattr__(self, "second", b)


@dataclass(frozen=True)
class SewingPattern:
    """Panels plus stitches. Stitches are kept sorted so equal patterns compare equal."""

    panels: tuple[Panel, ...]
    stitches: tuple[Stitch, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "panels", tuple(self.panels))
        stitches = [s if isinstance(s, Stitch) else Stitch(*s) for s in self.stitches]
        object.__setattr__(self, "stitches", tuple(sorted(stitches)))

    def stitch_of_edge(self) -> dict[EdgeRef, int]:
        """Map each stitched ``(panel, edge)`` to its stitch index."""
        out: dict[EdgeRef, int] = {}
        for k, s in enumerate(self.stitches):
            out.setdefault(s.first, k)
            out.setdefault(s.second, k)
        return out


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    code: str
    message: str
    location: str = ""


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    def error(self, code: str, message: str, location: str = "") -> None:
        self.errors.append(Finding(code, message, location))

    def warn(self, code: str, message: str, location: str = "") -> None:
        self.warnings.append(Finding(code, message, location))

    def to_dict(self) -> dict[str, Any]:
        def rows(items):
            return [{"code": f.code, "message": f.message, "location": f.location} for f in items]

        return {"valid": self.valid, "errors": rows(self.errors), "warnings": rows(self.warnings)}


def _finite(values: Iterable[float]) -> bool:
    return all(math.isfinite(v) for v in values)


def _check_panel(i: int, panel: Panel, report: ValidationReport) -> bool:
    """Structural checks for one panel; True when curve geometry can be evaluated."""
    loc = f"panel {i}"
    ok = True
    n_edges = len(panel.edges)
    if not MIN_EDGES <= n_edges <= MAX_EDGES:
        report.error("edge_count", f"panel has {n_edges} edges, expected {MIN_EDGES}..{MAX_EDGES}", loc)
        ok = False
    coords = [c for v in panel.vertices for c in v] + list(panel.rotation) + list(panel.translation)
    for e in panel.edges:
        coords += [c for p in e.control for c in p]
        if e.arc is not None:
            coords.append(e.arc.radius)
    if not _finite(coords):
        report.error("non_finite", "non-finite coordinate", loc)
        return False
    if len(panel.rotation) != 4 or len(panel.translation) != 3:
        report.error("placement_shape", "rotation needs 4 and translation 3 components", loc)
        ok = False
    elif abs(math.sqrt(sum(c * c for c in panel.rotation)) - 1.0) > ROTATION_TOL:
        report.error("rotation_norm", "rotation is not a unit quaternion", loc)
        ok = False

    n_vert = len(panel.vertices)
    for j, e in enumerate(panel.edges):
        eloc = f"{loc} edge {j}"
        if not (0 <= e.start < n_vert and 0 <= e.end < n_vert):
            report.error("vertex_index", "edge references a missing vertex", eloc)
            ok = False
            continue
        if e.start == e.end:
            report.error("zero_edge", "edge starts and ends at the same vertex", eloc)
            ok = False
        if len(e.control) != e.kind.n_control:
            report.error("control_count", f"{e.kind.value} edge needs {e.kind.n_control} control points, "
                                          f"got {len(e.control)}", eloc)
            ok = False
        if (e.kind is EdgeKind.ARC) != (e.arc is not None):
            report.error("arc_params", "arc parameters must be present exactly for arc edges", eloc)
            ok = False
        elif e.arc is not None:
            chord = math.dist(panel.vertices[e.start], panel.vertices[e.end])
            if e.arc.radius <= 0 or e.arc.radius < chord / 2 - ARC_INFLATE_TOL * chord:
                report.error("arc_radius", f"arc radius {e.arc.radius:g} is below half the chord {chord / 2:g}", eloc)
                ok = False
    if not ok:
        return False

    for j, e in enumerate(panel.edges):
        nxt = panel.edges[(j + 1) % n_edges]
        if e.end != nxt.start:
            gap = math.dist(panel.vertices[e.end], panel.vertices[nxt.start])
            report.error("open_loop", f"open loop: edge {j} ends {gap:.6g} cm away from where edge "
                                      f"{(j + 1) % n_edges} starts", f"{loc} edge {j}")
            ok = False
    starts = sorted(e.start for e in panel.edges)
    if ok and starts != list(range(n_vert)):
        report.error("vertex_inconsistent", "every vertex must start exactly one edge", loc)
        ok = False
    return ok


def validate_pattern(p: SewingPattern) -> ValidationReport:
    """Check every invariant of ``p``; geometry findings (length mismatch,
    self-intersection) are reported as warnings."""
    from . import curves

    report = ValidationReport()
    n_panels = len(p.panels)
    if not 1 <= n_panels <= MAX_PANELS:
        report.error("panel_count", f"pattern has {n_panels} panels, expected 1..{MAX_PANELS}")
    geometric = [_check_panel(i, panel, report) for i, panel in enumerate(p.panels)]

    used: dict[EdgeRef, int] = {}
    for k, s in enumerate(p.stitches):
        loc = f"stitch {k}"
        refs_ok = True
        for pi, ej in (s.first, s.second):
            if not (0 <= pi < n_panels and 0 <= ej < len(p.panels[pi].edges)):
                report.error("dangling_stitch", f"dangling stitch reference ({pi}, {ej})", loc)
                refs_ok = False
        if s.first == s.second:
            report.error("self_stitch", "stitch joins an edge to itself", loc)
            continue
        for ref in (s.first, s.second):
            if ref in used:
                report.error("edge_reused", f"edge {ref} already used by stitch {used[ref]}", loc)
            else:
                used[ref] = k
        if refs_ok and geometric[s.first[0]] and geometric[s.second[0]]:
            la = curves.edge_arc_length(p.panels[s.first[0]], p.panels[s.first[0]].edges[s.first[1]])
            lb = curves.edge_arc_length(p.panels[s.second[0]], p.panels[s.second[0]].edges[s.second[1]])
            mean = (la + lb) / 2
            rel = abs(la - lb) / mean if mean > 0 else 0.0
            if rel > LENGTH_MISMATCH_WARN:
                report.warn("length_mismatch", f"length mismatch {100 * rel:.1f}%", loc)

    for i, panel in enumerate(p.panels):
        if geometric[i] and curves.loop_self_intersects(panel):
            report.warn("self_intersection", "panel boundary self-intersects", f"panel {i}")
    return report


# -- JSON ---------------------------------------------------------------------

_TOP_KEYS = {"panels", "stitches"}
_PANEL_KEYS = {"name", "rotation", "translation", "vertices", "edges"}
_ARC_KEYS = {"radius", "large_arc", "sweep"}


def _check_keys(obj: Any, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    missing = required - obj.keys()
    extra = obj.keys() - required - optional
    if missing:
        raise SchemaError(f"{where}: missing field(s) {sorted(missing)}")
    if extra:
        raise SchemaError(f"{where}: unexpected field(s) {sorted(extra)}")


def _number(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {type(x).__name__}")
    x = float(x)
    if not math.isfinite(x):
        raise NumericError(f"{where}: non-finite value {x}")
    return x


def _integer(x: Any, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise SchemaError(f"{where}: expected an integer")
    return x


def _vector(x: Any, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(x, list) or len(x) != n:
        raise SchemaError(f"{where}: expected a list of {n} numbers")
    return tuple(_number(c, where) for c in x)


def _parse_edge(obj: Any, where: str) -> EdgeSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError(f"{where}: missing field(s) ['kind']")
    try:
        kind = EdgeKind(obj["kind"])
    except ValueError:
        raise SchemaError(f"{where}: unknown edge kind {obj['kind']!r}") from None
    required = {"start", "end", "kind"}
    if kind in (EdgeKind.QUAD, EdgeKind.CUBIC):
        required.add("control")
    if kind is EdgeKind.ARC:
        required.add("arc")
    _check_keys(obj, required, set(), where)
    control = ()
    if "control" in obj:
        if not isinstance(obj["control"], list):
            raise SchemaError(f"{where}: control must be a list of points")
        control = tuple(_vector(c, 2, f"{where}.control") for c in obj["control"])
    arc = None
    if "arc" in obj:
        a = obj["arc"]
        _check_keys(a, _ARC_KEYS, set(), f"{where}.arc")
        if not isinstance(a["large_arc"], bool) or not isinstance(a["sweep"], bool):
            raise SchemaError(f"{where}.arc: flags must be booleans")
        arc = ArcParams(_number(a["radius"], f"{where}.arc.radius"), a["large_arc"], a["sweep"])
    return EdgeSpec(_integer(obj["start"], f"{where}.start"), _integer(obj["end"], f"{where}.end"),
                    kind, control, arc)


def pattern_from_dict(doc: Any) -> SewingPattern:
    """Build a pattern from decoded JSON and enforce every invariant."""
    _check_keys(doc, _TOP_KEYS, set(), "document")
    if not isinstance(doc["panels"], list) or not isinstance(doc["stitches"], list):
        raise SchemaError("document: panels and stitches must be lists")
    panels = []
    for i, obj in enumerate(doc["panels"]):
        where = f"panels[{i}]"
        _check_keys(obj, _PANEL_KEYS, set(), where)
        if not isinstance(obj["name"], str):
            raise SchemaError(f"{where}.name: expected a string")
        if not isinstance(obj["vertices"], list) or not isinstance(obj["edges"], list):
            raise SchemaError(f"{where}: vertices and edges must be lists")
        panels.append(Panel(
            name=obj["name"],
            vertices=[_vector(v, 2, f"{where}.vertices") for v in obj["vertices"]],
            edges=[_parse_edge(e, f"{where}.edges[{j}]") for j, e in enumerate(obj["edges"])],
            rotation=_vector(obj["rotation"], 4, f"{where}.rotation"),
            translation=_vector(obj["translation"], 3, f"{where}.translation"),
        ))
    stitches = []
    for k, s in enumerate(doc["stitches"]):
        where = f"stitches[{k}]"
        if not isinstance(s, list) or len(s) != 2 or not all(isinstance(r, list) and len(r) == 2 for r in s):
            raise SchemaError(f"{where}: expected [[panel, edge], [panel, edge]]")
        stitches.append(Stitch(*(tuple(_integer(c, where) for c in r) for r in s)))

    pattern = SewingPattern(tuple(panels), tuple(stitches))
    report = validate_pattern(pattern)
    if not report.valid:
        first = report.errors[0]
        err = InvariantError(f"{first.message} ({first.location})" if first.location else first.message)
        err.report = report
        raise err
    return pattern


def parse_pattern(text: str | bytes) -> SewingPattern:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    return pattern_from_dict(doc)


def _edge_to_dict(e: EdgeSpec) -> dict[str, Any]:
    out: dict[str, Any] = {"start": e.start, "end": e.end, "kind": e.kind.value}
    if e.kind in (EdgeKind.QUAD, EdgeKind.CUBIC):
        out["control"] = [list(c) for c in e.control]
    if e.arc is not None:
        out["arc"] = {"radius": float(e.arc.radius), "large_arc": bool(e.arc.large_arc),
                      "sweep": bool(e.arc.sweep)}
    return out


def pattern_to_dict(p: SewingPattern) -> dict[str, Any]:
    return {
        "panels": [
            {
                "name": panel.name,
                "rotation": list(panel.rotation),
                "translation": list(panel.translation),
                "vertices": [list(v) for v in panel.vertices],
                "edges": [_edge_to_dict(e) for e in panel.edges],
            }
            for panel in p.panels
        ],
        "stitches": [[list(s.first), list(s.second)] for s in p.stitches],
    }


def serialize_pattern(p: SewingPattern) -> str:
    """Canonical pattern-JSON text (sorted keys, 6-decimal floats, trailing newline)."""
    return jsonfmt.dumps(pattern_to_dict(p)) + "\n"


def canonicalize(p: SewingPattern) -> SewingPattern:
    """Round every value the way serialization does."""
    return parse_pattern(serialize_pattern(p))


def pattern_stats(p: SewingPattern) -> tuple[int, list[int], int]:
    return len(p.panels), [len(panel.edges) for panel in p.panels], len(p.stitches)
