"""Surface sampling and the evaluation suite for predicted sewing patterns."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from . import curves, jsonfmt
from .boxmesh import BoxMesh, BuildConfig, build_boxmesh
from .errors import EmptyMesh
from .pattern import Panel, SewingPattern, Stitch

IOU_SAMPLES_PER_EDGE = 16


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (n, 3)
    seed: int | None = None
    face_index: np.ndarray | None = None
    barycentric: np.ndarray | None = None  # (n, 3), rows sum to 1

    def __len__(self) -> int:
        return len(self.points)


def sample_surface(m: BoxMesh, n: int, seed: int = 0) -> PointCloud:
    """``n`` points uniformly distributed over the surface of ``m``.

    Faces are drawn with probability proportional to area, then a point is
    drawn uniformly inside the face (square-root barycentric warp).
    """
    if m.n_faces == 0:
        raise EmptyMesh("cannot sample an empty mesh")
    if n < 1:
        raise ValueError("sample count must be at least 1")
    areas = m.face_areas()
    total = areas.sum()
    if not total > 0:
        raise EmptyMesh("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(areas)
    face = np.minimum(np.searchsorted(cum, rng.random(n) * total, side="right"), len(areas) - 1)
    r1, r2 = rng.random(n), rng.random(n)
    s = np.sqrt(r1)
    bary = np.column_stack([1 - s, s * (1 - r2), s * r2])
    tri = m.vertices[m.faces[face]]
    points = np.einsum("ij,ijk->ik", bary, tri)
    return PointCloud(points, seed, face, bary)


def _points(c) -> np.ndarray:
    return np.asarray(c.points if isinstance(c, PointCloud) else c, dtype=float).reshape(-1, 3)


def nearest_distances(a, b) -> np.ndarray:
    """Distance from every point of ``a`` to its nearest neighbour in ``b``."""
    pa, pb = _points(a), _points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyMesh("point clouds must be non-empty")
    d, _ = cKDTree(pb).query(pa, k=1)
    return d


def chamfer(a, b) -> float:
    """Symmetric Chamfer distance: mean of the two mean nearest-neighbour distances."""
    return 0.5 * float(nearest_distances(a, b).mean() + nearest_distances(b, a).mean())


def hausdorff(a, b) -> float:
    return float(max(nearest_distances(a, b).max(), nearest_distances(b, a).max()))


# -- pattern metrics ----------------------------------------------------------


@dataclass
class PanelMatch:
    pairs: list[tuple[int, int]] = field(default_factory=list)  # (pred, gt)
    unmatched_pred: list[int] = field(default_factory=list)
    unmatched_gt: list[int] = field(default_factory=list)


def _assign(pred_idx, gt_idx, pred: SewingPattern, gt: SewingPattern) -> list[tuple[int, int]]:
    if not pred_idx or not gt_idx:
        return []
    tp = np.array([pred.panels[i].translation for i in pred_idx])
    tg = np.array([gt.panels[j].translation for j in gt_idx])
    cost = np.linalg.norm(tp[:, None, :] - tg[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return [(pred_idx[r], gt_idx[c]) for r, c in zip(rows, cols)]


def match_panels(pred: SewingPattern, gt: SewingPattern) -> PanelMatch:
    """Pair panels by name first, then leftovers by nearest translation.

    Within a name, and among the leftovers, the pairing minimizes the total
    translation distance.
    """
    pairs = []
    names = sorted({p.name for p in pred.panels} & {g.name for g in gt.panels})
    for name in names:
        pi = [i for i, p in enumerate(pred.panels) if p.name == name]
        gi = [j for j, g in enumerate(gt.panels) if g.name == name]
        pairs += _assign(pi, gi, pred, gt)
    used_p = {p for p, _ in pairs}
    used_g = {g for _, g in pairs}
    rest_p = [i for i in range(len(pred.panels)) if i not in used_p]
    rest_g = [j for j in range(len(gt.panels)) if j not in used_g]
    pairs += _assign(rest_p, rest_g, pred, gt)
    pairs.sort()
    used_p = {p for p, _ in pairs}
    used_g = {g for _, g in pairs}
    return PanelMatch(
        pairs,
        [i for i in range(len(pred.panels)) if i not in used_p],
        [j for j in range(len(gt.panels)) if j not in used_g],
    )


def _resample_loop(loop: np.ndarray, n: int) -> np.ndarray:
    """``n`` points spaced evenly by arc length along a closed polyline, starting at loop[0]."""
    closed = np.vstack([loop, loop[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.arange(n) * cum[-1] / n
    return np.column_stack([np.interp(s, cum, closed[:, 0]), np.interp(s, cum, closed[:, 1])])


def panel_l2(pred: Panel, gt: Panel) -> float:
    """Mean distance between corresponding boundary vertices of two panels.

    The correspondence is the cyclic shift and direction of the loop that
    minimizes the mean. When the vertex counts differ, both loops are
    resampled evenly by arc length to the larger count, so splitting an edge
    without changing the outline costs nothing.
    """
    a, b = pred.corner_loop(), gt.corner_loop()
    n = max(len(a), len(b))
    if len(a) != len(b):
        a, b = _resample_loop(a, n), _resample_loop(b, n)
    best = np.inf
    idx = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n  # row = shift
    for cand in (a, a[::-1]):
        d = np.linalg.norm(cand[idx] - b[None, :, :], axis=2).mean(axis=1)
        best = min(best, float(d.min()))
    return best


def panel_iou_metric(pred: Panel, gt: Panel, samples: int = IOU_SAMPLES_PER_EDGE) -> float:
    return curves.polygon_iou(curves.panel_boundary(pred, samples), curves.panel_boundary(gt, samples))


def rot_l2(pred: Panel, gt: Panel) -> float:
    """Quaternion distance with the double cover folded out."""
    qp = np.asarray(pred.rotation, float)
    qg = np.asarray(gt.rotation, float)
    qp, qg = qp / np.linalg.norm(qp), qg / np.linalg.norm(qg)
    return float(min(np.linalg.norm(qp - qg), np.linalg.norm(qp + qg)))


def transl_l2(pred: Panel, gt: Panel) -> float:
    return float(np.linalg.norm(np.subtract(pred.translation, gt.translation)))


def count_acc(pred: SewingPattern, gt: SewingPattern, match: PanelMatch) -> tuple[float, float]:
    """(#panels accuracy, fraction of matched panels with the right edge count)."""
    panels_acc = float(len(pred.panels) == len(gt.panels))
    if not match.pairs:
        return panels_acc, 0.0
    same = [len(pred.panels[i].edges) == len(gt.panels[j].edges) for i, j in match.pairs]
    return panels_acc, float(np.mean(same))


def stitch_precision(pred: SewingPattern, gt: SewingPattern, match: PanelMatch) -> float:
    if not pred.stitches:
        return 1.0 if not gt.stitches else 0.0
    to_gt = dict(match.pairs)
    gt_set = set(gt.stitches)
    hits = 0
    for s in pred.stitches:
        (pa, ea), (pb, eb) = s.first, s.second
        if pa in to_gt and pb in to_gt and Stitch((to_gt[pa], ea), (to_gt[pb], eb)) in gt_set:
            hits += 1
    return hits / len(pred.stitches)


@dataclass
class MetricReport:
    panel_iou: float  # percent
    panel_l2: float
    rot_l2: float
    transl_l2: float
    panels_acc: float
    edges_acc: float
    stitch_precision: float
    cd_boxmesh: float
    hd_boxmesh: float
    n_matched: int = 0
    n_unmatched_pred: int = 0
    n_unmatched_gt: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return jsonfmt.dumps(self.to_dict()) + "\n"

    def scaled(self, factor: float) -> "MetricReport":
        """Copy with every length-valued metric multiplied by ``factor``."""
        d = self.to_dict()
        for k in ("panel_l2", "transl_l2", "cd_boxmesh", "hd_boxmesh"):
            d[k] *= factor
        return MetricReport(**d)


def evaluate_patterns(pred: SewingPattern, gt: SewingPattern, cfg: BuildConfig | None = None,
                      n_points: int = 10000, seed: int = 0) -> MetricReport:
    """Every pattern metric plus Chamfer/Hausdorff between the two BoxMeshes.

    Per-panel scores are means over matched pairs; unmatched panels on either
    side count as IoU 0 and are left out of the L2 means.
    """
    cfg = cfg or BuildConfig()
    match = match_panels(pred, gt)
    ious, l2s, rots, trans = [], [], [], []
    for i, j in match.pairs:
        pp, gp = pred.panels[i], gt.panels[j]
        ious.append(panel_iou_metric(pp, gp))
        l2s.append(panel_l2(pp, gp))
        rots.append(rot_l2(pp, gp))
        trans.append(transl_l2(pp, gp))
    n_iou = len(match.pairs) + len(match.unmatched_pred) + len(match.unmatched_gt)
    panels_acc, edges_acc = count_acc(pred, gt, match)

    cloud_p = sample_surface(build_boxmesh(pred, cfg), n_points, seed)
    cloud_g = sample_surface(build_boxmesh(gt, cfg), n_points, seed)

    def mean(xs):
        return float(np.mean(xs)) if xs else 0.0

    return MetricReport(
        panel_iou=100.0 * (sum(ious) / n_iou) if n_iou else 0.0,
        panel_l2=mean(l2s),
        rot_l2=mean(rots),
        transl_l2=mean(trans),
        panels_acc=panels_acc,
        edges_acc=edges_acc,
        stitch_precision=stitch_precision(pred, gt, match),
        cd_boxmesh=chamfer(cloud_p, cloud_g),
        hd_boxmesh=hausdorff(cloud_p, cloud_g),
        n_matched=len(match.pairs),
        n_unmatched_pred=len(match.unmatched_pred),
        n_unmatched_gt=len(match.unmatched_gt),
    )


def mean_report(reports: list[MetricReport]) -> MetricReport:
    """Unweighted mean of every field over a batch."""
    keys = MetricReport.__dataclass_fields__
    d = {k: float(np.mean([getattr(r, k) for r in reports])) for k in keys}
    return MetricReport(**d)


def write_xyz(cloud) -> str:
    return "".join(f"{x:.6f} {y:.6f} {z:.6f}\n" for x, y, z in _points(cloud))
