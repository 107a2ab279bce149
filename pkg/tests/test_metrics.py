import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patternforge.boxmesh import BoxMesh, build_boxmesh
from patternforge.errors import EmptyMesh
from patternforge.metrics import (MetricReport, chamfer, count_acc, evaluate_patterns, hausdorff, match_panels,
                                  mean_report, panel_iou_metric, panel_l2, rot_l2, sample_surface,
                                  stitch_precision, transl_l2, write_xyz)
from patternforge.pattern import EdgeSpec, Panel, SewingPattern, Stitch
from patternforge.synth import random_pattern, square_panel

from . import oracles


def two_triangles():
    # areas 1 and 3
    v = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0], [10, 0, 0], [13, 0, 0], [10, 2, 0]], float)
    return BoxMesh(v, np.array([[0, 1, 2], [3, 4, 5]]), (None, None))


# -- sampling -----------------------------------------------------------------


def test_sample_count_and_determinism():
    m = build_boxmesh(random_pattern(1))
    a, b = sample_surface(m, 4096, seed=3), sample_surface(m, 4096, seed=3)
    assert len(a) == 4096
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, sample_surface(m, 4096, seed=4).points)


def test_samples_lie_on_faces():
    m = two_triangles()
    c = sample_surface(m, 1000, seed=0)
    assert np.all(c.barycentric >= 0)
    np.testing.assert_allclose(c.barycentric.sum(axis=1), 1.0)
    tri = m.vertices[m.faces[c.face_index]]
    np.testing.assert_allclose(np.einsum("ij,ijk->ik", c.barycentric, tri), c.points)


def test_area_weighting_binomial_band():
    lo, hi = oracles.binomial_band(10000, 0.25)
    excursions = 0
    for seed in range(20):
        counts = np.bincount(sample_surface(two_triangles(), 10000, seed).face_index, minlength=2)
        excursions += not lo <= counts[0] <= hi
    assert excursions <= 1


def test_uniform_within_triangle():
    m = two_triangles()
    c = sample_surface(m, 20000, seed=1)
    inner = c.points[c.face_index == 1]
    # the sub-triangle with corners at the edge midpoints holds a quarter of the area
    b = c.barycentric[c.face_index == 1]
    frac = np.mean(np.all(b <= 0.5, axis=1))
    assert abs(frac - 0.25) < 4 * math.sqrt(0.25 * 0.75 / len(inner))


def test_sampling_errors():
    with pytest.raises(EmptyMesh):
        sample_surface(BoxMesh(np.zeros((0, 3)), np.zeros((0, 3), int), ()), 10)
    with pytest.raises(ValueError):
        sample_surface(two_triangles(), 0)


def test_xyz_format():
    text = write_xyz(np.array([[1.0, -2.5, 1 / 3]]))
    assert text == "1.000000 -2.500000 0.333333\n"


# -- distances ----------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chamfer_hausdorff_brute_force(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(rng.integers(1, 501), 3))
    b = rng.normal(size=(rng.integers(1, 501), 3)) + rng.normal(size=3)
    cd, hd = chamfer(a, b), hausdorff(a, b)
    assert abs(cd - oracles.brute_chamfer(a, b)) <= 1e-12
    assert abs(hd - oracles.brute_hausdorff(a, b)) <= 1e-12
    assert hd >= cd
    assert chamfer(b, a) == cd and hausdorff(b, a) == hd


def test_distances_zero_on_self():
    a = np.random.default_rng(0).normal(size=(100, 3))
    assert chamfer(a, a) == 0.0 and hausdorff(a, a) == 0.0


def test_empty_cloud():
    with pytest.raises(EmptyMesh):
        chamfer(np.zeros((0, 3)), np.zeros((3, 3)))


# -- panel metrics ------------------------------------------------------------


def test_identical_panels():
    p = square_panel(10.0)
    assert panel_l2(p, p) == 0.0
    assert panel_iou_metric(p, p) == 1.0


def test_shifted_square_iou():
    assert abs(panel_iou_metric(square_panel(1.0), square_panel(1.0, origin=(0.5, 0.0))) - 1 / 3) < 1e-9


def test_split_edge_same_region():
    split = Panel("front", [(0, 0), (5, 0), (10, 0), (10, 10), (0, 10)], [EdgeSpec(j, (j + 1) % 5) for j in range(5)])
    sq = square_panel(10.0)
    assert abs(panel_iou_metric(split, sq) - 1.0) < 1e-12
    assert panel_l2(split, sq) < 1e-12
    assert len(split.edges) != len(sq.edges)


def test_panel_l2_cyclic_and_reversed():
    sq = square_panel(10.0)
    shifted = Panel("front", [sq.vertices[(j + 2) % 4] for j in range(4)], sq.edges)
    reversed_ = Panel("front", sq.vertices[::-1], sq.edges)
    assert panel_l2(shifted, sq) == 0.0
    assert panel_l2(reversed_, sq) == 0.0


def test_panel_l2_translation():
    assert abs(panel_l2(square_panel(10.0, origin=(3.0, 4.0)), square_panel(10.0)) - 5.0) < 1e-12


S = math.sqrt(0.5)


def test_rotation_distance():
    a = square_panel(1.0)
    assert rot_l2(a, a) == 0.0
    assert rot_l2(replace(a, rotation=(0, 0, 0, -1)), a) == 0.0
    assert abs(rot_l2(replace(a, rotation=(0, 0, 1, 0)), a) - math.sqrt(2)) < 1e-15
    assert abs(rot_l2(replace(a, rotation=(0, 0, S, S)), a) - math.sqrt(2 - math.sqrt(2))) < 1e-12


def test_translation_distance():
    assert transl_l2(square_panel(1.0, translation=(3, 4, 0)), square_panel(1.0)) == 5.0


# -- matching and counts ------------------------------------------------------


def test_match_identity_and_missing():
    p = random_pattern(3)
    m = match_panels(p, p)
    assert m.pairs == [(i, i) for i in range(len(p.panels))]
    assert m.unmatched_pred == [] and m.unmatched_gt == []
    if len(p.panels) > 1:
        fewer = SewingPattern(p.panels[1:])
        m = match_panels(fewer, p)
        assert len(m.pairs) == len(p.panels) - 1 and len(m.unmatched_gt) == 1


def test_same_name_matched_by_translation():
    left = square_panel(1.0, "sleeve_l", translation=(-30, 0, 0))
    right = square_panel(1.0, "sleeve_l", translation=(30, 0, 0))
    gt = SewingPattern((left, right))
    pred = SewingPattern((replace(right, translation=(29, 0, 0)), replace(left, translation=(-31, 0, 0))))
    assert match_panels(pred, gt).pairs == [(0, 1), (1, 0)]


def test_names_take_priority():
    gt = SewingPattern((square_panel(1.0, "front", translation=(0, 0, 0)),
                        square_panel(1.0, "back", translation=(50, 0, 0))))
    pred = SewingPattern((square_panel(1.0, "back", translation=(1, 0, 0)),
                          square_panel(1.0, "front", translation=(49, 0, 0))))
    assert match_panels(pred, gt).pairs == [(0, 1), (1, 0)]


def test_count_accuracy():
    p = random_pattern(12, n_panels=6)
    m = match_panels(p, p)
    assert count_acc(p, p, m) == (1.0, 1.0)
    fewer = SewingPattern(p.panels[:5])
    assert count_acc(fewer, p, match_panels(fewer, p))[0] == 0.0


def test_stitch_precision():
    a, b = square_panel(1.0, "front"), square_panel(1.0, "back")
    s1, s2, s3 = Stitch((0, 0), (1, 0)), Stitch((0, 1), (1, 1)), Stitch((0, 2), (1, 2))
    pred = SewingPattern((a, b), (s1, s2))
    gt = SewingPattern((a, b), (s1, s3))
    assert stitch_precision(pred, gt, match_panels(pred, gt)) == 0.5
    empty = SewingPattern((a, b))
    assert stitch_precision(empty, gt, match_panels(empty, gt)) == 0.0
    assert stitch_precision(empty, empty, match_panels(empty, empty)) == 1.0


def test_stitch_precision_through_permuted_match():
    a, b = square_panel(1.0, "front"), square_panel(1.0, "back", translation=(5, 0, 0))
    gt = SewingPattern((a, b), (Stitch((0, 1), (1, 3)),))
    pred = SewingPattern((b, a), (Stitch((1, 1), (0, 3)),))
    assert stitch_precision(pred, gt, match_panels(pred, gt)) == 1.0


# -- full evaluation ----------------------------------------------------------


def test_self_evaluation_perfect(fixture_pattern):
    r = evaluate_patterns(fixture_pattern, fixture_pattern, n_points=2000)
    assert r.panel_iou >= 99.99
    assert r.panel_l2 <= 1e-9 and r.rot_l2 <= 1e-9 and r.transl_l2 <= 1e-9
    assert r.panels_acc == r.edges_acc == r.stitch_precision == 1.0
    assert r.cd_boxmesh <= 1e-6 and r.hd_boxmesh <= 1e-6


def test_rigid_shift():
    gt = random_pattern(21)
    pred = SewingPattern(tuple(replace(p, translation=(p.translation[0] + 1, *p.translation[1:]))
                               for p in gt.panels), gt.stitches)
    r = evaluate_patterns(pred, gt, n_points=10000)
    assert abs(r.transl_l2 - 1.0) < 1e-9
    assert abs(r.panel_iou - 100.0) < 1e-9
    # shifted copies of the same samples are 1 apart; nearer neighbours can only shorten that
    assert 0.0 < r.cd_boxmesh <= 1.0 + 1e-9


def test_missing_stitch():
    gt = SewingPattern((square_panel(10.0, "front"), square_panel(10.0, "back", translation=(0, 0, 5))),
                       (Stitch((0, 0), (1, 0)),))
    pred = SewingPattern(gt.panels)
    r = evaluate_patterns(pred, gt, n_points=4000)
    assert r.stitch_precision == 0.0
    assert r.panel_iou == 100.0 and r.panel_l2 == 0.0 and r.transl_l2 == 0.0
    assert r.cd_boxmesh > 0


def test_unmatched_panels_count_as_zero_iou():
    gt = SewingPattern((square_panel(10.0, "front"), square_panel(10.0, "back", translation=(30, 0, 0))))
    pred = SewingPattern(gt.panels[:1])
    r = evaluate_patterns(pred, gt, n_points=500)
    assert r.panel_iou == 50.0
    assert (r.n_matched, r.n_unmatched_pred, r.n_unmatched_gt) == (1, 0, 1)
    assert r.panels_acc == 0.0


def test_report_scaling_and_mean():
    r = evaluate_patterns(random_pattern(2), random_pattern(3), n_points=500)
    s = r.scaled(10.0)
    assert s.panel_l2 == 10 * r.panel_l2 and s.cd_boxmesh == 10 * r.cd_boxmesh
    assert s.panel_iou == r.panel_iou and s.rot_l2 == r.rot_l2
    m = mean_report([r, s])
    assert abs(m.hd_boxmesh - 5.5 * r.hd_boxmesh) < 1e-12
    assert set(r.to_dict()) == set(MetricReport.__dataclass_fields__)
