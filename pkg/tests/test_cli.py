import json
import re
import shutil

import numpy as np
import pytest

from patternforge import curves
from patternforge.boxmesh import import_obj
from patternforge.cli import main
from patternforge.pattern import parse_pattern, serialize_pattern
from patternforge.synth import random_pattern

from .conftest import FIXTURES, load_fixture


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def boxmesh_obj(tmp_path, capsys):
    path = tmp_path / "m.obj"
    assert run(capsys, "boxmesh", FIXTURES / "stitched_pair.json", "--out", path)[0] == 0
    return path


# -- validate -----------------------------------------------------------------


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", FIXTURES / "square.json")
    assert code == 0
    assert json.loads(out)["valid"] is True


def test_validate_open_loop(capsys):
    code, out, _ = run(capsys, "validate", FIXTURES / "invalid" / "open_loop.json")
    assert code == 1
    report = json.loads(out)
    assert report["valid"] is False and report["errors"]


def test_validate_missing_file(capsys, tmp_path):
    assert run(capsys, "validate", tmp_path / "nope.json")[0] == 2


def test_validate_not_json(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "validate", bad)[0] == 1


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["validate", "--bogus", "x.json"])
    assert info.value.code == 2
    capsys.readouterr()


# -- boxmesh ------------------------------------------------------------------


def test_boxmesh_square_two_faces(capsys, tmp_path):
    out_path = tmp_path / "sq.obj"
    code, out, _ = run(capsys, "boxmesh", FIXTURES / "square.json", "--out", out_path, "--segment-cm", 100)
    assert code == 0
    assert json.loads(out) == {"faces": 2, "vertices": 4}
    assert import_obj(out_path.read_text()).n_faces == 2


def test_boxmesh_budget_100(capsys, tmp_path):
    out_path = tmp_path / "dense.obj"
    code, out, _ = run(capsys, "boxmesh", FIXTURES / "dense.json", "--out", out_path,
                       "--segment-cm", 0.5, "--face-budget", 100)
    assert code == 0
    assert json.loads(out)["faces"] <= 100
    assert import_obj(out_path.read_text()).n_faces <= 100


def test_boxmesh_normalize(capsys, tmp_path):
    out_path = tmp_path / "n.obj"
    assert run(capsys, "boxmesh", FIXTURES / "random_01.json", "--out", out_path, "--normalize")[0] == 0
    v = import_obj(out_path.read_text()).vertices
    assert v.min() >= -1 and v.max() <= 1


def test_boxmesh_bad_budget(capsys, tmp_path):
    assert run(capsys, "boxmesh", FIXTURES / "square.json", "--out", tmp_path / "x.obj",
               "--face-budget", 1)[0] == 2


def test_boxmesh_invalid_pattern(capsys, tmp_path):
    assert run(capsys, "boxmesh", FIXTURES / "invalid" / "open_loop.json", "--out", tmp_path / "x.obj")[0] == 1


# -- sample -------------------------------------------------------------------


def test_sample_default_count(capsys, tmp_path, boxmesh_obj):
    xyz = tmp_path / "p.xyz"
    assert run(capsys, "sample", boxmesh_obj, "--out", xyz)[0] == 0
    lines = xyz.read_text().splitlines()
    assert len(lines) == 4096
    assert all(len(ln.split()) == 3 for ln in lines)


def test_sample_seed(capsys, tmp_path, boxmesh_obj):
    a, b, c = tmp_path / "a.xyz", tmp_path / "b.xyz", tmp_path / "c.xyz"
    run(capsys, "sample", boxmesh_obj, "--seed", 7, "--out", a)
    run(capsys, "sample", boxmesh_obj, "--seed", 7, "--out", b)
    run(capsys, "sample", boxmesh_obj, "--seed", 8, "--out", c)
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()


def test_global_seed_matches_subcommand_seed(capsys, tmp_path, boxmesh_obj):
    a, b = tmp_path / "a.xyz", tmp_path / "b.xyz"
    run(capsys, "--seed", 5, "sample", boxmesh_obj, "--out", a)
    run(capsys, "sample", boxmesh_obj, "--seed", 5, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_sample_zero_is_usage_error(capsys, tmp_path, boxmesh_obj):
    assert run(capsys, "sample", boxmesh_obj, "-n", 0, "--out", tmp_path / "p.xyz")[0] == 2


# -- tokenize / detokenize ----------------------------------------------------


@pytest.mark.parametrize("name", ["stitched_pair", "curvy", "random_02"])
def test_pattern_token_pipeline(capsys, tmp_path, name):
    src = FIXTURES / f"{name}.json"
    tok, back = tmp_path / "t.json", tmp_path / "back.json"
    assert run(capsys, "tokenize", "--kind", "pattern", src, "--out", tok)[0] == 0
    assert run(capsys, "detokenize", "--kind", "pattern", tok, "--out", back)[0] == 0
    assert back.read_bytes() == src.read_bytes()


def test_pattern_token_pipeline_quantized(capsys, tmp_path):
    src = FIXTURES / "random_03.json"
    tok, back = tmp_path / "t.json", tmp_path / "back.json"
    assert run(capsys, "tokenize", "--kind", "pattern", "--quantize", src, "--out", tok)[0] == 0
    assert run(capsys, "detokenize", "--kind", "pattern", "--quantize", tok, "--out", back)[0] == 0
    p, q = parse_pattern(src.read_text()), parse_pattern(back.read_text())
    assert q.stitches == p.stitches
    for a, b in zip(p.panels, q.panels):
        assert np.abs(np.subtract(a.vertices, b.vertices)).max() <= 0.5 * 300 / 256 + 1e-6


def test_pattern_quantization_mismatch(capsys, tmp_path):
    tok = tmp_path / "t.json"
    run(capsys, "tokenize", "--kind", "pattern", FIXTURES / "square.json", "--out", tok)
    assert run(capsys, "detokenize", "--kind", "pattern", "--quantize", tok, "--out", tmp_path / "b.json")[0] == 1


def test_custom_vocab(capsys, tmp_path):
    vocab = tmp_path / "names.txt"
    vocab.write_text("front\nback\n")
    tok, back = tmp_path / "t.json", tmp_path / "b.json"
    src = FIXTURES / "stitched_pair.json"
    assert run(capsys, "tokenize", "--kind", "pattern", "--vocab", vocab, src, "--out", tok)[0] == 0
    assert run(capsys, "detokenize", "--kind", "pattern", "--vocab", vocab, tok, "--out", back)[0] == 0
    assert back.read_bytes() == src.read_bytes()
    # the default vocabulary hashes differently and refuses the file
    assert run(capsys, "detokenize", "--kind", "pattern", tok, "--out", back)[0] == 1


def mesh_tokens(capsys, tmp_path, kind, *extra, src=None):
    src = src or FIXTURES / "random_04.json"
    tok = tmp_path / f"{kind}.json"
    code, out, _ = run(capsys, "tokenize", "--kind", kind, src, "--out", tok, *extra)
    return code, tok, (json.loads(out)["tokens"] if code == 0 else None)


@pytest.mark.parametrize("kind", ["mesh-direct", "mesh-compressive"])
def test_mesh_token_pipeline(capsys, tmp_path, kind, boxmesh_obj):
    code, tok, _ = mesh_tokens(capsys, tmp_path, kind, src=boxmesh_obj)
    assert code == 0
    out_obj = tmp_path / "back.obj"
    assert run(capsys, "detokenize", "--kind", kind, tok, "--out", out_obj)[0] == 0
    mesh = import_obj(out_obj.read_text())
    assert mesh.n_faces > 0 and np.abs(mesh.vertices).max() <= 1
    # a second pass through the tokenizer is a fixed point
    (tmp_path / "again").mkdir()
    code, tok2, _ = mesh_tokens(capsys, tmp_path / "again", kind, src=out_obj)
    assert tok2.read_bytes() == tok.read_bytes()


def test_compressive_shorter_than_direct(capsys, tmp_path):
    _, _, direct = mesh_tokens(capsys, tmp_path, "mesh-direct")
    _, _, comp = mesh_tokens(capsys, tmp_path, "mesh-compressive")
    assert comp < direct


def test_block_size_must_divide_resolution(capsys, tmp_path):
    assert mesh_tokens(capsys, tmp_path, "mesh-compressive", "--block-size", 12)[0] == 2


def test_mesh_kind_mismatch(capsys, tmp_path):
    _, tok, _ = mesh_tokens(capsys, tmp_path, "mesh-direct")
    assert run(capsys, "detokenize", "--kind", "mesh-compressive", tok, "--out", tmp_path / "x.obj")[0] == 1


def test_malformed_pattern_tokens_report_position(capsys, tmp_path):
    tok = tmp_path / "t.json"
    run(capsys, "tokenize", "--kind", "pattern", FIXTURES / "square.json", "--out", tok)
    doc = json.loads(tok.read_text())
    del doc["tokens"][3]          # drop <R>
    del doc["params"][3]
    tok.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "detokenize", "--kind", "pattern", tok, "--out", tmp_path / "b.json")
    assert code == 1
    assert json.loads(out)["position"] == 3


def unmatched_stitch_tokens(capsys, tmp_path):
    tok = tmp_path / "t.json"
    run(capsys, "tokenize", "--kind", "pattern", FIXTURES / "square.json", "--out", tok)
    doc = json.loads(tok.read_text())
    doc["tokens"][5] = doc["tokens"][5] + 5   # <line:Free> -> <line:S4>
    tok.write_text(json.dumps(doc))
    return tok


def test_unmatched_stitch_strict(capsys, tmp_path):
    tok = unmatched_stitch_tokens(capsys, tmp_path)
    code, out, _ = run(capsys, "detokenize", "--kind", "pattern", tok, "--out", tmp_path / "b.json")
    assert code == 1 and json.loads(out)["position"] == 5


def test_unmatched_stitch_lenient(capsys, tmp_path):
    tok = unmatched_stitch_tokens(capsys, tmp_path)
    back = tmp_path / "b.json"
    code, _, err = run(capsys, "detokenize", "--kind", "pattern", "--lenient", tok, "--out", back)
    assert code == 0
    assert "warning" in err and "S4" in err
    assert back.read_bytes() == (FIXTURES / "square.json").read_bytes()


# -- eval ---------------------------------------------------------------------


def test_eval_self_perfect(capsys, tmp_path):
    src = FIXTURES / "stitched_pair.json"
    report = tmp_path / "r.json"
    assert run(capsys, "eval", "--pred", src, "--gt", src, "--out", report, "--points", 2000)[0] == 0
    r = json.loads(report.read_text())
    assert r["panel_iou"] >= 99.99 and r["panel_l2"] <= 1e-9 and r["cd_boxmesh"] <= 1e-6
    assert r["stitch_precision"] == r["panels_acc"] == r["edges_acc"] == 1.0


def batch_dirs(tmp_path, names, pred_names=None):
    pred, gt = tmp_path / "pred", tmp_path / "gt"
    pred.mkdir()
    gt.mkdir()
    for i, n in enumerate(names):
        shutil.copy(FIXTURES / f"{n}.json", gt / f"{n}.json")
    for i, n in enumerate(pred_names if pred_names is not None else names):
        (pred / f"{n}.json").write_text(serialize_pattern(random_pattern(500 + i)))
    return pred, gt


def test_eval_batch_means(capsys, tmp_path):
    names = ["square", "stitched_pair", "random_00"]
    pred, gt = batch_dirs(tmp_path, names)
    out_path = tmp_path / "r.json"
    assert run(capsys, "eval", "--pred", pred, "--gt", gt, "--out", out_path, "--points", 500)[0] == 0
    doc = json.loads(out_path.read_text())
    assert doc["count"] == 3 and list(doc["files"]) == sorted(f"{n}.json" for n in names)
    for key, mean in doc["mean"].items():
        values = [doc["files"][f][key] for f in doc["files"]]
        assert abs(mean - sum(values) / 3) <= 1e-5 * max(1.0, abs(mean))


def test_eval_batch_thread_count_does_not_change_output(capsys, tmp_path, monkeypatch):
    pred, gt = batch_dirs(tmp_path, ["square", "random_00", "random_01", "curvy"])
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("PATTERNFORGE_THREADS", threads)
        path = tmp_path / f"r{threads}.json"
        assert run(capsys, "eval", "--pred", pred, "--gt", gt, "--out", path, "--points", 300)[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_eval_batch_mismatch(capsys, tmp_path):
    pred, gt = batch_dirs(tmp_path, ["square", "curvy"], pred_names=["square", "extra"])
    code, out, _ = run(capsys, "eval", "--pred", pred, "--gt", gt, "--points", 100)
    assert code == 1
    assert json.loads(out) == {"missing_pred": ["curvy.json"], "missing_gt": ["extra.json"]}


def test_eval_file_against_directory(capsys, tmp_path):
    assert run(capsys, "eval", "--pred", FIXTURES / "square.json", "--gt", FIXTURES)[0] == 2


# -- render -------------------------------------------------------------------


def path_commands(svg):
    return re.findall(r'<path d="M [^ ]+ [^ ]+ ([LQCA]) ([^"]*)"', svg)


def test_render_square(capsys, tmp_path):
    svg = tmp_path / "s.svg"
    assert run(capsys, "render", FIXTURES / "square.json", "--out", svg)[0] == 0
    cmds = path_commands(svg.read_text())
    assert [c for c, _ in cmds] == ["L"] * 4
    assert svg.read_text().count("<g ") == 1


def test_render_arc_flags(capsys, tmp_path):
    src = FIXTURES / "arc_panel.json"
    svg = tmp_path / "a.svg"
    assert run(capsys, "render", src, "--out", svg)[0] == 0
    arcs = [args for c, args in path_commands(svg.read_text()) if c == "A"]
    assert len(arcs) == 1
    rx, ry, rot, large, sweep, x, y = arcs[0].split()
    panel = load_fixture("arc_panel").panels[0]
    edge = next(e for e in panel.edges if e.arc)
    assert (int(large), int(sweep)) == (int(edge.arc.large_arc), int(edge.arc.sweep))
    assert float(rx) == float(ry) == edge.arc.radius
    # SVG semantics in the y-up group: sweep=1 runs through increasing angle,
    # so the half circle from (10, 0) to (-10, 0) passes (0, 10)
    mid = curves.eval_edge(panel, edge, 0.5)
    np.testing.assert_allclose(mid, [0, 10], atol=1e-12)
    assert 'scale(1 -1)' in svg.read_text()


def test_render_stitch_colors(capsys, tmp_path):
    svg = tmp_path / "p.svg"
    run(capsys, "render", FIXTURES / "stitched_pair.json", "--out", svg)
    strokes = re.findall(r'stroke="(#[0-9a-f]{6})" data-stitch="(\d+)"', svg.read_text())
    assert len(strokes) == 4
    by_stitch = {}
    for color, k in strokes:
        by_stitch.setdefault(k, set()).add(color)
    assert all(len(c) == 1 for c in by_stitch.values())
    assert len({c.pop() for c in by_stitch.values()}) == 2


def test_render_no_panels(capsys, tmp_path):
    assert run(capsys, "render", FIXTURES / "invalid" / "no_panels.json", "--out", tmp_path / "x.svg")[0] == 1
