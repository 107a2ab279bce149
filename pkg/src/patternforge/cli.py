"""Command-line entry point.

Exit codes: 0 success, 1 validation/format failure, 2 usage error (bad flags,
missing input files, impossible settings).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import jsonfmt
from .boxmesh import BoxMesh, BuildConfig, build_boxmesh, export_obj, import_obj, normalize_mesh
from .errors import BudgetError, ConfigError, PatternForgeError
from .mesh_tokens import (DEFAULT_BLOCK, DEFAULT_RESOLUTION, MAX_LENGTH, dequantize, detokenize_mesh,
                          dump_mesh_tokens, load_mesh_tokens, quantize_mesh, tokenize_mesh)
from .metrics import evaluate_patterns, mean_report, sample_surface, write_xyz
from .pattern import parse_pattern, pattern_stats, serialize_pattern, validate_pattern, pattern_from_dict
from .pattern_tokens import QuantConfig, detokenize_pattern, dump_tokens, load_tokens, tokenize_pattern, vocab_spec
from .render import render_svg
from .synth import PANEL_NAMES

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "PATTERNFORGE_THREADS"


class UsageError(Exception):
    pass


class Invalid(Exception):
    """Input was read but failed validation; carries an optional JSON payload."""

    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_pattern(path: str):
    text = _read(path)
    try:
        return parse_pattern(text)
    except PatternForgeError as exc:
        payload = None
        report = getattr(exc, "report", None)
        if report is not None:
            payload = report.to_dict()
        raise Invalid(f"{path}: {exc}", payload) from None


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "")))
    except ValueError:
        return max(1, os.cpu_count() or 1)


def _vocab(args):
    if args.vocab:
        text = _read(args.vocab).strip()
        names = json.loads(text) if text.startswith("[") else [ln.strip() for ln in text.splitlines() if ln.strip()]
    else:
        names = list(PANEL_NAMES)
    return vocab_spec(names)[0]


def _info(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


# -- commands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    text = _read(args.pattern)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise Invalid(f"{args.pattern}: not valid JSON: {exc}") from None
    try:
        pattern = pattern_from_dict(doc)
        report = validate_pattern(pattern)
    except PatternForgeError as exc:
        report = getattr(exc, "report", None)
        if report is None:
            raise Invalid(f"{args.pattern}: {exc}",
                          {"valid": False, "errors": [{"code": "schema", "message": str(exc), "location": ""}],
                           "warnings": []}) from None
    sys.stdout.write(jsonfmt.dumps(report.to_dict()) + "\n")
    return EXIT_OK if report.valid else EXIT_INVALID


def _build_config(args) -> BuildConfig:
    if args.face_budget < 4:
        raise UsageError("--face-budget must be at least 4")
    if args.segment_cm is not None and args.segment_cm <= 0:
        raise UsageError("--segment-cm must be positive")
    return BuildConfig(segment_cm=args.segment_cm, face_budget=args.face_budget)


def cmd_boxmesh(args) -> int:
    cfg = _build_config(args)
    pattern = _load_pattern(args.pattern)
    try:
        mesh = build_boxmesh(pattern, cfg)
    except BudgetError as exc:
        raise Invalid(str(exc)) from None
    if args.normalize:
        mesh, scale, center = normalize_mesh(mesh)
        _info(args, f"normalized: scale {scale:.9g}, center {' '.join(f'{c:.9g}' for c in center)}")
    _write(args.out, export_obj(mesh))
    print(jsonfmt.dumps({"faces": mesh.n_faces, "vertices": len(mesh.vertices)}))
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.n < 1:
        raise UsageError("-n must be at least 1")
    try:
        mesh = import_obj(_read(args.obj))
    except PatternForgeError as exc:
        raise Invalid(f"{args.obj}: {exc}") from None
    cloud = sample_surface(mesh, args.n, args.seed)
    _write(args.out, write_xyz(cloud))
    _info(args, f"sampled {args.n} points (seed {args.seed})")
    return EXIT_OK


def _mesh_input(args):
    path = args.input
    if path.endswith(".json"):
        mesh = build_boxmesh(_load_pattern(path), BuildConfig())
    else:
        try:
            mesh = import_obj(_read(path))
        except PatternForgeError as exc:
            raise Invalid(f"{path}: {exc}") from None
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    if lo.min() < -1 or hi.max() > 1:
        mesh = normalize_mesh(mesh)[0]
    return mesh


def cmd_tokenize(args) -> int:
    if args.kind == "pattern":
        pattern = _load_pattern(args.input)
        quant = QuantConfig(quantize=args.quantize)
        vocab = _vocab(args)
        try:
            seq = tokenize_pattern(pattern, vocab, quant)
        except PatternForgeError as exc:
            raise Invalid(str(exc)) from None
        _write(args.out, dump_tokens(seq, vocab, quant))
    else:
        if args.resolution < 2:
            raise UsageError("--resolution must be at least 2")
        if args.kind == "mesh-compressive" and (args.block_size < 1 or args.resolution % args.block_size):
            raise UsageError(f"--block-size {args.block_size} must divide --resolution {args.resolution}")
        q = quantize_mesh(_mesh_input(args), args.resolution)
        scheme = args.kind.split("-", 1)[1]
        try:
            seq = tokenize_mesh(q, scheme, args.block_size, args.max_length)
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        except PatternForgeError as exc:
            raise Invalid(str(exc)) from None
        _write(args.out, dump_mesh_tokens(seq))
    print(jsonfmt.dumps({"tokens": len(seq)}))
    return EXIT_OK


def cmd_detokenize(args) -> int:
    text = _read(args.tokens)
    try:
        if args.kind == "pattern":
            quant = QuantConfig(quantize=args.quantize)
            vocab = _vocab(args)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                pattern = detokenize_pattern(load_tokens(text, vocab, quant), vocab, quant, lenient=args.lenient)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            report = validate_pattern(pattern)
            if not report.valid:
                raise Invalid("decoded pattern is invalid", report.to_dict())
            _write(args.out, serialize_pattern(pattern))
        else:
            seq = load_mesh_tokens(text)
            expected = args.kind.split("-", 1)[1]
            if seq.scheme != expected:
                raise Invalid(f"token file holds a {seq.scheme} sequence, not {expected}")
            q = detokenize_mesh(seq)
            mesh = BoxMesh(dequantize(q.vertices, q.resolution), q.faces, (None,) * len(q.faces))
            _write(args.out, export_obj(mesh))
    except PatternForgeError as exc:
        payload = {"error": str(exc)}
        if hasattr(exc, "position"):
            payload["position"] = exc.position
        raise Invalid(str(exc), payload) from None
    return EXIT_OK


def _eval_pair(pred_path: str, gt_path: str, args):
    pred, gt = _load_pattern(pred_path), _load_pattern(gt_path)
    cfg = BuildConfig(face_budget=args.face_budget)
    return evaluate_patterns(pred, gt, cfg, n_points=args.points, seed=args.seed).scaled(args.scale)


def cmd_eval(args) -> int:
    if args.points < 1:
        raise UsageError("--points must be at least 1")
    pred, gt = Path(args.pred), Path(args.gt)
    if pred.is_dir() != gt.is_dir():
        raise UsageError("--pred and --gt must both be files or both be directories")
    if not pred.is_dir():
        report = _eval_pair(args.pred, args.gt, args)
        _write(args.out, report.to_json())
        return EXIT_OK

    pred_files = {p.name for p in pred.glob("*.json")}
    gt_files = {p.name for p in gt.glob("*.json")}
    if pred_files != gt_files:
        raise Invalid("prediction and ground-truth directories differ",
                      {"missing_pred": sorted(gt_files - pred_files),
                       "missing_gt": sorted(pred_files - gt_files)})
    names = sorted(pred_files)
    if not names:
        raise UsageError("no *.json files to evaluate")
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(lambda n: _eval_pair(str(pred / n), str(gt / n), args), names))
    doc = {"files": {n: r.to_dict() for n, r in zip(names, reports)},
           "mean": mean_report(reports).to_dict(), "count": len(names)}
    _write(args.out, jsonfmt.dumps(doc) + "\n")
    return EXIT_OK


def cmd_render(args) -> int:
    pattern = _load_pattern(args.pattern)
    try:
        svg = render_svg(pattern)
    except ValueError as exc:
        raise Invalid(str(exc)) from None
    _write(args.out, svg)
    n_panels, _, n_stitches = pattern_stats(pattern)
    _info(args, f"rendered {n_panels} panels, {n_stitches} stitches")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patternforge", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--quiet", action="store_true", help="suppress informational messages")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seeded(p):
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        return p

    p = sub.add_parser("validate", help="check a pattern file and print a JSON report")
    p.add_argument("pattern")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("boxmesh", help="build a BoxMesh OBJ from a pattern")
    p.add_argument("pattern")
    p.add_argument("--out", required=True)
    p.add_argument("--face-budget", type=int, default=1600)
    p.add_argument("--segment-cm", type=float, default=None)
    p.add_argument("--normalize", action="store_true")
    p.set_defaults(func=cmd_boxmesh)

    p = seeded(sub.add_parser("sample", help="sample points on an OBJ surface"))
    p.add_argument("obj")
    p.add_argument("-n", type=int, default=4096)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    kinds = ("pattern", "mesh-direct", "mesh-compressive")
    p = sub.add_parser("tokenize", help="write a token file for a pattern or mesh")
    p.add_argument("--kind", choices=kinds, required=True)
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK)
    p.add_argument("--max-length", type=int, default=MAX_LENGTH)
    p.add_argument("--quantize", action="store_true")
    p.add_argument("--vocab", help="panel names, JSON list or one per line")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("detokenize", help="decode a token file")
    p.add_argument("--kind", choices=kinds, required=True)
    p.add_argument("tokens")
    p.add_argument("--out", required=True)
    p.add_argument("--lenient", action="store_true", help="drop unmatched stitch slots (pattern kind)")
    p.add_argument("--quantize", action="store_true")
    p.add_argument("--vocab")
    p.set_defaults(func=cmd_detokenize)

    p = seeded(sub.add_parser("eval", help="score predicted patterns against ground truth"))
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.add_argument("--points", type=int, default=10000)
    p.add_argument("--face-budget", type=int, default=1600)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier for length-valued metrics")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="draw a pattern as SVG")
    p.add_argument("pattern")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"patternforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Invalid as exc:
        if exc.payload is not None:
            sys.stdout.write(jsonfmt.dumps(exc.payload) + "\n")
        print(f"patternforge: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
