"""Regenerate the pattern fixtures under tests/fixtures/."""

from __future__ import annotations

import argparse
from pathlib import Path

from patternforge.pattern import ArcParams, EdgeKind, EdgeSpec, Panel, SewingPattern, Stitch, serialize_pattern
from patternforge.synth import random_pattern, square_panel

S = 0.7071067811865476


def fixtures() -> dict[str, SewingPattern]:
    out = {}
    out["square"] = SewingPattern((square_panel(10.0),), ())
    out["stitched_pair"] = SewingPattern(
        (square_panel(20.0, "front", translation=(0.0, 0.0, 10.0)),
         square_panel(20.0, "back", rotation=(0.0, 1.0, 0.0, 0.0), translation=(20.0, 0.0, -10.0))),
        (Stitch((0, 1), (1, 3)), Stitch((0, 3), (1, 1))),
    )
    # half disc; the diameter is split because panels need three edges
    half_disc = Panel(
        "collar", [(-10.0, 0.0), (0.0, 0.0), (10.0, 0.0)],
        [EdgeSpec(0, 1), EdgeSpec(1, 2), EdgeSpec(2, 0, EdgeKind.ARC, arc=ArcParams(10.0, False, True))],
        (round(S, 6), 0.0, 0.0, round(S, 6)), (0.0, 30.0, 0.0),
    )
    out["arc_panel"] = SewingPattern((half_disc,), ())
    curvy = Panel(
        "skirt_front", [(0.0, 0.0), (30.0, 0.0), (30.0, 40.0), (0.0, 40.0)],
        [EdgeSpec(0, 1, EdgeKind.QUAD, [(15.0, -5.0)]),
         EdgeSpec(1, 2, EdgeKind.CUBIC, [(33.0, 13.0), (27.0, 27.0)]),
         EdgeSpec(2, 3, EdgeKind.ARC, arc=ArcParams(25.0, False, True)),
         EdgeSpec(3, 0)],
        (0.0, 0.0, 0.0, 1.0), (-15.0, -20.0, 12.0),
    )
    out["curvy"] = SewingPattern((curvy,), ())
    for seed in range(6):
        out[f"random_{seed:02d}"] = random_pattern(seed)
    out["dense"] = random_pattern(1000, n_panels=8)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    patterns = fixtures()
    for name, pattern in patterns.items():
        (out / f"{name}.json").write_text(serialize_pattern(pattern))
    # invalid on purpose: the last edge does not return to vertex 0
    (out / "invalid").mkdir(exist_ok=True)
    sq = serialize_pattern(fixtures()["square"])
    open_loop = sq.replace('{"end":0,"kind":"line","start":3}', '{"end":1,"kind":"line","start":3}')
    (out / "invalid" / "open_loop.json").write_text(open_loop)
    (out / "invalid" / "no_panels.json").write_text('{"panels":[],"stitches":[]}\n')
    print(f"wrote {len(patterns) + 2} fixtures to {out}")


if __name__ == "__main__":
    main()
