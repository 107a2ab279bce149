"""Time the metric pipeline on generated prediction/ground-truth pairs.

Each ground-truth pattern is paired with itself and with a perturbed copy
(vertices jittered, translations shifted), so the report shows both the
self-evaluation floor and how the scores react to a known perturbation.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

import numpy as np

from patternforge.metrics import evaluate_patterns, mean_report
from patternforge.pattern import SewingPattern, validate_pattern
from patternforge.synth import random_pattern


def perturb(p: SewingPattern, rng: np.random.Generator, cm: float) -> SewingPattern:
    panels = []
    for panel in p.panels:
        v = np.asarray(panel.vertices) + rng.normal(scale=cm, size=(len(panel.vertices), 2))
        t = np.asarray(panel.translation) + rng.normal(scale=cm, size=3)
        panels.append(replace(panel, vertices=tuple(map(tuple, v.round(6))), translation=tuple(t.round(6))))
    return SewingPattern(tuple(panels), p.stitches)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-n", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--points", type=int, default=10000)
    ap.add_argument("--jitter-cm", type=float, default=0.5)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    same, noisy = [], []
    start = time.perf_counter()
    for seed in range(args.seed, args.seed + args.n):
        gt = random_pattern(seed)
        same.append(evaluate_patterns(gt, gt, n_points=args.points, seed=seed))
        pred = perturb(gt, rng, args.jitter_cm)
        if validate_pattern(pred).valid:
            noisy.append(evaluate_patterns(pred, gt, n_points=args.points, seed=seed))
    elapsed = time.perf_counter() - start

    print(f"{args.n} patterns, {elapsed:.2f} s total, {elapsed / (args.n + len(noisy)):.3f} s per evaluation")
    for label, reports in (("self", same), (f"jitter {args.jitter_cm} cm", noisy)):
        if not reports:
            continue
        m = mean_report(reports).to_dict()
        print(f"[{label}] " + " ".join(f"{k}={v:.4g}" for k, v in m.items()))


if __name__ == "__main__":
    main()
