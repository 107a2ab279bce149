"""Compare direct and compressive mesh token lengths on generated BoxMeshes."""

from __future__ import annotations

import argparse

import numpy as np

from patternforge.boxmesh import BuildConfig, build_boxmesh, normalize_mesh
from patternforge.mesh_tokens import quantize_mesh, tokenize_mesh_compressive, tokenize_mesh_direct
from patternforge.synth import random_pattern


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=100, help="number of generated patterns")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--resolution", type=int, default=128)
    ap.add_argument("--block-size", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--face-budget", type=int, default=1600)
    args = ap.parse_args()

    cfg = BuildConfig(face_budget=args.face_budget)
    faces, direct = [], []
    comp = {b: [] for b in args.block_size}
    for seed in range(args.seed, args.seed + args.n):
        mesh = normalize_mesh(build_boxmesh(random_pattern(seed), cfg))[0]
        q = quantize_mesh(mesh, args.resolution)
        faces.append(len(q.faces))
        direct.append(len(tokenize_mesh_direct(q, max_length=10**9)))
        for b in args.block_size:
            comp[b].append(len(tokenize_mesh_compressive(q, b, max_length=10**9)))

    direct = np.array(direct)
    print(f"{args.n} meshes, faces mean {np.mean(faces):.1f} max {max(faces)}")
    print(f"{'scheme':<16}{'mean':>10}{'max':>8}{'ratio':>8}")
    print(f"{'direct':<16}{direct.mean():>10.1f}{direct.max():>8d}{1.0:>8.3f}")
    for b, lengths in comp.items():
        lengths = np.array(lengths)
        print(f"{f'compressive B={b}':<16}{lengths.mean():>10.1f}{lengths.max():>8d}"
              f"{np.mean(lengths / direct):>8.3f}")


if __name__ == "__main__":
    main()
