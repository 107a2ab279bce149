"""Quantized mesh tokenization, direct and compressive.

Both schemes start from the same canonical quantized mesh: vertices sorted
bottom-to-top by ``(y, z, x)`` bins, each face rotated to begin at its lowest
vertex index (orientation kept), faces sorted.

*Direct*: nine coordinate tokens per face, ``(y, z, x)`` for each corner,
then EOS. Vocabulary ``M + 1``.

*Compressive*: the faces are covered by fans. A fan around a center vertex is
written as ``PatchStart, center, b0, b1, ...`` and decodes to the triangles
``(center, b_j, b_j+1)``. Each vertex is split into a coarse block id and an
offset inside the block; the block token is only written when it differs from
the previous vertex's block. Flat vocabulary: block ids, then offsets, then
PatchStart and EOS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import jsonfmt
from .errors import ConfigError, FormatError, LengthError, MalformedSequence, RangeError, ShapeError

DEFAULT_RESOLUTION = 128
DEFAULT_BLOCK = 16
MAX_LENGTH = 10000
SCHEMES = ("direct", "compressive")


@dataclass(frozen=True, eq=False)
class QuantizedMesh:
    vertices: np.ndarray  # (V, 3) int bins, columns x, y, z
    faces: np.ndarray  # (F, 3) int
    resolution: int
    dropped_faces: int = 0

    def face_set(self) -> set[tuple[tuple[int, ...], ...]]:
        """Faces as triples of vertex bins, rotated to start at the smallest index."""
        return {tuple(tuple(int(c) for c in self.vertices[i]) for i in f) for f in self.faces}

    def same_as(self, other: "QuantizedMesh") -> bool:
        return (self.resolution == other.resolution
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.faces, other.faces))


def _rotate_min_first(faces: np.ndarray) -> np.ndarray:
    if len(faces) == 0:
        return faces.reshape(0, 3)
    shift = np.argmin(faces, axis=1)
    idx = (shift[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(faces, idx, axis=1)


def canonicalize(bins, faces, resolution: int) -> QuantizedMesh:
    """Merge equal bins, drop degenerate and duplicate faces, sort canonically."""
    bins = np.asarray(bins, dtype=np.int64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    n_in = len(faces)
    if len(bins) == 0 or n_in == 0:
        return QuantizedMesh(np.zeros((0, 3), dtype=np.int64), np.zeros((0, 3), dtype=np.int64),
                             resolution, n_in)
    uniq, inverse = np.unique(bins, axis=0, return_inverse=True)
    faces = inverse.reshape(-1)[faces]
    distinct = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    faces = faces[distinct]
    tri = uniq[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    faces = faces[np.any(cross != 0, axis=1)]

    # bottom-to-top vertex order: y, then z, then x
    order = np.lexsort((uniq[:, 0], uniq[:, 2], uniq[:, 1]))
    used = np.zeros(len(uniq), dtype=bool)
    used[faces.reshape(-1)] = True
    order = order[used[order]]
    remap = np.full(len(uniq), -1, dtype=np.int64)
    remap[order] = np.arange(len(order))
    faces = _rotate_min_first(remap[faces])

    # one face per vertex set, keeping the first in sorted order
    faces = faces[np.lexsort((faces[:, 2], faces[:, 1], faces[:, 0]))]
    key = np.sort(faces, axis=1)
    _, first = np.unique(key, axis=0, return_index=True)
    faces = faces[np.sort(first)]
    return QuantizedMesh(uniq[order], faces, resolution, n_in - len(faces))


def quantize_mesh(mesh, resolution: int = DEFAULT_RESOLUTION) -> QuantizedMesh:
    """Quantize a mesh normalized to [-1, 1] onto an ``M^3`` grid.

    ``bin = clamp(floor((x + 1) / 2 * M), 0, M - 1)``; faces that collapse
    are dropped and counted in ``dropped_faces``.
    """
    if resolution < 2:
        raise ConfigError("resolution must be at least 2")
    v = np.asarray(mesh.vertices, dtype=float)
    if v.size and (v.min() < -1 - 1e-6 or v.max() > 1 + 1e-6):
        raise RangeError("mesh coordinates must lie in [-1, 1]; normalize first")
    bins = np.clip(np.floor((v + 1) / 2 * resolution), 0, resolution - 1).astype(np.int64)
    return canonicalize(bins, mesh.faces, resolution)


def dequantize(bins, resolution: int) -> np.ndarray:
    """Bin centers in [-1, 1]."""
    return -1.0 + (np.asarray(bins, dtype=float) + 0.5) * 2.0 / resolution


@dataclass(frozen=True, eq=False)
class MeshTokenSequence:
    tokens: np.ndarray
    scheme: str
    resolution: int = DEFAULT_RESOLUTION
    block_size: int = DEFAULT_BLOCK

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def vocab_size(self) -> int:
        if self.scheme == "direct":
            return self.resolution + 1
        return _layout(self.resolution, self.block_size).size

    def __eq__(self, other) -> bool:
        return (isinstance(other, MeshTokenSequence) and self.scheme == other.scheme
                and self.resolution == other.resolution and self.block_size == other.block_size
                and np.array_equal(self.tokens, other.tokens))


# -- direct -------------------------------------------------------------------


def _check_length(n: int, max_length: int) -> None:
    if n > max_length:
        raise LengthError(f"sequence of {n} tokens exceeds the maximum of {max_length}")


def tokenize_mesh_direct(q: QuantizedMesh, max_length: int = MAX_LENGTH) -> MeshTokenSequence:
    q = canonicalize(q.vertices, q.faces, q.resolution)
    _check_length(9 * len(q.faces) + 1, max_length)
    yzx = q.vertices[:, [1, 2, 0]]
    body = yzx[q.faces].reshape(-1)
    tokens = np.concatenate([body, [q.resolution]]).astype(np.int64)
    return MeshTokenSequence(tokens, "direct", q.resolution)


def _detokenize_direct(s: MeshTokenSequence) -> QuantizedMesh:
    M = s.resolution
    toks = np.asarray(s.tokens, dtype=np.int64)
    n = len(toks)
    if n == 0 or toks[-1] != M:
        raise MalformedSequence(n, "missing EOS")
    bad = np.nonzero((toks[:-1] < 0) | (toks[:-1] >= M))[0]
    if len(bad):
        raise MalformedSequence(int(bad[0]), f"token {toks[bad[0]]} is not a coordinate")
    if (n - 1) % 9:
        raise MalformedSequence(n - 1 - (n - 1) % 9, "truncated face: coordinate count is not a multiple of 9")
    corners = toks[:-1].reshape(-1, 3, 3)[:, :, [2, 0, 1]]  # back to x, y, z
    bins = corners.reshape(-1, 3)
    faces = np.arange(len(bins)).reshape(-1, 3)
    for k, tri in enumerate(corners):
        if len({tuple(c) for c in tri}) < 3:
            raise MalformedSequence(9 * k, "degenerate face")
    return canonicalize(bins, faces, M)


# -- compressive --------------------------------------------------------------


class _Layout(NamedTuple):
    resolution: int
    block: int
    n_blocks: int  # per axis

    @property
    def offset_base(self) -> int:
        return self.n_blocks ** 3

    @property
    def patch_start(self) -> int:
        return self.offset_base + self.block ** 3

    @property
    def eos(self) -> int:
        return self.patch_start + 1

    @property
    def size(self) -> int:
        return self.eos + 1


def _layout(resolution: int, block: int) -> _Layout:
    if block < 1 or resolution % block:
        raise ConfigError(f"block size {block} must divide the resolution {resolution}")
    return _Layout(resolution, block, resolution // block)


def encode_blocks(bins, resolution: int = DEFAULT_RESOLUTION, block: int = DEFAULT_BLOCK):
    """Block id and in-block offset of ``(x, y, z)`` bins (vectorized).

    ``block = (b_y * N + b_z) * N + b_x`` and ``offset = (o_y * B + o_z) * B + o_x``.
    """
    lay = _layout(resolution, block)
    b = np.asarray(bins, dtype=np.int64)
    hi, lo = b // block, b % block
    x, y, z = hi[..., 0], hi[..., 1], hi[..., 2]
    ox, oy, oz = lo[..., 0], lo[..., 1], lo[..., 2]
    return (y * lay.n_blocks + z) * lay.n_blocks + x, (oy * block + oz) * block + ox


def decode_blocks(block_id, offset, resolution: int = DEFAULT_RESOLUTION, block: int = DEFAULT_BLOCK):
    lay = _layout(resolution, block)
    block_id = np.asarray(block_id, dtype=np.int64)
    offset = np.asarray(offset, dtype=np.int64)
    nb = lay.n_blocks
    by, bz, bx = block_id // (nb * nb), (block_id // nb) % nb, block_id % nb
    oy, oz, ox = offset // (block * block), (offset // block) % block, offset % block
    return np.stack([bx * block + ox, by * block + oy, bz * block + oz], axis=-1)


def _fan_chains(center: int, fan: list[np.ndarray]) -> list[list[int]]:
    """Split the faces around ``center`` into boundary walks b0, b1, ...

    Each face (center, a, b) contributes the directed step a -> b; walks start
    where no step arrives (else at the lowest vertex) and follow the lowest
    outgoing step, so closed fans return to their first vertex.
    """
    out: dict[int, list[int]] = {}
    indeg: dict[int, int] = {}
    for f in fan:
        k = int(np.nonzero(f == center)[0][0])
        a, b = int(f[(k + 1) % 3]), int(f[(k + 2) % 3])
        out.setdefault(a, []).append(b)
        indeg[b] = indeg.get(b, 0) + 1
    for a in out:
        out[a].sort(reverse=True)
    chains = []
    while any(out.values()):
        sources = sorted(a for a, bs in out.items() if bs)
        open_starts = [a for a in sources if indeg.get(a, 0) == 0]
        cur = open_starts[0] if open_starts else sources[0]
        chain = [cur]
        while out.get(cur):
            nxt = out[cur].pop()
            indeg[nxt] -= 1
            chain.append(nxt)
            cur = nxt
        chains.append(chain)
    return chains


def tokenize_mesh_compressive(q: QuantizedMesh, block_size: int = DEFAULT_BLOCK,
                              max_length: int = MAX_LENGTH) -> MeshTokenSequence:
    """Cover the faces with fans around greedy max-degree centers and encode them."""
    lay = _layout(q.resolution, block_size)
    q = canonicalize(q.vertices, q.faces, q.resolution)
    blocks, offsets = encode_blocks(q.vertices, q.resolution, block_size)
    faces = q.faces
    incident: list[list[int]] = [[] for _ in range(len(q.vertices))]
    for fi, f in enumerate(faces):
        for v in f:
            incident[v].append(fi)
    remaining = np.array([len(x) for x in incident], dtype=np.int64)
    visited = np.zeros(len(faces), dtype=bool)

    tokens: list[int] = []
    prev_block = None

    def emit(v: int) -> None:
        nonlocal prev_block
        if blocks[v] != prev_block:
            tokens.append(int(blocks[v]))
            prev_block = blocks[v]
        tokens.append(lay.offset_base + int(offsets[v]))

    left = len(faces)
    while left:
        center = int(np.argmax(remaining))
        fan_ids = [fi for fi in incident[center] if not visited[fi]]
        for chain in _fan_chains(center, [faces[fi] for fi in fan_ids]):
            tokens.append(lay.patch_start)
            emit(center)
            for v in chain:
                emit(v)
        for fi in fan_ids:
            visited[fi] = True
            remaining[faces[fi]] -= 1
        left -= len(fan_ids)
    tokens.append(lay.eos)
    _check_length(len(tokens), max_length)
    return MeshTokenSequence(np.array(tokens, dtype=np.int64), "compressive", q.resolution, block_size)


def _detokenize_compressive(s: MeshTokenSequence) -> QuantizedMesh:
    lay = _layout(s.resolution, s.block_size)
    toks = [int(t) for t in s.tokens]
    n = len(toks)
    if n == 0 or toks[-1] != lay.eos:
        raise MalformedSequence(n, "missing EOS")
    bins: list[np.ndarray] = []
    faces: list[tuple[int, int, int]] = []
    block = None
    pos = 0
    while toks[pos] != lay.eos:
        if toks[pos] != lay.patch_start:
            raise MalformedSequence(pos, "expected PatchStart")
        start = pos
        pos += 1
        patch: list[int] = []
        while toks[pos] not in (lay.patch_start, lay.eos):
            t = toks[pos]
            if not 0 <= t < lay.patch_start:
                raise MalformedSequence(pos, f"token {t} outside vocabulary")
            if t < lay.offset_base:
                block = t
                pos += 1
                if not lay.offset_base <= toks[pos] < lay.patch_start:
                    raise MalformedSequence(pos, "block token not followed by an offset")
                t = toks[pos]
            if block is None:
                raise MalformedSequence(pos, "offset before any block")
            bins.append(decode_blocks(block, t - lay.offset_base, s.resolution, s.block_size))
            patch.append(len(bins) - 1)
            pos += 1
        if len(patch) < 3:
            raise MalformedSequence(start, "dangling PatchStart: a patch needs a center and two boundary vertices")
        c = patch[0]
        for a, b in zip(patch[1:-1], patch[2:]):
            tri = (c, a, b)
            if len({tuple(bins[i]) for i in tri}) < 3:
                raise MalformedSequence(start, "degenerate face")
            faces.append(tri)
    if pos != n - 1:
        raise MalformedSequence(pos + 1, "tokens after EOS")
    return canonicalize(np.array(bins).reshape(-1, 3), np.array(faces).reshape(-1, 3), s.resolution)


def detokenize_mesh(s: MeshTokenSequence) -> QuantizedMesh:
    if s.scheme == "direct":
        return _detokenize_direct(s)
    if s.scheme == "compressive":
        return _detokenize_compressive(s)
    raise ConfigError(f"unknown scheme {s.scheme!r}")


def tokenize_mesh(q: QuantizedMesh, scheme: str, block_size: int = DEFAULT_BLOCK,
                  max_length: int = MAX_LENGTH) -> MeshTokenSequence:
    if scheme == "direct":
        return tokenize_mesh_direct(q, max_length)
    if scheme == "compressive":
        return tokenize_mesh_compressive(q, block_size, max_length)
    raise ConfigError(f"unknown scheme {scheme!r}")


# -- loss ---------------------------------------------------------------------


class ShapeLoss(NamedTuple):
    total: float
    mean: float


def shape_loss(probs, target: MeshTokenSequence | np.ndarray) -> ShapeLoss:
    """Cross-entropy of the target tokens under per-position probability rows."""
    tokens = np.asarray(target.tokens if isinstance(target, MeshTokenSequence) else target, dtype=np.int64)
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.shape[0] != len(tokens):
        raise ShapeError(f"expected {len(tokens)} probability rows, got shape {probs.shape}")
    if len(tokens) and tokens.max() >= probs.shape[1]:
        raise ShapeError("probability rows narrower than the target vocabulary")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-6) or np.any(probs < 0):
        raise ShapeError("probability rows must be non-negative and sum to 1")
    picked = probs[np.arange(len(tokens)), tokens]
    nll = -np.log(np.maximum(picked, np.finfo(float).tiny))
    total = float(nll.sum())
    return ShapeLoss(total, total / len(tokens) if len(tokens) else 0.0)


# -- token file ---------------------------------------------------------------


def dump_mesh_tokens(s: MeshTokenSequence) -> str:
    doc = {"scheme": s.scheme, "resolution": int(s.resolution), "block_size": int(s.block_size),
           "tokens": [int(t) for t in s.tokens]}
    return jsonfmt.dumps(doc) + "\n"


def load_mesh_tokens(text: str) -> MeshTokenSequence:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"token file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or set(doc) != {"scheme", "resolution", "block_size", "tokens"}:
        raise FormatError("token file needs exactly scheme, resolution, block_size and tokens")
    if doc["scheme"] not in SCHEMES:
        raise FormatError(f"unknown scheme {doc['scheme']!r}")
    return MeshTokenSequence(np.array(doc["tokens"], dtype=np.int64).reshape(-1), doc["scheme"],
                             int(doc["resolution"]), int(doc["block_size"]))
