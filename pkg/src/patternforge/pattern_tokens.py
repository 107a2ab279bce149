"""Structured token sequences for sewing patterns.

Grammar::

    <SoG> { <SoP> name <R> edge edge edge ... <EoP> } <EoG>

Each edge token fuses the edge kind with a stitch slot (``Free`` or
``S0..S127``); the two edges of a stitch share a slot. Continuous values ride
alongside the tokens as fixed-width rows:

* edge rows (10 channels): end vertex xy, two control points xy, arc
  radius / large-arc flag / sweep flag, one reserved zero;
* ``<R>`` rows: quaternion ``(x, y, z, w)`` then translation xyz;
* every other row is zero.

The start vertex of an edge is the end of the previous one, so it is not
encoded.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import jsonfmt
from .errors import (DuplicateName, FormatError, MalformedSequence, RangeError, ShapeError, UnmatchedStitch,
                     VocabError)
from .pattern import ArcParams, EdgeKind, EdgeSpec, Panel, SewingPattern, Stitch

SPECIALS = ("<SoG>", "<EoG>", "<SoP>", "<EoP>", "<R>")
SOG, EOG, SOP, EOP, R_TOKEN = range(5)
UNK_PANEL = "UNK_PANEL"
N_SLOTS = 128
KINDS = (EdgeKind.LINE, EdgeKind.QUAD, EdgeKind.CUBIC, EdgeKind.ARC)
WIDTH = 10

# channel layout of an edge row
END = slice(0, 2)
CONTROL = slice(2, 6)
RADIUS, LARGE_ARC, SWEEP, RESERVED = 6, 7, 8, 9
ACTIVE_EDGE_CHANNELS = {
    EdgeKind.LINE: (0, 1),
    EdgeKind.QUAD: (0, 1, 2, 3),
    EdgeKind.CUBIC: (0, 1, 2, 3, 4, 5),
    EdgeKind.ARC: (0, 1, RADIUS, LARGE_ARC, SWEEP),
}
ACTIVE_R_CHANNELS = tuple(range(7))


@dataclass(frozen=True)
class PatternVocab:
    """Dense token ids: specials, sorted panel names + UNK, then (kind, slot) edge tokens."""

    names: tuple[str, ...]

    @property
    def name_base(self) -> int:
        return len(SPECIALS)

    @property
    def unk_id(self) -> int:
        return self.name_base + len(self.names)

    @property
    def edge_base(self) -> int:
        return self.unk_id + 1

    @property
    def size(self) -> int:
        return self.edge_base + len(KINDS) * (N_SLOTS + 1)

    def name_id(self, name: str) -> int:
        try:
            return self.name_base + self.names.index(name)
        except ValueError:
            return self.unk_id

    def edge_id(self, kind: EdgeKind, slot: int | None) -> int:
        """Token for ``kind`` with stitch slot ``slot`` (None = free)."""
        if slot is not None and not 0 <= slot < N_SLOTS:
            raise VocabError(f"stitch slot {slot} outside 0..{N_SLOTS - 1}")
        return self.edge_base + KINDS.index(kind) * (N_SLOTS + 1) + (0 if slot is None else slot + 1)

    def decode_edge(self, token: int) -> tuple[EdgeKind, int | None]:
        k, s = divmod(token - self.edge_base, N_SLOTS + 1)
        return KINDS[k], (None if s == 0 else s - 1)

    def is_name(self, token: int) -> bool:
        return self.name_base <= token <= self.unk_id

    def is_edge(self, token: int) -> bool:
        return self.edge_base <= token < self.size

    def token_str(self, token: int) -> str:
        if 0 <= token < len(SPECIALS):
            return SPECIALS[token]
        if self.is_name(token):
            return UNK_PANEL if token == self.unk_id else self.names[token - self.name_base]
        if self.is_edge(token):
            kind, slot = self.decode_edge(token)
            return f"<{kind.value}:{'Free' if slot is None else f'S{slot}'}>"
        raise VocabError(f"token {token} outside vocabulary of size {self.size}")

    def table(self) -> str:
        return "\n".join(f"{i}\t{self.token_str(i)}" for i in range(self.size))

    def hash(self, quant: "QuantConfig | None" = None) -> str:
        """Short fingerprint of the vocabulary (and quantization, when given)."""
        payload = {"names": list(self.names), "slots": N_SLOTS, "kinds": [k.value for k in KINDS]}
        if quant is not None:
            payload["quant"] = quant.to_dict()
        return hashlib.sha256(jsonfmt.dumps(payload).encode()).hexdigest()[:16]


def vocab_spec(names: Sequence[str]) -> tuple[PatternVocab, str]:
    """Vocabulary over ``names`` plus its human-readable id table."""
    names = list(names)
    if not names:
        raise VocabError("at least one panel name is required")
    seen = set()
    for n in names:
        if n in seen:
            raise DuplicateName(f"duplicate panel name {n!r}")
        if n == UNK_PANEL:
            raise VocabError(f"{UNK_PANEL} is reserved")
        seen.add(n)
    vocab = PatternVocab(tuple(sorted(names)))
    return vocab, vocab.table()


def _default_ranges() -> tuple[tuple[tuple[float, float], ...], tuple[tuple[float, float], ...]]:
    cm = (-150.0, 150.0)
    edge = (cm, cm, cm, cm, cm, cm, (0.0, 300.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    rot = ((-1.0, 1.0),) * 4 + (cm,) * 3 + ((0.0, 1.0),) * 3
    return edge, rot


@dataclass(frozen=True)
class QuantConfig:
    """Optional uniform quantization of the continuous channels.

    Edge rows and ``<R>`` rows have their own per-channel ranges. In quantized
    mode the rows carry bin indices; decoding maps them to bin centers.
    """

    quantize: bool = False
    bins: int = 256
    edge_ranges: tuple[tuple[float, float], ...] = field(default_factory=lambda: _default_ranges()[0])
    r_ranges: tuple[tuple[float, float], ...] = field(default_factory=lambda: _default_ranges()[1])

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        for lo, hi in self.edge_ranges + self.r_ranges:
            if not lo < hi:
                raise ValueError(f"invalid range ({lo}, {hi})")
        if len(self.edge_ranges) != WIDTH or len(self.r_ranges) != WIDTH:
            raise ValueError(f"ranges need {WIDTH} channels")

    def bin_width(self, ranges) -> np.ndarray:
        r = np.asarray(ranges, dtype=float)
        return (r[:, 1] - r[:, 0]) / self.bins

    def to_dict(self) -> dict:
        return {"quantize": self.quantize, "bins": self.bins,
                "edge_ranges": [list(r) for r in self.edge_ranges],
                "r_ranges": [list(r) for r in self.r_ranges]}

    def encode(self, row: np.ndarray, ranges, channels, position: int) -> np.ndarray:
        out = np.zeros(WIDTH)
        r = np.asarray(ranges, dtype=float)
        for c in channels:
            lo, hi = r[c]
            x = row[c]
            if not lo <= x <= hi:
                raise RangeError(f"position {position} channel {c}: {x:g} outside [{lo:g}, {hi:g}]")
            out[c] = min(int(np.floor((x - lo) / (hi - lo) * self.bins)), self.bins - 1)
        return out

    def decode(self, row: np.ndarray, ranges) -> np.ndarray:
        r = np.asarray(ranges, dtype=float)
        bins = np.clip(np.round(row), 0, self.bins - 1)
        return r[:, 0] + (bins + 0.5) * (r[:, 1] - r[:, 0]) / self.bins


@dataclass(frozen=True, eq=False)
class PatternTokenSequence:
    tokens: np.ndarray  # (L,) int
    params: np.ndarray  # (L, WIDTH) float

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return (isinstance(other, PatternTokenSequence) and np.array_equal(self.tokens, other.tokens)
                and np.array_equal(self.params, other.params))


def sequence_length(p: SewingPattern) -> int:
    return 2 + sum(4 + len(panel.edges) for panel in p.panels)


def _edge_row(panel: Panel, e: EdgeSpec) -> np.ndarray:
    row = np.zeros(WIDTH)
    row[END] = panel.vertices[e.end]
    for k, c in enumerate(e.control[:2]):
        row[2 + 2 * k: 4 + 2 * k] = c
    if e.arc is not None:
        row[RADIUS] = e.arc.radius
        row[LARGE_ARC] = float(bool(e.arc.large_arc))
        row[SWEEP] = float(bool(e.arc.sweep))
    return row


def tokenize_pattern(p: SewingPattern, vocab: PatternVocab, quant: QuantConfig | None = None
                     ) -> PatternTokenSequence:
    quant = quant or QuantConfig()
    if len(p.stitches) > N_SLOTS:
        raise VocabError(f"{len(p.stitches)} stitches exceed the {N_SLOTS} stitch slots")
    stitch_of = p.stitch_of_edge()
    slot_of_stitch: dict[int, int] = {}

    tokens = [SOG]
    rows = [np.zeros(WIDTH)]
    for i, panel in enumerate(p.panels):
        tokens += [SOP, vocab.name_id(panel.name), R_TOKEN]
        r_row = np.zeros(WIDTH)
        r_row[:4] = panel.rotation
        r_row[4:7] = panel.translation
        if quant.quantize:
            r_row = quant.encode(r_row, quant.r_ranges, ACTIVE_R_CHANNELS, len(rows) + 2)
        rows += [np.zeros(WIDTH), np.zeros(WIDTH), r_row]
        for j, e in enumerate(panel.edges):
            slot = None
            if (i, j) in stitch_of:
                slot = slot_of_stitch.setdefault(stitch_of[(i, j)], len(slot_of_stitch))
            tokens.append(vocab.edge_id(e.kind, slot))
            row = _edge_row(panel, e)
            if quant.quantize:
                row = quant.encode(row, quant.edge_ranges, ACTIVE_EDGE_CHANNELS[e.kind], len(rows))
            rows.append(row)
        tokens.append(EOP)
        rows.append(np.zeros(WIDTH))
    tokens.append(EOG)
    rows.append(np.zeros(WIDTH))
    return PatternTokenSequence(np.array(tokens, dtype=int), np.array(rows, dtype=float))


def detokenize_pattern(s: PatternTokenSequence, vocab: PatternVocab, quant: QuantConfig | None = None,
                       lenient: bool = False) -> SewingPattern:
    """Rebuild a pattern from a token sequence, checking the grammar as it goes.

    Structure violations raise MalformedSequence with the offending position. A
    stitch slot seen only once raises UnmatchedStitch, or is dropped with a
    warning when ``lenient``.
    """
    quant = quant or QuantConfig()
    tokens = [int(t) for t in s.tokens]
    params = np.asarray(s.params, dtype=float)
    if params.shape != (len(tokens), WIDTH):
        raise MalformedSequence(0, f"params shape {params.shape} does not match {len(tokens)} tokens")
    n = len(tokens)
    for pos, tok in enumerate(tokens):
        if not 0 <= tok < vocab.size:
            raise MalformedSequence(pos, f"token {tok} outside vocabulary")
    if n == 0 or tokens[0] != SOG:
        raise MalformedSequence(0, "sequence must start with <SoG>")

    panels: list[Panel] = []
    slot_refs: dict[int, list[tuple[tuple[int, int], int]]] = {}
    pos = 1
    while True:
        if pos >= n:
            raise MalformedSequence(pos, "missing <EoG>")
        tok = tokens[pos]
        if tok == EOG:
            if pos != n - 1:
                raise MalformedSequence(pos + 1, "tokens after <EoG>")
            break
        if tok != SOP:
            raise MalformedSequence(pos, f"expected <SoP> or <EoG>, got {vocab.token_str(tok)}")
        if pos + 1 >= n or not vocab.is_name(tokens[pos + 1]):
            raise MalformedSequence(pos + 1, "expected a panel name token after <SoP>")
        name = vocab.token_str(tokens[pos + 1])
        if pos + 2 >= n or tokens[pos + 2] != R_TOKEN:
            raise MalformedSequence(pos + 2, "expected <R> after the panel name")
        r_row = params[pos + 2]
        if quant.quantize:
            r_row = quant.decode(r_row, quant.r_ranges)
        rotation = r_row[:4]
        if quant.quantize:
            norm = np.linalg.norm(rotation)
            rotation = rotation / norm if norm > 0 else np.array([0.0, 0.0, 0.0, 1.0])
        translation = r_row[4:7]
        pos += 3
        edge_tokens: list[tuple[int, EdgeKind, int | None, np.ndarray]] = []
        while pos < n and vocab.is_edge(tokens[pos]):
            kind, slot = vocab.decode_edge(tokens[pos])
            row = params[pos]
            if quant.quantize:
                row = quant.decode(row, quant.edge_ranges)
            edge_tokens.append((pos, kind, slot, row))
            pos += 1
        if pos >= n:
            raise MalformedSequence(pos, "missing <EoP>")
        if tokens[pos] != EOP:
            raise MalformedSequence(pos, f"expected an edge token or <EoP>, got {vocab.token_str(tokens[pos])}")
        if len(edge_tokens) < 3:
            raise MalformedSequence(pos, f"panel closed after {len(edge_tokens)} edge tokens, need at least 3")
        pos += 1

        i = len(panels)
        m = len(edge_tokens)
        vertices = [tuple(float(c) for c in edge_tokens[j - 1][3][END]) for j in range(m)]
        edges = []
        for j, (tpos, kind, slot, row) in enumerate(edge_tokens):
            control = [tuple(row[2 + 2 * k: 4 + 2 * k]) for k in range(kind.n_control)]
            arc = None
            if kind is EdgeKind.ARC:
                arc = ArcParams(float(row[RADIUS]), bool(row[LARGE_ARC] > 0.5), bool(row[SWEEP] > 0.5))
            edges.append(EdgeSpec(j, (j + 1) % m, kind, control, arc))
            if slot is not None:
                slot_refs.setdefault(slot, []).append(((i, j), tpos))
        panels.append(Panel(name, vertices, edges, tuple(rotation), tuple(translation)))

    stitches = []
    for slot in sorted(slot_refs):
        refs = slot_refs[slot]
        if len(refs) > 2:
            raise MalformedSequence(refs[2][1], f"stitch slot S{slot} used more than twice")
        if len(refs) == 1:
            if not lenient:
                raise UnmatchedStitch(refs[0][1], slot)
            warnings.warn(f"dropping unmatched stitch slot S{slot} at position {refs[0][1]}", RuntimeWarning)
            continue
        stitches.append(Stitch(refs[0][0], refs[1][0]))
    return SewingPattern(tuple(panels), tuple(stitches))


def active_channels(token: int, vocab: PatternVocab) -> tuple[int, ...]:
    if token == R_TOKEN:
        return ACTIVE_R_CHANNELS
    if vocab.is_edge(token):
        return ACTIVE_EDGE_CHANNELS[vocab.decode_edge(token)[0]]
    return ()


def pattern_loss(probs, continuous, target: PatternTokenSequence, vocab: PatternVocab,
                 weight: float = 1.0) -> float:
    """Token cross-entropy plus ``weight`` times the continuous-channel MSE.

    Both terms are means over positions; the MSE at a position averages only
    the channels its target token uses (positions with none contribute zero).
    """
    probs = np.asarray(probs, dtype=float)
    continuous = np.asarray(continuous, dtype=float)
    L = len(target.tokens)
    if probs.ndim != 2 or probs.shape[0] != L:
        raise ShapeError(f"expected {L} probability rows, got shape {probs.shape}")
    if continuous.shape != (L, WIDTH):
        raise ShapeError(f"expected continuous rows of shape {(L, WIDTH)}, got {continuous.shape}")
    if np.any(target.tokens >= probs.shape[1]):
        raise ShapeError("probability rows narrower than the target vocabulary")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-6) or np.any(probs < 0):
        raise ShapeError("probability rows must be non-negative and sum to 1")

    picked = probs[np.arange(L), target.tokens]
    ce = float(np.mean(-np.log(np.maximum(picked, np.finfo(float).tiny))))
    sq = (continuous - target.params) ** 2
    per_pos = np.zeros(L)
    for k, tok in enumerate(target.tokens):
        ch = active_channels(int(tok), vocab)
        if ch:
            per_pos[k] = sq[k, list(ch)].mean()
    return ce + weight * float(per_pos.mean())


# -- token file ---------------------------------------------------------------


def dump_tokens(s: PatternTokenSequence, vocab: PatternVocab, quant: QuantConfig | None = None) -> str:
    quant = quant or QuantConfig()
    params = [[int(v) if quant.quantize else float(v) for v in row] for row in s.params]
    doc = {"vocab_hash": vocab.hash(quant), "tokens": [int(t) for t in s.tokens], "params": params}
    return jsonfmt.dumps(doc) + "\n"


def load_tokens(text: str, vocab: PatternVocab, quant: QuantConfig | None = None) -> PatternTokenSequence:
    quant = quant or QuantConfig()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"token file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or set(doc) != {"vocab_hash", "tokens", "params"}:
        raise FormatError("token file needs exactly vocab_hash, tokens and params")
    if doc["vocab_hash"] != vocab.hash(quant):
        raise FormatError("token file was written with a different vocabulary or quantization")
    tokens = np.array(doc["tokens"], dtype=int).reshape(-1)
    params = np.array(doc["params"], dtype=float).reshape(len(tokens), WIDTH) if tokens.size else np.zeros((0, WIDTH))
    return PatternTokenSequence(tokens, params)
