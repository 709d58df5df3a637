"""Linked pairs of 2-changes: classification, enumeration and minimum improvements.

Two 2-changes are linked when an edge removed by one is added by the other.
On six distinct vertices the pair is of type 0; on five it is type 1a when
the two moves have one edge in common and type 1b when they have two.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, Tuple

import numpy as np

from . import kernels
from .tour import RunTrace, TwoChange, _coords, delta, move_table

KINDS = ("Type0", "Type1a", "Type1b")


@dataclass(frozen=True)
class LinkedPair:
    first: TwoChange
    second: TwoChange
    kind: str
    shared_edges: Tuple[frozenset, ...]
    vertex_count: int

    @property
    def improvement(self) -> float:
        return self.first.delta + self.second.delta

    def witness(self):
        return [list(self.first.as_tuple()), list(self.second.as_tuple())]


def _edge_sets(m: TwoChange):
    rem = set(m.removed)
    add = set(m.added)
    return rem, add


def classify_pair(m1: TwoChange, m2: TwoChange):
    """``(kind, shared_edges)`` for a linked type-0/1 pair, else ``None``.

    Linked pairs on only four vertices (e.g. a move and its inverse) are not
    one of the analysed types and also give ``None``.
    """
    r1, a1 = _edge_sets(m1)
    r2, a2 = _edge_sets(m2)
    if not ((r1 & a2) or (r2 & a1)):
        return None
    shared = tuple(sorted((r1 | a1) & (r2 | a2), key=lambda e: sorted(e)))
    nv = len(m1.vertices | m2.vertices)
    if nv == 6:
        return "Type0", shared
    if nv == 5:
        return ("Type1a" if len(shared) == 1 else "Type1b"), shared
    return None


def _make_pair(m1, m2):
    res = classify_pair(m1, m2)
    if res is None:
        return None
    kind, shared = res
    return LinkedPair(m1, m2, kind, shared, len(m1.vertices | m2.vertices))


def _order_pair(m1, m2):
    """Put the move that removes a linking edge first (lexicographic tie-break)."""
    r1, a1 = _edge_sets(m1)
    r2, a2 = _edge_sets(m2)
    one, two = bool(r1 & a2), bool(r2 & a1)
    if one and not two:
        return m1, m2
    if two and not one:
        return m2, m1
    return (m1, m2) if m1.as_tuple() <= m2.as_tuple() else (m2, m1)


def _moves_on(quad, dfun):
    i, j, k, l = quad
    q = (i, j, k, l)
    for pat in kernels.MOVE_PATTERNS:
        a, z1, b, z2 = (q[p] for p in pat)
        yield TwoChange(a, z1, b, z2, dfun(a, z1, b, z2))


def _delta_fn(ps):
    if ps is None:
        return lambda *q: math.nan
    x = _coords(ps)
    return lambda a, z1, b, z2: delta(x, a, z1, b, z2)


def _type0(n, dfun) -> Iterator[LinkedPair]:
    for p, q in itertools.combinations(range(n), 2):
        rest = [v for v in range(n) if v not in (p, q)]
        for u, v in itertools.combinations(rest, 2):
            removers = (TwoChange(p, q, v, u, dfun(p, q, v, u)),
                        TwoChange(p, q, u, v, dfun(p, q, u, v)))
            rest2 = [w for w in rest if w not in (u, v)]
            for x, y in itertools.combinations(rest2, 2):
                adders = (TwoChange(p, x, y, q, dfun(p, x, y, q)),
                          TwoChange(p, y, x, q, dfun(p, y, x, q)))
                for rm in removers:
                    for ad in adders:
                        yield LinkedPair(rm, ad, "Type0", (frozenset((p, q)),), 6)


def _type1(n, dfun, want) -> Iterator[LinkedPair]:
    for five in itertools.combinations(range(n), 5):
        groups = [list(_moves_on(quad, dfun)) for quad in itertools.combinations(five, 4)]
        for g1, g2 in itertools.combinations(groups, 2):
            for m1 in g1:
                for m2 in g2:
                    res = classify_pair(m1, m2)
                    if res is None or res[0] not in want:
                        continue
                    f, s = _order_pair(m1, m2)
                    yield LinkedPair(f, s, res[0], res[1], 5)


def enumerate_linked_pairs(ps, kind: str) -> Iterator[LinkedPair]:
    """Stream every linked pair of the requested kind.

    ``ps`` is a point set (moves carry their deltas) or an int ``n`` for the
    purely combinatorial family. ``kind`` is ``Type0``, ``Type1a``, ``Type1b``
    or ``Type1`` for both type-1 subtypes.
    """
    if isinstance(ps, (int, np.integer)):
        n, dfun = int(ps), _delta_fn(None)
    else:
        n, dfun = _coords(ps).shape[0], _delta_fn(ps)
    if kind == "Type0":
        if n >= 6:
            yield from _type0(n, dfun)
    elif kind in ("Type1", "Type1a", "Type1b"):
        if n >= 5:
            want = ("Type1a", "Type1b") if kind == "Type1" else (kind,)
            yield from _type1(n, dfun, want)
    else:
        raise ValueError(f"unknown linked-pair kind {kind!r}")


def count_linked_pairs(n: int, kind: str) -> int:
    return sum(1 for _ in enumerate_linked_pairs(n, kind))


def _move_key(t):
    a, z1, b, z2 = (int(v) for v in t)
    return frozenset((frozenset((a, z1)), frozenset((b, z2)))), frozenset((frozenset((a, z2)), frozenset((b, z1))))


@lru_cache(maxsize=32)
def pair_table(n: int, kind: str) -> np.ndarray:
    """Linked pairs as rows of indices into ``move_table(n)``."""
    moves = move_table(n)
    index = {_move_key(row): m for m, row in enumerate(moves)}
    rows = [(index[p.first.key()], index[p.second.key()])
            for p in enumerate_linked_pairs(n, kind)]
    out = np.array(rows, dtype=np.int64).reshape(-1, 2)
    out.setflags(write=False)
    return out


def min_linked_improvement(ps, kind: str):
    """``(value, pair)`` minimising ``delta1 + delta2`` over pairs with both deltas > 0.

    Returns ``None`` when no pair of the kind has two improving moves.
    """
    x = _coords(ps)
    n = x.shape[0]
    pairs = pair_table(n, kind)
    if pairs.shape[0] == 0:
        return None
    moves = move_table(n)
    deltas = kernels.batch_move_deltas(x[None], moves)
    vals, idx = kernels.batch_pair_min(deltas, pairs)
    if idx[0] < 0:
        return None
    i1, i2 = pairs[idx[0]]
    m1 = TwoChange(*map(int, moves[i1]), float(deltas[0, i1]))
    m2 = TwoChange(*map(int, moves[i2]), float(deltas[0, i2]))
    return float(vals[0]), _make_pair(m1, m2)


def extract_disjoint_pairs(trace: RunTrace) -> List[LinkedPair]:
    """Greedy earliest-match disjoint linked pairs (type 0 or 1) from an execution."""
    moves = trace.moves
    used = [False] * len(moves)
    out = []
    for i, mi in enumerate(moves):
        if used[i]:
            continue
        for j in range(i + 1, len(moves)):
            if used[j] or not (mi.vertices & moves[j].vertices):
                continue
            pair = _make_pair(mi, moves[j])
            if pair is not None:
                used[i] = used[j] = True
                out.append(pair)
                break
    return out


def census(ps, kinds=KINDS) -> dict:
    """Counts and minimum linked improvements per kind, JSON-ready."""
    x = _coords(ps)
    report = {"n": int(x.shape[0]), "d": int(x.shape[1]), "kinds": {}}
    for kind in kinds:
        entry = {"count": int(pair_table(x.shape[0], kind).shape[0])}
        best = min_linked_improvement(x, kind)
        entry["min_improvement"] = None if best is None else best[0]
        entry["witness"] = None if best is None else best[1].witness()
        report["kinds"][kind] = entry
    return report
