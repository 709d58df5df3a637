"""Tours, 2-changes and the 2-opt local search loop."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from .errors import InvalidInputError, InvalidMoveError, InvalidParameterError
from .instances import PointSet

PIVOT_RULES = ("first", "best", "random")
INITIAL_TOURS = ("random", "identity", "greedy")
REL_THRESHOLD = 1e-12


def _coords(ps) -> np.ndarray:
    if isinstance(ps, PointSet):
        return ps.points
    return np.asarray(ps, dtype=np.float64)


def canonical_order(order) -> np.ndarray:
    """Rotate so vertex 0 comes first, then orient so ``order[1] < order[-1]``."""
    order = np.asarray(order, dtype=np.int64)
    k = int(np.flatnonzero(order == 0)[0])
    out = np.roll(order, -k)
    if out.size > 2 and out[1] > out[-1]:
        out[1:] = out[1:][::-1].copy()
    return out


@dataclass(frozen=True, eq=False)
class Tour:
    """A Hamiltonian cycle, stored in canonical form.

    Rotations and reversals of the same cycle compare equal.
    """

    order: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order)
        if order.ndim != 1 or order.size < 3:
            raise InvalidInputError("a tour needs at least three vertices")
        if not np.array_equal(np.sort(order), np.arange(order.size)):
            raise InvalidInputError("tour order must be a permutation of 0..n-1")
        order = canonical_order(order)
        order.setflags(write=False)
        object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return self.order.size

    def __eq__(self, other):
        return isinstance(other, Tour) and np.array_equal(self.order, other.order)

    def __hash__(self):
        return hash(self.order.tobytes())

    def __repr__(self):
        return f"Tour({self.order.tolist()})"

    def edges(self) -> set:
        o = self.order
        return {frozenset((int(o[i]), int(o[(i + 1) % o.size]))) for i in range(o.size)}

    def has_edge(self, u: int, v: int) -> bool:
        pos = np.empty(self.n, dtype=np.int64)
        pos[self.order] = np.arange(self.n)
        return (pos[u] - pos[v]) % self.n in (1, self.n - 1)


@dataclass(frozen=True)
class TwoChange:
    """Remove ``{a, z1}``, ``{b, z2}``; add ``{a, z2}``, ``{b, z1}``."""

    a: int
    z1: int
    b: int
    z2: int
    delta: float = math.nan

    def __post_init__(self):
        if len({self.a, self.z1, self.b, self.z2}) != 4:
            raise InvalidInputError("a 2-change needs four distinct vertices")

    @property
    def removed(self):
        return frozenset({self.a, self.z1}), frozenset({self.b, self.z2})

    @property
    def added(self):
        return frozenset({self.a, self.z2}), frozenset({self.b, self.z1})

    @property
    def vertices(self) -> frozenset:
        return frozenset({self.a, self.z1, self.b, self.z2})

    def key(self):
        """Identity of the exchange, independent of labelling and delta."""
        return frozenset(self.removed), frozenset(self.added)

    def inverse(self) -> "TwoChange":
        return TwoChange(self.a, self.z2, self.b, self.z1, -self.delta)

    def as_tuple(self):
        return (self.a, self.z1, self.b, self.z2)


def tour_length(tour, ps) -> float:
    x = _coords(ps)
    order = tour.order if isinstance(tour, Tour) else np.asarray(tour, dtype=np.int64)
    if order.size != x.shape[0] or order.min() < 0 or order.max() >= x.shape[0]:
        raise InvalidInputError("tour does not match the point set")
    seg = x[order] - x[np.roll(order, -1)]
    return float(np.sqrt(np.einsum("ij,ij->i", seg, seg)).sum())


def delta(ps, a: int, z1: int, b: int, z2: int) -> float:
    """Length change ``|a-z1| + |b-z2| - |a-z2| - |b-z1|`` (positive means shorter)."""
    if len({a, z1, b, z2}) != 4:
        raise InvalidInputError("delta needs four distinct indices")
    x = _coords(ps)
    d = lambda p, q: float(np.linalg.norm(x[p] - x[q]))  # noqa: E731
    return d(a, z1) + d(b, z2) - d(a, z2) - d(b, z1)


def make_move(ps, a: int, z1: int, b: int, z2: int) -> TwoChange:
    return TwoChange(a, z1, b, z2, delta(ps, a, z1, b, z2))


def law_of_cosines_eta(A: float, R: float, phi: float) -> float:
    """``A - sqrt(A^2 + R^2 - 2 A R cos phi)``."""
    if not (A > 0 and R > 0):
        raise InvalidParameterError("A and R must be positive")
    third = A * A + R * R - 2.0 * A * R * math.cos(phi)
    return A - math.sqrt(max(third, 0.0))


def _reverse_inplace(order, pos, i, j):
    """Reverse the cyclic segment order[i+1..j] via the shorter of the two arcs."""
    n = order.size
    inner = (j - i) % n
    if inner <= n - inner:
        lo, length = i + 1, inner
    else:
        lo, length = j + 1, n - inner
    idx = (lo + np.arange(length)) % n
    order[idx] = order[idx[::-1]]
    pos[order[idx]] = idx


def apply_two_change(tour: Tour, move: TwoChange) -> Tour:
    order = tour.order.copy()
    n = order.size
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    a, z1, b, z2 = move.as_tuple()
    if max(a, z1, b, z2) >= n:
        raise InvalidMoveError("move references a vertex outside the tour")
    if (pos[z1] - pos[a]) % n == n - 1:
        order = order[::-1].copy()
        pos[order] = np.arange(n)
    if (pos[z1] - pos[a]) % n != 1:
        raise InvalidMoveError(f"edge {{{a}, {z1}}} is not in the tour")
    if (pos[b] - pos[z2]) % n != 1:
        if (pos[z2] - pos[b]) % n == 1:
            raise InvalidMoveError("added edges would split the tour into two cycles")
        raise InvalidMoveError(f"edge {{{b}, {z2}}} is not in the tour")
    _reverse_inplace(order, pos, int(pos[a]), int(pos[z2]))
    return Tour(order)


def move_table(n: int) -> np.ndarray:
    """Every 2-change on ``n`` points as ``(a, z1, b, z2)`` rows, ``6 C(n,4)`` of them."""
    quads = np.array(list(itertools.combinations(range(n), 4)), dtype=np.int64).reshape(-1, 4)
    return quads[:, kernels.MOVE_PATTERNS].reshape(-1, 4)


# --------------------------------------------------------------------------
# local search


@dataclass
class RunTrace:
    initial_tour: Tour
    moves: List[TwoChange]
    lengths: List[float]
    pivot: str
    termination: str
    seed: Optional[int] = None
    final_tour: Optional[Tour] = field(default=None, compare=False)

    def __post_init__(self):
        if self.termination not in ("local-optimum", "step-limit"):
            raise InvalidInputError(f"unknown termination reason {self.termination!r}")
        if len(self.lengths) != len(self.moves) + 1:
            raise InvalidInputError("need exactly one length per step plus the initial one")
        for k, mv in enumerate(self.moves):
            before, after = self.lengths[k], self.lengths[k + 1]
            if not after < before:
                raise InvalidInputError(f"tour length does not strictly decrease at step {k}")
            if abs((before - mv.delta) - after) > 1e-9 * before:
                raise InvalidInputError(f"length bookkeeping broken at step {k}")

    @property
    def steps(self) -> int:
        return len(self.moves)

    def to_dict(self) -> dict:
        return {
            "initial_tour": self.initial_tour.order.tolist(),
            "moves": [list(m.as_tuple()) for m in self.moves],
            "deltas": [m.delta for m in self.moves],
            "lengths": list(self.lengths),
            "pivot": self.pivot,
            "termination": self.termination,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunTrace":
        moves = [TwoChange(*map(int, q), float(dv)) for q, dv in zip(doc["moves"], doc["deltas"])]
        return cls(Tour(np.asarray(doc["initial_tour"])), moves, [float(v) for v in doc["lengths"]],
                   doc["pivot"], doc["termination"], doc.get("seed"))


def initial_tour(ps, kind: str = "random", seed: Optional[int] = None) -> Tour:
    x = _coords(ps)
    n = x.shape[0]
    if kind == "identity":
        return Tour(np.arange(n))
    if kind == "random":
        return Tour(np.random.default_rng(seed).permutation(n))
    if kind == "greedy":
        left = np.ones(n, dtype=bool)
        order = [0]
        left[0] = False
        for _ in range(n - 1):
            dist = np.linalg.norm(x - x[order[-1]], axis=1)
            dist[~left] = np.inf
            nxt = int(np.argmin(dist))
            order.append(nxt)
            left[nxt] = False
        return Tour(np.array(order))
    raise InvalidParameterError(f"unknown initial tour kind {kind!r}")


def _pick(x, order, rule, threshold, rng):
    if rule == "first":
        return kernels.scan_first(x, order, threshold)
    if rule == "best":
        return kernels.scan_best(x, order, threshold)
    if rule == "random":
        ii, jj, dd = kernels.improving_moves(x, order, threshold)
        if ii.size == 0:
            return -1, -1, 0.0
        k = int(rng.integers(ii.size))
        return int(ii[k]), int(jj[k]), float(dd[k])
    raise InvalidParameterError(f"unknown pivot rule {rule!r}")


def _move_at(x, order, i, j):
    n = order.size
    a, z1, z2, b = int(order[i]), int(order[i + 1]), int(order[j]), int(order[(j + 1) % n])
    return TwoChange(a, z1, b, z2, delta(x, a, z1, b, z2))


def find_improving(tour: Tour, ps, pivot_rule: str = "first",
                   threshold: Optional[float] = None, seed=None) -> Optional[TwoChange]:
    """An improving 2-change with delta above ``threshold``, or ``None``.

    ``threshold`` defaults to ``1e-12`` times the current tour length.
    ``seed`` may be an int or a ``numpy.random.Generator`` (``random`` rule only).
    """
    x = _coords(ps)
    if threshold is None:
        threshold = REL_THRESHOLD * tour_length(tour, x)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = np.asarray(tour.order, dtype=np.int64)
    i, j, _ = _pick(x, order, pivot_rule, threshold, rng)
    if i < 0:
        return None
    return _move_at(x, order, i, j)


def run_two_opt(tour: Tour, ps, pivot_rule: str = "first", step_limit: Optional[int] = None,
                threshold: Optional[float] = None, seed: Optional[int] = None) -> RunTrace:
    """Apply improving 2-changes until none exceeds the threshold or the step limit hits.

    With ``threshold=None`` the cutoff is re-derived each step as ``1e-12`` times
    the current length.
    """
    if pivot_rule not in PIVOT_RULES:
        raise InvalidParameterError(f"unknown pivot rule {pivot_rule!r}")
    x = _coords(ps)
    order = np.array(tour.order, dtype=np.int64)
    n = order.size
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    rng = np.random.default_rng(seed)
    moves: List[TwoChange] = []
    lengths = [tour_length(order, x)]
    termination = "local-optimum"
    while True:
        if step_limit is not None and len(moves) >= step_limit:
            termination = "step-limit"
            break
        thr = REL_THRESHOLD * lengths[-1] if threshold is None else threshold
        i, j, _ = _pick(x, order, pivot_rule, thr, rng)
        if i < 0:
            break
        mv = _move_at(x, order, i, j)
        _reverse_inplace(order, pos, i, j)
        moves.append(mv)
        lengths.append(tour_length(order, x))
    return RunTrace(tour, moves, lengths, pivot_rule, termination, seed, Tour(order))


def is_local_optimum(tour: Tour, ps, threshold: Optional[float] = None) -> bool:
    """Independent O(n^2) certificate: no position pair improves by more than ``threshold``."""
    x = _coords(ps)
    if threshold is None:
        threshold = REL_THRESHOLD * tour_length(tour, x)
    o = tour.order
    n = o.size
    for i in range(n - 2):
        for j in range(i + 2, n if i > 0 else n - 1):
            if delta(x, int(o[i]), int(o[i + 1]), int(o[(j + 1) % n]), int(o[j])) > threshold:
                return False
    return True


def min_improvement(ps):
    """``(delta_min, witness)`` over every 2-change of the instance, or ``None``.

    All ``6 C(n, 4)`` exchanges are scanned, independent of any tour.
    """
    x = _coords(ps)
    if x.shape[0] < 4:
        raise InvalidParameterError("min_improvement needs n >= 4")
    v, a, z1, b, z2 = kernels.min_all_moves(x)
    if not math.isfinite(v):
        return None
    return v, TwoChange(a, z1, b, z2, v)


def replay(trace: RunTrace, ps) -> List[float]:
    """Lengths recomputed from scratch by applying each recorded move."""
    t = trace.initial_tour
    out = [tour_length(t, ps)]
    for mv in trace.moves:
        t = apply_two_change(t, mv)
        out.append(tour_length(t, ps))
    return out
