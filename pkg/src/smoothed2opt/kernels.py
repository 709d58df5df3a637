"""Hot inner loops, in a numba flavour and a vectorized numpy flavour.

Both flavours share signatures and must agree to rounding. The public names
at the bottom of the module dispatch on ``_accel.USE_NUMBA``; the explicit
``NUMBA`` and ``NUMPY`` tables exist for tests and the benchmark.

Tour scans use position pairs ``(i, j)`` with ``i < j``. The move at ``(i, j)``
removes edges ``(t[i], t[i+1])`` and ``(t[j], t[j+1])`` and reverses the
segment ``t[i+1..j]``. In the ``(a, z1, b, z2)`` convention that is
``a = t[i], z1 = t[i+1], z2 = t[j], b = t[j+1]``.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit

# --------------------------------------------------------------------------
# numba flavour


@njit
def _nb_dist(x, p, q):
    s = 0.0
    for k in range(x.shape[1]):
        t = x[p, k] - x[q, k]
        s += t * t
    return math.sqrt(s)


@njit
def _nb_pair_delta(x, order, i, j):
    n = order.shape[0]
    a = order[i]
    z1 = order[i + 1]
    z2 = order[j]
    b = order[(j + 1) % n]
    return (_nb_dist(x, a, z1) + _nb_dist(x, z2, b)
            - _nb_dist(x, a, z2) - _nb_dist(x, z1, b))


@njit
def _nb_scan_first(x, order, threshold):
    n = order.shape[0]
    for i in range(n - 2):
        jmax = n - 1 if i > 0 else n - 2
        for j in range(i + 2, jmax + 1):
            d = _nb_pair_delta(x, order, i, j)
            if d > threshold:
                return i, j, d
    return -1, -1, 0.0


@njit
def _nb_scan_best(x, order, threshold):
    n = order.shape[0]
    bi = -1
    bj = -1
    best = threshold
    for i in range(n - 2):
        jmax = n - 1 if i > 0 else n - 2
        for j in range(i + 2, jmax + 1):
            d = _nb_pair_delta(x, order, i, j)
            if d > best:
                best = d
                bi = i
                bj = j
    if bi < 0:
        return -1, -1, 0.0
    return bi, bj, best


@njit
def _nb_improving_moves(x, order, threshold):
    n = order.shape[0]
    cap = n * n
    ii = np.empty(cap, dtype=np.int64)
    jj = np.empty(cap, dtype=np.int64)
    dd = np.empty(cap, dtype=np.float64)
    m = 0
    for i in range(n - 2):
        jmax = n - 1 if i > 0 else n - 2
        for j in range(i + 2, jmax + 1):
            d = _nb_pair_delta(x, order, i, j)
            if d > threshold:
                ii[m] = i
                jj[m] = j
                dd[m] = d
                m += 1
    return ii[:m].copy(), jj[:m].copy(), dd[:m].copy()


@njit
def _nb_batch_move_deltas(pts, moves):
    T = pts.shape[0]
    M = moves.shape[0]
    out = np.empty((T, M))
    for t in range(T):
        x = pts[t]
        for m in range(M):
            a = moves[m, 0]
            z1 = moves[m, 1]
            b = moves[m, 2]
            z2 = moves[m, 3]
            out[t, m] = (_nb_dist(x, a, z1) + _nb_dist(x, b, z2)
                         - _nb_dist(x, a, z2) - _nb_dist(x, b, z1))
    return out


@njit
def _nb_batch_min_positive(deltas):
    T, M = deltas.shape
    vals = np.full(T, np.inf)
    idx = np.full(T, -1, dtype=np.int64)
    for t in range(T):
        for m in range(M):
            d = deltas[t, m]
            if d > 0.0 and d < vals[t]:
                vals[t] = d
                idx[t] = m
    return vals, idx


@njit
def _nb_batch_pair_min(deltas, pairs):
    T = deltas.shape[0]
    P = pairs.shape[0]
    vals = np.full(T, np.inf)
    idx = np.full(T, -1, dtype=np.int64)
    for t in range(T):
        for p in range(P):
            d1 = deltas[t, pairs[p, 0]]
            d2 = deltas[t, pairs[p, 1]]
            if d1 > 0.0 and d2 > 0.0:
                s = d1 + d2
                if s < vals[t]:
                    vals[t] = s
                    idx[t] = p
    return vals, idx


@njit
def _nb_min_all_moves(x):
    n = x.shape[0]
    best = np.inf
    wa = -1
    wz1 = -1
    wb = -1
    wz2 = -1
    for i in range(n):
        for j in range(i + 1, n):
            dij = _nb_dist(x, i, j)
            for k in range(j + 1, n):
                dik = _nb_dist(x, i, k)
                djk = _nb_dist(x, j, k)
                for l in range(k + 1, n):
                    dil = _nb_dist(x, i, l)
                    djl = _nb_dist(x, j, l)
                    dkl = _nb_dist(x, k, l)
                    # (a, z1, b, z2) rows in MOVE_PATTERNS order
                    c0 = dij + dkl - dil - djk
                    c1 = dij + dkl - dik - djl
                    c2 = dik + djl - dil - djk
                    c3 = dik + djl - dij - dkl
                    c4 = dil + djk - dik - djl
                    c5 = dil + djk - dij - dkl
                    cs = (c0, c1, c2, c3, c4, c5)
                    for m in range(6):
                        c = cs[m]
                        if c > 0.0 and c < best:
                            best = c
                            if m == 0:
                                wa, wz1, wb, wz2 = i, j, k, l
                            elif m == 1:
                                wa, wz1, wb, wz2 = i, j, l, k
                            elif m == 2:
                                wa, wz1, wb, wz2 = i, k, j, l
                            elif m == 3:
                                wa, wz1, wb, wz2 = i, k, l, j
                            elif m == 4:
                                wa, wz1, wb, wz2 = i, l, j, k
                            else:
                                wa, wz1, wb, wz2 = i, l, k, j
    return best, wa, wz1, wb, wz2


# --------------------------------------------------------------------------
# numpy flavour


def _np_dist_matrix(x):
    diff = x[..., :, None, :] - x[..., None, :, :]
    return np.sqrt(np.einsum("...k,...k->...", diff, diff))


def _np_position_pairs(n):
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    return i[keep], j[keep]


def _np_tour_deltas(x, order):
    n = order.shape[0]
    i, j = _np_position_pairs(n)
    D = _np_dist_matrix(x)
    a = order[i]
    z1 = order[i + 1]
    z2 = order[j]
    b = order[(j + 1) % n]
    return i, j, D[a, z1] + D[z2, b] - D[a, z2] - D[z1, b]


def _np_scan_first(x, order, threshold):
    i, j, d = _np_tour_deltas(x, order)
    hit = np.flatnonzero(d > threshold)
    if hit.size == 0:
        return -1, -1, 0.0
    k = hit[0]  # triu_indices is already lexicographic in (i, j)
    return int(i[k]), int(j[k]), float(d[k])


def _np_scan_best(x, order, threshold):
    i, j, d = _np_tour_deltas(x, order)
    if d.size == 0:
        return -1, -1, 0.0
    k = int(np.argmax(d))
    if not d[k] > threshold:
        return -1, -1, 0.0
    return int(i[k]), int(j[k]), float(d[k])


def _np_improving_moves(x, order, threshold):
    i, j, d = _np_tour_deltas(x, order)
    keep = d > threshold
    return i[keep].astype(np.int64), j[keep].astype(np.int64), d[keep]


def _np_batch_move_deltas(pts, moves):
    D = _np_dist_matrix(pts)
    a, z1, b, z2 = moves.T
    return D[:, a, z1] + D[:, b, z2] - D[:, a, z2] - D[:, b, z1]


def _np_batch_min_positive(deltas):
    masked = np.where(deltas > 0.0, deltas, np.inf)
    idx = np.argmin(masked, axis=1)
    vals = masked[np.arange(masked.shape[0]), idx]
    idx = np.where(np.isfinite(vals), idx, -1)
    return vals, idx.astype(np.int64)


def _np_batch_pair_min(deltas, pairs):
    if pairs.shape[0] == 0:
        T = deltas.shape[0]
        return np.full(T, np.inf), np.full(T, -1, dtype=np.int64)
    d1 = deltas[:, pairs[:, 0]]
    d2 = deltas[:, pairs[:, 1]]
    s = np.where((d1 > 0.0) & (d2 > 0.0), d1 + d2, np.inf)
    return _np_batch_min_positive(s)


# Six moves on the sorted 4-set (i, j, k, l), as (a, z1, b, z2) index patterns.
MOVE_PATTERNS = np.array([[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3],
                          [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1]], dtype=np.int64)


def _np_min_all_moves(x):
    n = x.shape[0]
    D = _np_dist_matrix(x)
    best = (np.inf, -1, -1, -1, -1)
    for i in range(n - 3):
        rest = np.arange(i + 1, n)
        jkl = np.array(np.meshgrid(rest, rest, rest, indexing="ij")).reshape(3, -1).T
        jkl = jkl[(jkl[:, 0] < jkl[:, 1]) & (jkl[:, 1] < jkl[:, 2])]
        if jkl.size == 0:
            continue
        quad = np.column_stack([np.full(len(jkl), i), jkl])
        moves = quad[:, MOVE_PATTERNS].reshape(-1, 4)
        a, z1, b, z2 = moves.T
        c = D[a, z1] + D[b, z2] - D[a, z2] - D[b, z1]
        c = np.where(c > 0.0, c, np.inf)
        m = int(np.argmin(c))
        if c[m] < best[0]:
            best = (float(c[m]),) + tuple(int(v) for v in moves[m])
    return best


# --------------------------------------------------------------------------
# dispatch

NUMBA = {
    "scan_first": _nb_scan_first,
    "scan_best": _nb_scan_best,
    "improving_moves": _nb_improving_moves,
    "batch_move_deltas": _nb_batch_move_deltas,
    "batch_min_positive": _nb_batch_min_positive,
    "batch_pair_min": _nb_batch_pair_min,
    "min_all_moves": _nb_min_all_moves,
}

NUMPY = {
    "scan_first": _np_scan_first,
    "scan_best": _np_scan_best,
    "improving_moves": _np_improving_moves,
    "batch_move_deltas": _np_batch_move_deltas,
    "batch_min_positive": _np_batch_min_positive,
    "batch_pair_min": _np_batch_pair_min,
    "min_all_moves": _np_min_all_moves,
}

BACKEND = "numba" if _accel.USE_NUMBA else "numpy"
_impl = NUMBA if _accel.USE_NUMBA else NUMPY


def _prep(x, order=None):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if order is None:
        return x
    return x, np.ascontiguousarray(order, dtype=np.int64)


def scan_first(x, order, threshold):
    """First improving position pair in lexicographic order, or ``(-1, -1, 0.0)``."""
    x, order = _prep(x, order)
    i, j, d = _impl["scan_first"](x, order, float(threshold))
    return int(i), int(j), float(d)


def scan_best(x, order, threshold):
    """Position pair with the largest improvement above ``threshold``."""
    x, order = _prep(x, order)
    i, j, d = _impl["scan_best"](x, order, float(threshold))
    return int(i), int(j), float(d)


def improving_moves(x, order, threshold):
    """All position pairs improving by more than ``threshold``, lexicographic."""
    x, order = _prep(x, order)
    return _impl["improving_moves"](x, order, float(threshold))


def batch_move_deltas(pts, moves):
    """Improvements of every move in ``moves`` (rows ``a, z1, b, z2``) for each instance.

    ``pts`` has shape ``(T, n, d)``; the result has shape ``(T, M)``.
    """
    pts = _prep(pts)
    moves = np.ascontiguousarray(moves, dtype=np.int64)
    return _impl["batch_move_deltas"](pts, moves)


def batch_min_positive(deltas):
    """Row-wise smallest strictly positive entry (``inf``) and its column (``-1``)."""
    return _impl["batch_min_positive"](np.ascontiguousarray(deltas, dtype=np.float64))


def batch_pair_min(deltas, pairs):
    """Row-wise minimum of ``deltas[p0] + deltas[p1]`` over pairs where both are positive."""
    deltas = np.ascontiguousarray(deltas, dtype=np.float64)
    pairs = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
    return _impl["batch_pair_min"](deltas, pairs)


def min_all_moves(x):
    """Smallest strictly positive improvement over every 2-change on the point set.

    Returns ``(value, a, z1, b, z2)``; ``value`` is ``inf`` when none is positive.
    """
    v, a, z1, b, z2 = _impl["min_all_moves"](_prep(x))
    return float(v), int(a), int(z1), int(b), int(z2)
