"""Numba vs numpy kernel timings.

    python benchmarks/bench_kernels.py [--repeat 5]

Both dispatch tables are timed in-process regardless of SMOOTHED2OPT_NUMBA;
the first numba call of each kernel is excluded (compilation).
"""
import argparse
from time import perf_counter

import numpy as np

from smoothed2opt import kernels
from smoothed2opt.linked_pairs import pair_table
from smoothed2opt.tour import move_table


def timeit(fn, args, repeat):
    fn(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = perf_counter()
        fn(*args)
        best = min(best, perf_counter() - t0)
    return best


def cases(rng):
    x = rng.uniform(-1, 1, (400, 2))
    order = rng.permutation(400).astype(np.int64)
    thr = 1e-12
    yield "scan_best n=400", "scan_best", (x, order, thr)
    yield "scan_first n=400", "scan_first", (x, order, thr)
    yield "improving_moves n=400", "improving_moves", (x, order, thr)
    y = rng.uniform(-1, 1, (40, 2))
    yield "min_all_moves n=40", "min_all_moves", (y,)
    pts = rng.normal(size=(20000, 6, 2))
    moves = move_table(6)
    yield "batch_move_deltas T=2e4 n=6", "batch_move_deltas", (pts, moves)
    deltas = kernels.NUMPY["batch_move_deltas"](pts, moves)
    yield "batch_min_positive T=2e4 n=6", "batch_min_positive", (deltas,)
    yield "batch_pair_min type0 T=2e4 n=6", "batch_pair_min", (deltas, np.ascontiguousarray(pair_table(6, "Type0")))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for label, key, a in cases(rng):
        tn = timeit(kernels.NUMBA[key], a, args.repeat)
        tp = timeit(kernels.NUMPY[key], a, args.repeat)
        print(f"{label:34s} {tn * 1e3:10.3f} {tp * 1e3:10.3f} {tp / tn:8.1f}")


if __name__ == "__main__":
    main()
