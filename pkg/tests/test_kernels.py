import os
import subprocess
import sys

import numpy as np
import pytest

from smoothed2opt import kernels
from smoothed2opt.linked_pairs import pair_table
from smoothed2opt.tour import move_table


def both(name, *args):
    return kernels.NUMBA[name](*args), kernels.NUMPY[name](*args)


@pytest.mark.parametrize("seed", range(5))
def test_scans_agree(seed):
    rng = np.random.default_rng(seed)
    n = 30
    x = rng.random((n, 2))
    order = rng.permutation(n).astype(np.int64)
    for name in ("scan_first", "scan_best"):
        a, b = both(name, x, order, 1e-12)
        assert a[:2] == b[:2]
        assert a[2] == pytest.approx(b[2], rel=1e-12)
    a, b = both("improving_moves", x, order, 1e-12)
    for u, v in zip(a, b):
        assert np.allclose(u, v, rtol=1e-12)


def test_scan_on_optimum_returns_sentinel():
    x = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float)
    order = np.arange(4, dtype=np.int64)
    for table in (kernels.NUMBA, kernels.NUMPY):
        assert tuple(table["scan_first"](x, order, 1e-12))[:2] == (-1, -1)


def test_batch_kernels_agree():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(500, 6, 2))
    moves = move_table(6)
    a, b = both("batch_move_deltas", pts, moves)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
    va, ia = kernels.NUMBA["batch_min_positive"](a)
    vb, ib = kernels.NUMPY["batch_min_positive"](a)
    assert np.array_equal(va, vb) and np.array_equal(ia, ib)
    pairs = np.ascontiguousarray(pair_table(6, "Type0"))
    (pa, ja), (pb, jb) = both("batch_pair_min", a, pairs)
    assert np.allclose(pa, pb, rtol=1e-14) and np.array_equal(ja, jb)


def test_min_all_moves_agree():
    x = np.random.default_rng(2).random((12, 3))
    a, b = both("min_all_moves", x)
    assert a[0] == pytest.approx(b[0], rel=1e-13)


def test_env_flag_selects_numpy():
    env = dict(os.environ, SMOOTHED2OPT_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", "from smoothed2opt import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
