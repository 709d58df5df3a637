"""Experiment orchestration: iteration runs, tail estimates, fits and exports."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .angles import AngleContext, angle_sup_bound, sample_angle
from .bounds import paper_bound
from .errors import InsufficientDataError, InvalidInputError, InvalidParameterError, NumericalError
from .instances import (DEFAULT_BOX_C, AdversarialLayout, PerturbationSpec, bounding_box_check,
                        box_radius, generate_adversarial, perturb, perturb_batch)
from .linked_pairs import extract_disjoint_pairs, pair_table
from .tour import (PIVOT_RULES, RunTrace, initial_tour, law_of_cosines_eta,
                   move_table, run_two_opt)

MAX_N = 2000
SCHEMA = 1
ITERATION_FIELDS = ("n", "d", "sigma", "kind", "trial", "seed", "iterations", "len_init",
                    "len_final", "D", "in_box", "pivot", "ms")
TAIL_FIELDS = ("quantity", "n", "d", "sigma", "eps", "hits", "trials", "p", "ci_lo", "ci_hi",
               "alpha_hat")
QUANTITIES = ("delta_min", "linked_min_type0", "linked_min_type1", "conditioned_single")
PAPER_ALPHA = {"delta_min": 1.0, "linked_min_type0": 2.0, "linked_min_type1": 1.5,
               "conditioned_single": 1.0}
MIN_FIT_HITS = 10


def derive_seed(*key) -> int:
    """Stable 63-bit seed from a root seed and integer coordinates."""
    words = [int(k) & 0xFFFFFFFF for k in key]
    return int(np.random.SeedSequence(words).generate_state(2, np.uint32).view(np.uint64)[0] >> 1)


@dataclass
class ExperimentConfig:
    n_grid: List[int]
    d_grid: List[int] = field(default_factory=lambda: [2])
    sigma_grid: List[float] = field(default_factory=lambda: [0.1])
    kind: str = "uniform"
    trials: int = 1
    pivot: str = "first"
    step_limit: Optional[int] = None
    seed: int = 0
    output: Optional[str] = None
    initial: str = "random"
    box_c: float = DEFAULT_BOX_C
    timing: bool = False

    def __post_init__(self):
        if not (self.n_grid and self.d_grid and self.sigma_grid):
            raise InvalidParameterError("n, d and sigma grids must be nonempty")
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if self.pivot not in PIVOT_RULES:
            raise InvalidParameterError(f"unknown pivot rule {self.pivot!r}")
        self.n_grid = [int(v) for v in self.n_grid]
        self.d_grid = [int(v) for v in self.d_grid]
        self.sigma_grid = [float(v) for v in self.sigma_grid]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise InvalidParameterError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)


# ------------------------------------------------------------------ iteration runs

def _one_trial(task):
    cfg, n, d, si, sigma, trial = task
    layout = generate_adversarial(cfg.kind, n, d, derive_seed(cfg.seed, n, d, 0))
    seed = derive_seed(cfg.seed, n, d, si + 1, trial)
    t0 = time.perf_counter()
    ps = perturb(layout, PerturbationSpec(sigma, seed))
    start = initial_tour(ps, cfg.initial, seed)
    trace = run_two_opt(start, ps, cfg.pivot, cfg.step_limit, seed=seed)
    ms = (time.perf_counter() - t0) * 1e3
    _, _, ok = potential_bound_check(trace)
    if trace.steps and not ok:
        raise NumericalError(f"potential bound violated for n={n}, trial={trial}")
    D, inside = bounding_box_check(ps, cfg.box_c)
    return {"n": n, "d": d, "sigma": sigma, "kind": cfg.kind, "trial": trial, "seed": seed,
            "iterations": trace.steps, "len_init": trace.lengths[0], "len_final": trace.lengths[-1],
            "D": D, "in_box": inside, "pivot": cfg.pivot, "ms": round(ms, 3) if cfg.timing else None}


def run_iteration_experiment(cfg: ExperimentConfig, jobs: int = 1) -> List[dict]:
    """One record per (n, d, sigma, trial); identical for identical cfg whatever ``jobs`` is."""
    big = [n for n in cfg.n_grid if n > MAX_N]
    if big:
        raise InvalidParameterError(f"n={big[0]} exceeds the per-cell guard n <= {MAX_N}")
    if cfg.kind == "file":
        raise InvalidParameterError("iteration experiments need a generated layout kind")
    tasks = [(cfg, n, d, si, s, t) for n in cfg.n_grid for d in cfg.d_grid
             for si, s in enumerate(cfg.sigma_grid) for t in range(cfg.trials)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_one_trial, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return [_one_trial(t) for t in tasks]


def potential_bound_check(trace: RunTrace):
    """``(bound, actual, pass)`` with bound = initial length / smallest executed improvement."""
    if not trace.moves:
        return Fraction(0), 0, True
    dmin = min(Fraction(m.delta) for m in trace.moves)
    bound = Fraction(trace.lengths[0]) / dmin
    return bound, trace.steps, trace.steps <= bound


def box_fraction(records: Sequence[dict]) -> dict:
    out = {}
    for n in sorted({r["n"] for r in records}):
        rs = [r for r in records if r["n"] == n]
        out[n] = {"outside": sum(not r["in_box"] for r in rs) / len(rs),
                  "reference": 1 / math.factorial(n) if n < 171 else 0.0}
    return out


# ------------------------------------------------------------------ tails

def wilson_interval(hits: int, trials: int, z: float = 1.959963984540054):
    if trials == 0:
        return 0.0, 1.0
    p = hits / trials
    den = 1 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if hits == 0 else max(0.0, mid - half)
    hi = 1.0 if hits == trials else min(1.0, mid + half)
    return lo, hi


@dataclass(frozen=True)
class ConditionedSingle:
    """A single 2-change with A1 = a1, A2 = a2, R = r and noncentralities s1, s2."""
    d: int
    a1: float
    a2: float
    r: float
    s1: float
    s2: float
    sigma: float


@dataclass
class TailEstimate:
    quantity: str
    n: int
    d: int
    sigma: float
    eps: List[float]
    hits: List[int]
    trials: int
    alpha_hat: float
    alpha_stderr: float
    fit_cells: int
    bound_id: Optional[str]
    bound_constant: float
    bound_values: List[float]

    @property
    def p(self) -> List[float]:
        return [h / self.trials for h in self.hits]

    @property
    def intervals(self):
        return [wilson_interval(h, self.trials) for h in self.hits]

    def rows(self) -> List[dict]:
        out = []
        for e, h, p, (lo, hi) in zip(self.eps, self.hits, self.p, self.intervals):
            out.append({"quantity": self.quantity, "n": self.n, "d": self.d, "sigma": self.sigma,
                        "eps": e, "hits": h, "trials": self.trials, "p": p, "ci_lo": lo,
                        "ci_hi": hi, "alpha_hat": self.alpha_hat})
        return out

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["p"], doc["ci"] = self.p, [list(c) for c in self.intervals]
        return doc


def _layout_source(source):
    if isinstance(source, tuple) and isinstance(source[0], AdversarialLayout):
        layout, sigma = source
        return layout.n, layout.d, sigma, lambda seed, k: perturb_batch(layout, sigma, seed, k)
    if callable(source):
        probe = source(0, 1)
        return probe.shape[1], probe.shape[2], float("nan"), source
    raise InvalidParameterError("source must be (layout, sigma) or a callable(seed, trials)")


def _quantity_values(quantity, pts):
    n = pts.shape[1]
    moves = move_table(n)
    deltas = kernels.batch_move_deltas(pts, moves)
    if quantity == "delta_min":
        return kernels.batch_min_positive(deltas)[0]
    kinds = {"linked_min_type0": ("Type0",), "linked_min_type1": ("Type1a", "Type1b")}[quantity]
    pairs = np.concatenate([pair_table(n, k) for k in kinds])
    if pairs.size == 0:
        raise InvalidParameterError(f"n={n} has no {quantity} pairs")
    return kernels.batch_pair_min(deltas, np.ascontiguousarray(pairs))[0]


def _conditioned_values(src: ConditionedSingle, trials: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    phi1 = sample_angle(AngleContext(src.d, src.r, src.s1, src.sigma), rng, trials)
    phi2 = sample_angle(AngleContext(src.d, src.r, src.s2, src.sigma), rng, trials)
    eta = np.vectorize(law_of_cosines_eta)
    return eta(src.a1, src.r, phi1) + eta(src.a2, src.r, phi2)


def sample_quantity(quantity: str, source, trials: int, seed, chunk: int = 20000) -> np.ndarray:
    """Per-trial values of the quantity (``inf`` when no positive improvement exists)."""
    if quantity not in QUANTITIES:
        raise InvalidParameterError(f"unknown quantity {quantity!r}")
    if quantity == "conditioned_single":
        return _conditioned_values(source, trials, seed)
    _, _, _, gen = _layout_source(source)
    out = []
    for c, start in enumerate(range(0, trials, chunk)):
        k = min(chunk, trials - start)
        pts = np.ascontiguousarray(gen(derive_seed(seed, c), k))
        out.append(_quantity_values(quantity, pts))
    return np.concatenate(out)


def fit_tail_exponent(eps, hits, trials):
    """Least-squares slope of log p on log eps over cells with at least 10 hits."""
    use = [(e, h) for e, h in zip(eps, hits) if h >= MIN_FIT_HITS]
    if len(use) < 3:
        return math.nan, math.nan, len(use)
    x = np.log([e for e, _ in use])
    y = np.log([h / trials for _, h in use])
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr), len(use)


def _bound_shape(quantity, source, eps, n, d, sigma):
    if quantity == "linked_min_type0":
        return "type0", lambda e: paper_bound("type0", dict(n=n, d=d, sigma=sigma, eps=e,
                                                            D=box_radius(DEFAULT_BOX_C, sigma, n)), 1.0)
    if quantity == "linked_min_type1":
        return "type1a", lambda e: paper_bound("type1a", dict(n=n, d=d, sigma=sigma, eps=e,
                                                              D=box_radius(DEFAULT_BOX_C, sigma, n)), 1.0)
    if quantity == "conditioned_single":
        m1 = angle_sup_bound(AngleContext(source.d, source.r, source.s1, source.sigma))
        m2 = angle_sup_bound(AngleContext(source.d, source.r, source.s2, source.sigma))
        return "single_cond", lambda e: paper_bound(
            "single_cond", dict(M1=m1, M2=m2, a1=source.a1, a2=source.a2, r=source.r, eps=e), 1.0)
    return None, lambda e: e


def estimate_tail(quantity: str, source, eps_grid: Sequence[float], trials: int, seed) -> TailEstimate:
    """Fraction of trials with the quantity in (0, eps] for each eps, plus the fitted exponent.

    ``source`` is ``(layout, sigma)``, a callable ``(seed, k) -> (k, n, d)`` array,
    or a :class:`ConditionedSingle` for the conditioned single 2-change.
    """
    eps = [float(e) for e in eps_grid]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidParameterError("eps grid must be strictly decreasing")
    if trials < 100:
        raise InvalidParameterError("need at least 100 trials")
    vals = sample_quantity(quantity, source, trials, seed)
    hits = [int(np.count_nonzero((vals > 0) & (vals <= e))) for e in eps]
    if not any(hits):
        raise InsufficientDataError("no trial fell below any eps; use more trials or larger eps")
    if quantity == "conditioned_single":
        n, d, sigma = 4, source.d, source.sigma
    else:
        n, d, sigma, _ = _layout_source(source)
    alpha, se, cells = fit_tail_exponent(eps, hits, trials)
    bid, shape = _bound_shape(quantity, source, eps, n, d, sigma)
    ratios = [(h / trials) / shape(e) for e, h in zip(eps, hits) if h > 0]
    const = max(ratios) if ratios else math.nan
    return TailEstimate(quantity, n, d, sigma, eps, hits, trials, alpha, se, cells, bid, const,
                        [const * shape(e) for e in eps])


# ------------------------------------------------------------------ scaling fits

def fit_scaling(records: Sequence[dict], model: str = "n") -> dict:
    """Log-log exponent of mean iterations against n (``model='n'``) or 1/sigma (``'sigma'``)."""
    if model not in ("n", "sigma"):
        raise InvalidParameterError("model must be 'n' or 'sigma'")
    groups = {}
    for r in records:
        groups.setdefault(r[model], []).append(r["iterations"])
    if len(groups) < 3:
        raise InvalidInputError(f"need at least 3 distinct {model} values, got {len(groups)}")
    keys = sorted(groups)
    means = [float(np.mean(groups[k])) for k in keys]
    if min(means) <= 0:
        raise InvalidInputError("mean iteration count is zero for some cell")
    xs = np.log(keys) if model == "n" else -np.log(keys)
    res = stats.linregress(xs, np.log(means))
    t = stats.t.ppf(0.975, len(keys) - 2) if len(keys) > 2 else math.inf
    return {"model": model, "exponent": float(res.slope), "stderr": float(res.stderr),
            "ci_lo": float(res.slope - t * res.stderr), "ci_hi": float(res.slope + t * res.stderr),
            "reference": 13 / 3 if model == "n" else 2.0,
            "points": [[float(k), m] for k, m in zip(keys, means)]}


def observe_disjoint_pairs(n: int = 50, d: int = 2, sigma: float = 0.1, runs: int = 10,
                           seed: int = 0, pivot: str = "first", kind: str = "uniform") -> dict:
    """Disjoint linked pairs against run length; fits pairs ~ (t - beta n^2)/gamma."""
    layout = generate_adversarial(kind, n, d, derive_seed(seed, n, d, 0))
    rows = []
    for k in range(runs):
        s = derive_seed(seed, n, d, 1, k)
        ps = perturb(layout, PerturbationSpec(sigma, s))
        trace = run_two_opt(initial_tour(ps, "random", s), ps, pivot, seed=s)
        rows.append({"run": k, "t": trace.steps, "pairs": len(extract_disjoint_pairs(trace))})
    out = {"n": n, "d": d, "sigma": sigma, "rows": rows, "gamma": math.nan, "beta": math.nan}
    ts = [r["t"] for r in rows]
    if len(set(ts)) >= 2:
        res = stats.linregress(ts, [r["pairs"] for r in rows])
        if res.slope > 0:
            out["gamma"] = 1 / res.slope
            out["beta"] = -res.intercept / (res.slope * n * n)
    return out


# ------------------------------------------------------------------ export

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(obj):
    if isinstance(obj, TailEstimate):
        return obj.to_dict()
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "summary"):
        return obj.summary()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _rows_and_fields(items):
    items = list(items)
    if items and isinstance(items[0], TailEstimate):
        return [r for est in items for r in est.rows()], TAIL_FIELDS
    rows = [it.summary() if hasattr(it, "summary") else it for it in items]
    if not rows or set(rows[0]) <= set(ITERATION_FIELDS):
        return rows, ITERATION_FIELDS
    if set(rows[0]) <= set(TAIL_FIELDS):
        return rows, TAIL_FIELDS
    return rows, tuple(rows[0])


def write_csv(fh, items) -> None:
    rows, fields = _rows_and_fields(items)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(r.get(f)) for f in fields])


def export(items, path, format: str = "csv", config: Optional[dict] = None) -> None:
    """Write records, tail estimates or reports as CSV (long format) or the JSON envelope."""
    if format == "csv":
        with open(path, "w", newline="") as fh:
            write_csv(fh, items)
    elif format == "json":
        doc = {"schema": SCHEMA, "config": config or {}, "records": list(items)}
        with open(path, "w") as fh:
            json.dump(doc, fh, default=_jsonable, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        raise InvalidParameterError(f"unknown export format {format!r}; expected csv or json")


def import_json(path):
    """``(config, records)`` from a JSON envelope."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA:
        raise InvalidInputError(f"unsupported schema {doc.get('schema')!r}")
    return doc["config"], doc["records"]


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1
