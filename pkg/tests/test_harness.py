import json
import math
from fractions import Fraction

import numpy as np
import pytest

from smoothed2opt import harness as hs
from smoothed2opt.errors import InsufficientDataError, InvalidInputError, InvalidParameterError
from smoothed2opt.instances import generate_adversarial
from smoothed2opt.tour import RunTrace, Tour, TwoChange, initial_tour, run_two_opt


def small_cfg(**kw):
    base = dict(n_grid=[8, 12], d_grid=[2], sigma_grid=[0.1, 0.3], trials=2, seed=4)
    base.update(kw)
    return hs.ExperimentConfig(**base)


def test_square_one_iteration():
    cfg = hs.ExperimentConfig(n_grid=[4], kind="grid", sigma_grid=[0.01], trials=5,
                              initial="identity", pivot="best")
    recs = hs.run_iteration_experiment(cfg)
    assert [r["iterations"] for r in recs] == [1] * 5


def test_records_reproducible_and_job_independent(backend):
    a = hs.run_iteration_experiment(small_cfg())
    b = hs.run_iteration_experiment(small_cfg())
    assert a == b
    assert len(a) == 2 * 2 * 2
    assert all(r["ms"] is None for r in a)


def test_jobs_do_not_change_records():
    assert hs.run_iteration_experiment(small_cfg(), jobs=2) == hs.run_iteration_experiment(small_cfg())


def test_cell_guard():
    with pytest.raises(InvalidParameterError):
        hs.run_iteration_experiment(small_cfg(n_grid=[hs.MAX_N + 1]))


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        hs.ExperimentConfig(n_grid=[])
    with pytest.raises(InvalidParameterError):
        hs.ExperimentConfig(n_grid=[5], trials=0)
    with pytest.raises(InvalidParameterError):
        hs.ExperimentConfig.from_dict({"n_grid": [5], "bogus": 1})
    cfg = small_cfg()
    assert hs.ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_potential_bound_single_step():
    trace = RunTrace(Tour(np.arange(4)), [TwoChange(0, 1, 3, 2, 0.5)], [4.0, 3.5], "first", "local-optimum")
    bound, actual, ok = hs.potential_bound_check(trace)
    assert bound >= 1 and actual == 1 and ok
    assert isinstance(bound, Fraction)


def test_potential_bound_on_runs():
    for seed in range(5):
        x = np.random.default_rng(seed).random((25, 2))
        assert hs.potential_bound_check(run_two_opt(initial_tour(x, "random", seed), x))[2]


def test_nonmonotone_trace_rejected_upstream():
    with pytest.raises(InvalidInputError):
        RunTrace(Tour(np.arange(4)), [TwoChange(0, 1, 3, 2, 0.5)], [4.0, 4.0], "first", "local-optimum")


def test_wilson():
    lo, hi = hs.wilson_interval(0, 100)
    assert lo == 0 and 0 < hi < 0.05
    lo, hi = hs.wilson_interval(50, 100)
    assert lo < 0.5 < hi


def test_tail_monotone_and_fields(backend):
    layout = generate_adversarial("uniform", 5, 2, 0)
    est = hs.estimate_tail("delta_min", (layout, 1.0), [0.3, 0.1, 0.03, 0.01], 5000, 1)
    assert all(b <= a for a, b in zip(est.hits, est.hits[1:]))
    rows = est.rows()
    assert tuple(rows[0]) == hs.TAIL_FIELDS
    assert all(r["ci_lo"] <= r["p"] <= r["ci_hi"] for r in rows)


def test_tail_rejects_bad_grid():
    layout = generate_adversarial("uniform", 5, 2, 0)
    with pytest.raises(InvalidParameterError):
        hs.estimate_tail("delta_min", (layout, 1.0), [0.1, 0.2], 1000, 0)
    with pytest.raises(InvalidParameterError):
        hs.estimate_tail("delta_min", (layout, 1.0), [0.2, 0.1], 50, 0)


def test_tail_all_zero():
    layout = generate_adversarial("uniform", 5, 2, 0)
    with pytest.raises(InsufficientDataError):
        hs.estimate_tail("delta_min", (layout, 1.0), [1e-9, 1e-10], 100, 0)


def test_tail_values_match_direct_scan(backend):
    from smoothed2opt.tour import min_improvement
    from smoothed2opt.linked_pairs import min_linked_improvement
    layout = generate_adversarial("uniform", 6, 2, 3)
    vals = hs.sample_quantity("delta_min", (layout, 0.5), 20, 9)
    vals0 = hs.sample_quantity("linked_min_type0", (layout, 0.5), 20, 9)
    pts = hs._layout_source((layout, 0.5))[3](hs.derive_seed(9, 0), 20)
    for k in range(20):
        assert vals[k] == pytest.approx(min_improvement(pts[k])[0], rel=1e-12)
        got = min_linked_improvement(pts[k], "Type0")
        assert vals0[k] == (math.inf if got is None else pytest.approx(got[0], rel=1e-12))


def test_fit_tail_exponent_synthetic():
    eps = [1e-1, 1e-2, 1e-3]
    alpha, se, cells = hs.fit_tail_exponent(eps, [10_000, 100, 1], 10**6)
    assert math.isnan(alpha) and cells == 2
    alpha, _, cells = hs.fit_tail_exponent(eps, [100_000, 1000, 10], 10**6)
    assert alpha == pytest.approx(2.0) and cells == 3


def test_conditioned_single_tail():
    src = hs.ConditionedSingle(d=2, a1=1.0, a2=1.0, r=1.0, s1=1.0, s2=1.0, sigma=1.0)
    est = hs.estimate_tail("conditioned_single", src, [0.1, 0.05, 0.025, 0.0125], 200_000, 3)
    assert est.alpha_hat == pytest.approx(1.0, abs=0.3)
    # halving eps halves the probability
    assert est.hits[1] / est.hits[2] == pytest.approx(2.0, abs=0.2)


def test_fit_scaling_synthetic():
    recs = [{"n": n, "sigma": 0.1, "iterations": n * n} for n in (10, 20, 40, 80)]
    fit = hs.fit_scaling(recs, "n")
    assert fit["exponent"] == pytest.approx(2.0, abs=0.01) and fit["reference"] == pytest.approx(13 / 3)
    recs = [{"n": 10, "sigma": s, "iterations": 1 / s} for s in (0.05, 0.1, 0.2, 0.4)]
    assert hs.fit_scaling(recs, "sigma")["exponent"] == pytest.approx(1.0, abs=0.01)
    with pytest.raises(InvalidInputError):
        hs.fit_scaling(recs[:2], "sigma")


def test_export_roundtrip(tmp_path):
    recs = hs.run_iteration_experiment(small_cfg())
    hs.export(recs, tmp_path / "r.json", "json", config=small_cfg().to_dict())
    cfg, back = hs.import_json(tmp_path / "r.json")
    assert back == json.loads(json.dumps(recs))
    assert cfg["seed"] == 4
    hs.export(recs, tmp_path / "r.csv", "csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ",".join(hs.ITERATION_FIELDS)
    assert len(lines) == len(recs) + 1


def test_export_empty_and_bad_format(tmp_path):
    hs.export([], tmp_path / "e.csv", "csv")
    assert (tmp_path / "e.csv").read_text().splitlines() == [",".join(hs.ITERATION_FIELDS)]
    with pytest.raises(InvalidParameterError):
        hs.export([], tmp_path / "e.x", "xml")
    with pytest.raises(OSError):
        hs.export([], tmp_path / "missing" / "e.csv", "csv")


def test_box_fraction_reported():
    recs = hs.run_iteration_experiment(small_cfg())
    frac = hs.box_fraction(recs)
    assert set(frac) == {8, 12}


def test_observe_disjoint_pairs():
    obs = hs.observe_disjoint_pairs(n=20, runs=4, sigma=0.3, seed=1)
    assert len(obs["rows"]) == 4
    assert all(r["pairs"] * 2 <= r["t"] for r in obs["rows"])
