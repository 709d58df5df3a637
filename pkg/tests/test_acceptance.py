"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are collected and shown
again in the terminal summary.
"""
import math
import os
import time

import numpy as np
from scipy import integrate

from oracles import brute_delta_min, brute_linked_min, oracle_counts, oracle_kind
from smoothed2opt import angles, cli, harness, instances, linked_pairs, special, tour
from smoothed2opt.angles import AngleContext
from smoothed2opt.special import ChiParams

RESULTS = []


def report(num, title, ok, elapsed, budget, detail=""):
    within = elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    line = f"criterion {num} [{title}]: {status} ({elapsed:.1f}s, budget {budget:.0f}s) {detail}".rstrip()
    RESULTS.append(line)
    print(line)
    assert ok, line
    assert within, f"criterion {num} exceeded its runtime budget: {line}"


# ---------------------------------------------------------------- 1

def test_criterion_1_bessel_bounds():
    t0 = time.perf_counter()
    rows = special.bessel_bound_rows(special.BOUND_XS, special.BOUND_NUS)
    worst = min(rows, key=lambda r: r["margin"])
    ineq = special.simple_inequality_rows(np.linspace(0, 50, 101), np.linspace(1, 20, 39))
    lemmas = {r["lemma"] for r in rows}
    ok = (worst["margin"] >= 0 and lemmas == {"k0", "largex", "generic", "ratio"}
          and all(r["bound"] <= math.e for r in ineq))
    report(1, "Bessel bound suite", ok, time.perf_counter() - t0, 5,
           f"{len(rows)} bound checks, min margin {worst['margin']:.3g} ({worst['lemma']}), "
           f"{len(ineq)} inequality points, max lhs {max(r['bound'] for r in ineq):.6f} <= e")


# ---------------------------------------------------------------- 2

def test_criterion_2_chi_consistency():
    t0 = time.perf_counter()
    worst_form = 0.0
    worst_mass = 0.0
    dom_violation = -math.inf
    for d in (2, 3, 5, 10, 20):
        for ratio in (0.1, 1.0, 5.0, 20.0):
            for sigma in (0.5, 1.0):
                p = ChiParams(d, ratio * sigma, sigma)
                centre = special.chi_mode(p)
                for r in np.linspace(max(1e-3, centre - 6 * sigma), centre + 6 * sigma, 25):
                    lb = special.chi_log_density(p, r, "bessel")
                    lm = special.chi_log_density(p, r, "mixture")
                    worst_form = max(worst_form, abs(math.expm1(lb - lm)))
                worst_mass = max(worst_mass, abs(special.chi_total_mass(p) - 1))
    for d in (2, 3, 5, 10):
        for ratio in (0.5, 2.0, 5.0):
            for sigma in (0.5, 1.0):
                xs = np.linspace(0.1, 10, 12) * sigma
                for _, fs, f0 in special.chi_stochdom_check(ChiParams(d, ratio * sigma, sigma), xs):
                    dom_violation = max(dom_violation, fs - f0)
    ratios = [special.chi_inverse_moment(d, s, c)[1]
              for d in range(3, 21) for c in (0.5, 1.0, 2.0) for s in (0.1, 1.0)]
    half, two = special.chi_inverse_moment(4, 1.0, 2.0)
    # the band edge 3 is attained exactly at d=3, c=2 (ratio = 3 Gamma(1/2)/(2 Gamma(3/2)) = 3)
    band = min(ratios) >= 0.3 and max(ratios) <= 3 + 1e-9
    ok = (worst_form <= 1e-8 and worst_mass <= 1e-8 and dom_violation <= special.CHI_CDF_ATOL
          and band and abs(half - 0.5) < 1e-10 and abs(two - 2.0) < 1e-9)
    report(2, "chi consistency", ok, time.perf_counter() - t0, 30,
           f"form rel diff {worst_form:.2e}, mass err {worst_mass:.2e}, "
           f"max F_s - F_0 {dom_violation:.2e}, ratio band [{min(ratios):.4f}, {max(ratios):.12f}], "
           f"d=4 c=2 value {half:.12f}")


# ---------------------------------------------------------------- 3

def test_criterion_3_angle_density():
    t0 = time.perf_counter()
    grid_points = [(d, k) for d in (2, 3, 5, 8, 10) for k in (0.5, 2.0, 10.0, 50.0)]
    phis = np.linspace(0, math.pi, 10**6 + 1)
    worst_norm = worst_arg = worst_stat = 0.0
    for d, k in grid_points:
        ctx = AngleContext.from_kappa(d, k)
        angles.angle_density(ctx, 1.0)  # internal normalization assertion
        phi_star, _ = angles.optimal_angle(ctx.nu, k)
        pts = [phi_star] if 0 < phi_star < math.pi else None
        mass = integrate.quad(lambda p: angles.angle_density(ctx, p, check=False), 0, math.pi,
                              points=pts, limit=400, epsabs=1e-13)[0]
        worst_norm = max(worst_norm, abs(mass - 1))
        arg = phis[np.argmax(angles.log_angle_density(ctx.nu, k, phis))]
        worst_arg = max(worst_arg, abs(arg - phi_star))
        if d > 2:
            worst_stat = max(worst_stat, angles.stationarity_residual(ctx.nu, k))
    consts = angles.angle_constants()
    kappas = np.concatenate([[0.0], np.logspace(-3, 2, 201)])
    worst_plain = worst_sine = math.inf
    for d in range(2, 11):
        for k in kappas:
            ctx = AngleContext.from_kappa(d, float(k))
            worst_plain = min(worst_plain, angles.angle_sup_bound(ctx) - angles.exact_sup(ctx))
            if d >= 3:
                worst_sine = min(worst_sine, angles.angle_sup_bound(ctx, "over_sine")
                                 - angles.exact_sup_over_sine(ctx))
    refit = angles.fit_sup_constants(kappas=kappas, margin=1.0)
    ok = (worst_norm <= 1e-8 and worst_arg <= 1e-5 and worst_stat <= 1e-12
          and worst_plain >= 0 and worst_sine >= 0)
    report(3, "angle density", ok, time.perf_counter() - t0, 60,
           f"{len(grid_points)} grid points: norm err {worst_norm:.1e}, argmax err {worst_arg:.1e}, "
           f"stationarity {worst_stat:.1e}; C1={consts['C1']} (grid needs {refit['C1']:.4f}), "
           f"C2={consts['C2']} (grid needs {refit['C2']:.4f}), min margins {worst_plain:.3f}/{worst_sine:.3f}")


# ---------------------------------------------------------------- 4

def test_criterion_4_angle_monte_carlo():
    t0 = time.perf_counter()
    parts, ok = [], True
    for k, (d, s, sigma, r) in enumerate([(2, 1, 0.5, 1), (3, 1, 0.5, 1), (5, 2, 0.25, 1)]):
        rep = angles.mc_angle_verify(d, s, sigma, r, window=0.01, trials=10**6, seed=k)
        ok &= rep.passed
        parts.append(f"({d},{s},{sigma},{r}) emp {rep.empirical_sup:.4f} exact {rep.exact_sup:.4f} "
                     f"bound {rep.bound:.3f} drift {rep.drift:.4f} [{rep.proposal}]")
    report(4, "Monte Carlo angle verification", ok, time.perf_counter() - t0, 180, "; ".join(parts))


# ---------------------------------------------------------------- 5

def test_criterion_5_two_opt_engine():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    kinds = ("uniform", "clustered", "grid")
    failures = []
    small = 0
    for k in range(1000):
        n = int(rng.integers(5, 51))
        d = int(rng.choice([2, 3]))
        sigma = float(rng.choice([0.05, 0.2, 1.0]))
        layout = instances.generate_adversarial(kinds[k % 3], n, d, int(rng.integers(2**31)))
        ps = instances.perturb(layout, instances.PerturbationSpec(sigma, int(rng.integers(2**31))))
        rule = tour.PIVOT_RULES[k % 3]
        trace = tour.run_two_opt(tour.initial_tour(ps, "random", k), ps, rule, seed=k)
        lengths = trace.lengths
        if not all(b < a for a, b in zip(lengths, lengths[1:])):
            failures.append((k, "not decreasing"))
        if not harness.potential_bound_check(trace)[2]:
            failures.append((k, "potential"))
        if trace.termination != "local-optimum" or not tour.is_local_optimum(trace.final_tour, ps):
            failures.append((k, "not certified"))
        if n <= 8:
            small += 1
            x = ps.points.tolist()
            got = tour.min_improvement(ps)
            if got is None or abs(got[0] - brute_delta_min(x)) > 1e-12 * max(1.0, got[0]):
                failures.append((k, "delta_min"))
            for kind in linked_pairs.KINDS:
                want = brute_linked_min(x, kind)
                res = linked_pairs.min_linked_improvement(ps, kind)
                val = math.inf if res is None else res[0]
                if not (val == want or abs(val - want) <= 1e-12 * max(1.0, want)):
                    failures.append((k, f"link {kind}"))
    report(5, "2-opt engine", not failures, time.perf_counter() - t0, 120,
           f"1000 instances, {small} with n <= 8 checked against brute force, "
           f"backend {tour.kernels.BACKEND}, failures {failures[:5]}")


# ---------------------------------------------------------------- 6

EPS = [10 ** (-k / 2) for k in range(2, 8)]
TAIL_TRIALS = 2_000_000


def test_criterion_6_tail_exponents():
    t0 = time.perf_counter()
    single = harness.estimate_tail("delta_min", (instances.generate_adversarial("uniform", 5, 2, 0), 1.0),
                                   EPS, TAIL_TRIALS, 0)
    linked = harness.estimate_tail("linked_min_type0",
                                   (instances.generate_adversarial("uniform", 6, 2, 0), 1.0),
                                   EPS, TAIL_TRIALS, 0)
    ok = 0.7 <= single.alpha_hat <= 1.3 and 1.6 <= linked.alpha_hat <= 2.4
    report(6, "tail exponents", ok, time.perf_counter() - t0, 600,
           f"delta_min alpha {single.alpha_hat:.3f} +- {single.alpha_stderr:.3f} (hits {single.hits}); "
           f"type0 alpha {linked.alpha_hat:.3f} +- {linked.alpha_stderr:.3f} (hits {linked.hits}); "
           f"{TAIL_TRIALS} trials each")


# ---------------------------------------------------------------- 7

def test_criterion_7_linked_pair_classification():
    t0 = time.perf_counter()
    mismatches = 0
    checked = 0
    for n in (5, 6, 7):
        moves = [tour.TwoChange(*map(int, t)) for t in tour.move_table(n)]
        edge = lambda u, v: (min(u, v), max(u, v))  # noqa: E731
        as_o = [((edge(m.a, m.z1), edge(m.b, m.z2)), (edge(m.a, m.z2), edge(m.b, m.z1))) for m in moves]
        for i in range(len(moves)):
            for j in range(i + 1, len(moves)):
                got = linked_pairs.classify_pair(moves[i], moves[j])
                mismatches += (got[0] if got else None) != oracle_kind(as_o[i], as_o[j])
                checked += 1
    counts = {}
    count_ok = True
    for n in (6, 8, 10):
        ours = {k: linked_pairs.count_linked_pairs(n, k) for k in linked_pairs.KINDS}
        brute = oracle_counts(n)
        closed = {"Type0": math.factorial(n) // (2 * math.factorial(n - 6)),
                  "Type1a": 120 * math.comb(n, 5), "Type1b": 60 * math.comb(n, 5)}
        count_ok &= ours == brute == closed
        counts[n] = ours
    # Theta(n^6) / Theta(n^5): normalised counts stay within a constant band
    lead0 = [counts[n]["Type0"] / n ** 6 for n in counts]
    lead1 = [(counts[n]["Type1a"] + counts[n]["Type1b"]) / n ** 5 for n in counts]
    scaling_ok = max(lead0) / min(lead0) < 10 and max(lead1) / min(lead1) < 10
    ok = mismatches == 0 and count_ok and scaling_ok
    report(7, "linked-pair classification", ok, time.perf_counter() - t0, 60,
           f"{checked} move pairs, {mismatches} mismatches; counts {counts}; "
           f"Type0/n^6 {[round(v, 4) for v in lead0]}, Type1/n^5 {[round(v, 3) for v in lead1]}")


# ---------------------------------------------------------------- 8

def test_criterion_8_reproducibility(tmp_path, monkeypatch, capsys):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"n_grid": [10, 20, 30], "d_grid": [2, 3], "sigma_grid": [0.1, 0.5], '
                   '"trials": 3, "seed": 77}')
    outputs = []
    for run, jobs in (("a", None), ("b", None), ("c", "1")):
        work = tmp_path / run
        work.mkdir()
        monkeypatch.chdir(work)
        argv = ["experiment", "--config", str(cfg), "--out", "exp"] + (["--jobs", jobs] if jobs else [])
        assert cli.main(argv) == 0
        outputs.append(((work / "exp.csv").read_bytes(), (work / "exp.json").read_bytes()))
    capsys.readouterr()
    ok = outputs[0] == outputs[1] == outputs[2]
    report(8, "end-to-end reproducibility", ok, time.perf_counter() - t0, 60,
           f"3 runs (default jobs x2, jobs=1), csv {len(outputs[0][0])} bytes, json {len(outputs[0][1])} "
           f"bytes, identical={ok}, cores {os.cpu_count()}")

