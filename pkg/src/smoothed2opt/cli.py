"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 failed verification.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import angles, harness, instances, linked_pairs, special, tour
from .errors import ParseError, UnsupportedFormatError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2
SEED_ENV = "SMOOTHED2OPT_SEED"
DEFAULT_EPS = [10 ** (-k / 2) for k in range(2, 8)]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


def _emit(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _load_points(args):
    if not os.path.exists(args.instance):
        raise UsageError(f"instance file not found: {args.instance}")
    return instances.load_instance(args.instance, args.format)


# ------------------------------------------------------------------ commands

def cmd_gen(args) -> int:
    layout = instances.generate_adversarial(args.kind, args.n, args.d, args.seed)
    if args.sigma is None:
        ps = instances.PointSet(np.array(layout.points))
    else:
        ps = instances.perturb(layout, instances.PerturbationSpec(args.sigma, args.seed))
    if args.out in (None, "-"):
        text = instances.to_native_json(ps) if args.format == "native-json" else instances.to_tsplib(ps)
        _emit(text, None)
    else:
        instances.save_instance(ps, args.out, args.format)
    return EXIT_OK


def cmd_solve(args) -> int:
    ps = _load_points(args)
    start = tour.initial_tour(ps, args.initial, args.seed)
    trace = tour.run_two_opt(start, ps, args.pivot, args.step_limit, seed=args.seed)
    certified = trace.termination == "local-optimum" and tour.is_local_optimum(trace.final_tour, ps)
    if args.trace:
        with open(args.trace, "w") as fh:
            json.dump(trace.to_dict(), fh, indent=1)
    bound, actual, ok = harness.potential_bound_check(trace)
    print(f"iterations={trace.steps} len_init={trace.lengths[0]!r} len_final={trace.lengths[-1]!r} "
          f"termination={trace.termination} certified={str(certified).lower()} "
          f"potential_ok={str(bool(ok)).lower()}")
    return EXIT_OK


def cmd_pairs(args) -> int:
    if args.instance:
        ps = _load_points(args)
    else:
        layout = instances.generate_adversarial(args.kind, args.n, args.d, args.seed)
        ps = instances.perturb(layout, instances.PerturbationSpec(args.sigma, args.seed))
    if ps.n > 12:
        raise UsageError("pair census enumerates O(n^6) pairs; use n <= 12")
    report = linked_pairs.census(ps, tuple(args.kinds))
    _emit(json.dumps(report, indent=1), args.out)
    return EXIT_OK


def _verify_rows(quick: bool):
    rows = special.bessel_bound_rows()
    ok = all(r["margin"] >= 0 for r in rows)
    ineq = special.simple_inequality_rows(
        np.linspace(0, 50, 26) if quick else None, np.linspace(1, 20, 11) if quick else None)
    ok &= all(r["margin"] >= 0 for r in ineq)
    rows += ineq
    for d in (2, 3, 5, 10):
        for ratio in (0.0, 0.5, 2.0, 5.0):
            p = special.ChiParams(d, ratio, 1.0)
            mass = special.chi_total_mass(p)
            rows.append({"lemma": "chi_normalization", "d": d, "s": ratio, "sigma": 1.0,
                         "bound": mass, "truth": 1.0, "margin": 1e-8 - abs(mass - 1)})
            if ratio > 0:
                for x in (0.5, 1.0, 2.0, 4.0):
                    _, fs, f0 = special.chi_stochdom_check(p, [x])[0]
                    rows.append({"lemma": "chi_stochdom", "x": x, "d": d, "s": ratio, "sigma": 1.0,
                                 "bound": fs, "truth": f0, "margin": f0 - fs + special.CHI_CDF_ATOL})
    for d in range(3, 21):
        for c in (0.5, 1.0, 2.0):
            _, ratio = special.chi_inverse_moment(d, 1.0, c)
            rows.append({"lemma": "chi_expect", "nu": c, "d": d, "sigma": 1.0, "bound": ratio,
                         "truth": 3.0, "margin": min(ratio - 0.3, 3.0 - ratio) + special.CHI_CDF_ATOL})
    ok &= all(r["margin"] >= 0 for r in rows)
    kappas = [0.0, 0.5, 2.0, 10.0, 50.0, 100.0]
    for d in range(2, 11):
        for k in kappas:
            ctx = angles.AngleContext.from_kappa(d, k)
            ex = angles.exact_sup(ctx)
            b = angles.angle_sup_bound(ctx, "plain")
            rows.append({"lemma": "angle_plain", "nu": ctx.nu, "x": k, "d": d, "bound": b,
                         "truth": ex, "margin": b - ex})
            if d >= 3:
                ex2 = angles.exact_sup_over_sine(ctx)
                b2 = angles.angle_sup_bound(ctx, "over_sine")
                rows.append({"lemma": "angle_over_sine", "nu": ctx.nu, "x": k, "d": d, "bound": b2,
                             "truth": ex2, "margin": b2 - ex2})
            angles.angle_density(ctx, 0.5)
    ok &= all(r["margin"] >= 0 for r in rows)
    return rows, ok


def cmd_verify_math(args) -> int:
    rows, ok = _verify_rows(args.grid == "quick")
    if args.out:
        special.write_verification_csv(args.out, rows)
    bad = [r for r in rows if r["margin"] < 0]
    for r in bad[:20]:
        _log(f"violation: {r}")
    print(f"checks={len(rows)} violations={len(bad)} status={'pass' if ok else 'fail'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_angle_mc(args) -> int:
    rep = angles.mc_angle_verify(args.d, args.s, args.sigma, args.r, args.window, args.trials,
                                 args.seed, args.bins, args.tolerance, args.proposal)
    _emit(json.dumps(rep.summary(), indent=1, sort_keys=True), args.out)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_tail(args) -> int:
    layout = instances.generate_adversarial(args.kind, args.n, args.d, args.seed)
    est = harness.estimate_tail(args.quantity, (layout, args.sigma), args.eps, args.trials, args.seed)
    if args.out in (None, "-"):
        harness.write_csv(sys.stdout, [est])
    else:
        harness.export([est], args.out, "csv")
    if args.json:
        harness.export([est], args.json, "json", config=_public(args))
    _log(f"alpha_hat={est.alpha_hat:.4f} stderr={est.alpha_stderr:.4f} cells={est.fit_cells}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    keys = harness.ExperimentConfig.__dataclass_fields__
    cfg = harness.ExperimentConfig(**{k: getattr(args, k) for k in keys if hasattr(args, k)})
    records = harness.run_iteration_experiment(cfg, args.jobs or harness.default_jobs())
    prefix = cfg.output or "experiment"
    harness.export(records, prefix + ".csv", "csv")
    harness.export(records, prefix + ".json", "json", config=cfg.to_dict())
    for model, grid in (("n", cfg.n_grid), ("sigma", cfg.sigma_grid)):
        if len(set(grid)) >= 3:
            fit = harness.fit_scaling(records, model)
            _log(f"fit {model}: exponent={fit['exponent']:.3f} "
                 f"[{fit['ci_lo']:.3f}, {fit['ci_hi']:.3f}] reference={fit['reference']:.3f}")
    print(f"records={len(records)} csv={prefix}.csv json={prefix}.json")
    return EXIT_OK


def cmd_export(args) -> int:
    if not os.path.exists(args.input):
        raise UsageError(f"input file not found: {args.input}")
    config, records = harness.import_json(args.input)
    harness.export(records, args.output, args.format, config=config)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="smoothed2opt", description="2-opt smoothed-analysis toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help=f"random seed (fallback ${SEED_ENV}, then 0)")
        sp.add_argument("--config", default=None, help="JSON file with default flag values")
        return sp

    g = common(sub.add_parser("gen", help="generate an instance"))
    g.add_argument("--kind", default="uniform", choices=[k for k in instances.KINDS if k != "file"])
    g.add_argument("--n", type=int, required=False, default=10)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--sigma", type=float, default=None, help="perturb with this sigma (default: none)")
    g.add_argument("--format", default="native-json", choices=instances.FORMATS)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)

    s = common(sub.add_parser("solve", help="run 2-opt on an instance"))
    s.add_argument("--instance", required=True)
    s.add_argument("--format", default="native-json", choices=instances.FORMATS)
    s.add_argument("--pivot", default="first", choices=tour.PIVOT_RULES)
    s.add_argument("--initial", default="identity", choices=tour.INITIAL_TOURS)
    s.add_argument("--step-limit", type=int, default=None)
    s.add_argument("--trace", default=None, help="write the run trace as JSON")
    s.set_defaults(func=cmd_solve)

    pr = common(sub.add_parser("pairs", help="linked-pair census"))
    pr.add_argument("--instance", default=None)
    pr.add_argument("--format", default="native-json", choices=instances.FORMATS)
    pr.add_argument("--kind", default="uniform", choices=[k for k in instances.KINDS if k != "file"])
    pr.add_argument("--n", type=int, default=6)
    pr.add_argument("--d", type=int, default=2)
    pr.add_argument("--sigma", type=float, default=1.0)
    pr.add_argument("--kinds", nargs="+", default=list(linked_pairs.KINDS), choices=linked_pairs.KINDS)
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=cmd_pairs)

    v = common(sub.add_parser("verify-math", help="check every bound on its grid"))
    v.add_argument("--grid", default="default", choices=["default", "quick"])
    v.add_argument("--out", default=None, help="CSV report path")
    v.set_defaults(func=cmd_verify_math)

    a = common(sub.add_parser("angle-mc", help="Monte Carlo check of the angle bounds"))
    a.add_argument("--d", type=int, default=2)
    a.add_argument("--s", type=float, default=1.0)
    a.add_argument("--sigma", type=float, default=0.5)
    a.add_argument("--r", type=float, default=1.0)
    a.add_argument("--window", type=float, default=0.01)
    a.add_argument("--trials", type=int, default=10**6)
    a.add_argument("--bins", type=int, default=24)
    a.add_argument("--tolerance", type=float, default=0.05)
    a.add_argument("--proposal", default="auto", choices=["auto", "direct", "tilted"])
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_angle_mc)

    t = common(sub.add_parser("tail", help="estimate tail probabilities"))
    t.add_argument("--quantity", default="delta_min", choices=[q for q in harness.QUANTITIES
                                                              if q != "conditioned_single"])
    t.add_argument("--n", type=int, default=5)
    t.add_argument("--d", type=int, default=2)
    t.add_argument("--sigma", type=float, default=1.0)
    t.add_argument("--kind", default="uniform", choices=[k for k in instances.KINDS if k != "file"])
    t.add_argument("--eps", type=_floats, default=DEFAULT_EPS)
    t.add_argument("--trials", type=int, default=10**5)
    t.add_argument("--out", default=None, help="CSV path (default stdout)")
    t.add_argument("--json", default=None, help="also write the JSON envelope here")
    t.set_defaults(func=cmd_tail)

    e = common(sub.add_parser("experiment", help="iteration-count experiment"))
    e.add_argument("--n", dest="n_grid", type=_ints, default=[20, 40, 80])
    e.add_argument("--d", dest="d_grid", type=_ints, default=[2])
    e.add_argument("--sigma", dest="sigma_grid", type=_floats, default=[0.1])
    e.add_argument("--kind", default="uniform", choices=[k for k in instances.KINDS if k != "file"])
    e.add_argument("--trials", type=int, default=3)
    e.add_argument("--pivot", default="first", choices=tour.PIVOT_RULES)
    e.add_argument("--initial", default="random", choices=tour.INITIAL_TOURS)
    e.add_argument("--step-limit", dest="step_limit", type=int, default=None)
    e.add_argument("--box-c", dest="box_c", type=float, default=instances.DEFAULT_BOX_C)
    e.add_argument("--out", dest="output", default=None, help="output prefix (.csv and .json)")
    e.add_argument("--timing", action="store_true", help="fill the ms column (breaks bit-identity)")
    e.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    e.set_defaults(func=cmd_experiment)

    x = common(sub.add_parser("export", help="convert a JSON envelope to CSV or JSON"))
    x.add_argument("--input", required=True)
    x.add_argument("--output", required=True)
    x.add_argument("--format", default="csv", choices=["csv", "json"])
    x.set_defaults(func=cmd_export)
    return p


def _public(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "config")}


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise UsageError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file is not valid JSON: {exc}") from None
        sp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sp._actions}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sp.set_defaults(**doc)
        args = parser.parse_args(argv)
    args.seed = _resolve_seed(args)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except UsageError as exc:
        _log(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    _log("config: " + json.dumps(_public(args), sort_keys=True, default=str))
    try:
        return args.func(args)
    except UsageError as exc:
        _log(str(exc))
        return EXIT_USAGE
    except (ValueError, ParseError, UnsupportedFormatError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
