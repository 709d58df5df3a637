"""Registry of the explicit tail, density and iteration bounds.

Each entry is a plain formula; its hidden leading constant is a registry
constant (1 unless calibrated) multiplied in by :func:`paper_bound`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

from .angles import angle_constants, fit_sup_constants
from .errors import DomainError, InvalidParameterError


@dataclass(frozen=True)
class BoundSpec:
    symbols: Tuple[str, ...]
    formula: Callable[..., float]
    needs_d3: bool = False
    note: str = ""


def _single_cond(M1, M2, a1, a2, r, eps):
    return math.pi * M1 * M2 * eps / (min(a1, r) * min(a2, r))


def _good_eta(M1, M2, a1, a2, r, p_e):
    return 2 * math.pi * M1 * M2 / (p_e * min(a1, r) * min(a2, r))


def _one_dist_1(d, D, sigma, a, r, eps):
    return (math.sqrt(d) * D / sigma ** 2 + d / math.sqrt(a * r) + d / r
            + d ** 0.75 * math.sqrt(D) / sigma * (1 / math.sqrt(a) + 1 / math.sqrt(r))) * eps


def _one_dist_3(d, D, sigma, a, eps):
    return (math.sqrt(d) * D / sigma ** 2 + d ** 0.75 * math.sqrt(D) / (sigma * math.sqrt(a))) * eps


def _one_dist_5(d, D, sigma, r, eps):
    return (math.sqrt(d) * D / sigma ** 2 + d / r + d ** 0.75 * math.sqrt(D) / (sigma * math.sqrt(r))) * eps


def _type1a_eta(M, a2, a3, eta):
    if not (-a2 < eta < min(a2, 2 * a3 - a2)):
        return 0.0
    if a3 >= a2:
        return M * math.sqrt(2 / (a2 * a2 - eta * eta))
    return M * math.sqrt(2 / ((a2 + eta) * (2 * a3 - a2 - eta)))


def _type1a_2(d, D, sigma, a2, eps):
    return (d ** 0.25 * math.sqrt(D) / sigma + math.sqrt(d / a2)) * math.sqrt(eps)


def _type1(n, d, D, sigma, eps):
    return n ** 5 * d ** 0.75 * D ** 1.5 * eps ** 1.5 / sigma ** 3


REGISTRY: Dict[str, BoundSpec] = {
    "single_cond": BoundSpec(("M1", "M2", "a1", "a2", "r", "eps"), _single_cond),
    "good_eta": BoundSpec(("M1", "M2", "a1", "a2", "r", "p_e"), _good_eta),
    "one_dist_1": BoundSpec(("d", "D", "sigma", "a", "r", "eps"), _one_dist_1),
    "one_dist_3": BoundSpec(("d", "D", "sigma", "a", "eps"), _one_dist_3),
    "one_dist_5": BoundSpec(("d", "D", "sigma", "r", "eps"), _one_dist_5),
    "type0": BoundSpec(("n", "d", "D", "sigma", "eps"),
                       lambda n, d, D, sigma, eps: d * D ** 2 * n ** 6 * eps ** 2 / sigma ** 4),
    "type1a_eta": BoundSpec(("M", "a2", "a3", "eta"), _type1a_eta,
                            note="zero outside (-a2, min(a2, 2 a3 - a2))"),
    "type1a_2": BoundSpec(("d", "D", "sigma", "a2", "eps"), _type1a_2),
    "type1a": BoundSpec(("n", "d", "D", "sigma", "eps"), _type1),
    "type1b": BoundSpec(("n", "d", "D", "sigma", "eps"), _type1),
    "single_d3": BoundSpec(("d", "D", "sigma", "a", "r", "eps"),
                           lambda d, D, sigma, a, r, eps: (math.sqrt(d) / min(a, r) + D / sigma ** 2) * eps,
                           needs_d3=True),
    "linked_d3": BoundSpec(("d", "n", "D", "sigma", "eps"),
                           lambda d, n, D, sigma, eps: D ** 2 * n ** 6 * eps ** 2 / sigma ** 4,
                           needs_d3=True),
    "iters_d2": BoundSpec(("n", "d", "D", "sigma"),
                          lambda n, d, D, sigma: d * D ** 2 * n ** (13 / 3) / sigma ** 2),
    "iters_d3": BoundSpec(("n", "d", "D", "sigma"),
                          lambda n, d, D, sigma: math.sqrt(d) * D ** 2 * n ** 4 / sigma ** 2,
                          needs_d3=True),
}

# comparison tables: small sigma (sigma = O(1/sqrt(n log n))) and large sigma
_TABLES = {
    "table_small/erv/d2": (("n", "sigma"), lambda n, sigma: n ** (13 / 3) / sigma ** (16 / 3) * math.log(n / sigma)),
    "table_small/erv/d3": (("n", "sigma"), lambda n, sigma: n ** (13 / 3) / sigma ** 8 * math.log(n / sigma)),
    "table_small/erv/d4": (("n", "sigma", "d", "c_d"),
                           lambda n, sigma, d, c_d: c_d * n ** (13 / 3) / sigma ** (8 * d / 3)),
    "table_small/mv/d4": (("n", "sigma", "d"), lambda n, sigma, d: math.sqrt(d) * n ** 4 / sigma ** 4),
    "table_small/ours/d2": (("n", "sigma"), lambda n, sigma: n ** (13 / 3) / sigma ** 2),
    "table_small/ours/d3": (("n", "sigma"), lambda n, sigma: n ** 4 / sigma ** 2),
    "table_small/ours/d4": (("n", "sigma", "d"), lambda n, sigma, d: math.sqrt(d) * n ** 4 / sigma ** 2),
    "table_large/erv/d2": (("n",), lambda n: n ** 7 * math.log(n) ** (11 / 3)),
    "table_large/erv/d3": (("n",), lambda n: n ** (25 / 3) * math.log(n) ** 5),
    "table_large/erv/d4": (("n", "d", "c_d"),
                           lambda n, d, c_d: c_d * n ** (4 + (1 + 4 * d) / 3) * math.log(n) ** (1 + 4 * d / 3)),
    "table_large/mv/d4": (("n", "d"), lambda n, d: math.sqrt(d) * n ** 6 * math.log(n) ** 2),
    "table_large/ours/d2": (("n",), lambda n: n ** (16 / 3) * math.log(n)),
    "table_large/ours/d3": (("n",), lambda n: n ** 5 * math.log(n)),
    "table_large/ours/d4": (("n", "d"), lambda n, d: math.sqrt(d) * n ** 5 * math.log(n)),
}
REGISTRY.update({k: BoundSpec(s, f) for k, (s, f) in _TABLES.items()})

DEFAULTS = {"c_d": 1.0}


def registry_constant(bound_id: str) -> float:
    return float(angle_constants().get("registry", {}).get(bound_id, 1.0))


def paper_bound(bound_id: str, params: dict, constant: float = None) -> float:
    """Evaluate bound ``bound_id`` on ``params`` times its registry constant."""
    try:
        spec = REGISTRY[bound_id]
    except KeyError:
        raise InvalidParameterError(f"unknown bound id {bound_id!r}") from None
    args = {}
    for sym in spec.symbols:
        if sym in params:
            args[sym] = params[sym]
        elif sym in DEFAULTS:
            args[sym] = DEFAULTS[sym]
        else:
            raise InvalidParameterError(f"bound {bound_id!r} needs parameter {sym!r}")
    if spec.needs_d3 and args.get("d", params.get("d", 3)) < 3:
        raise DomainError(f"bound {bound_id!r} holds only for d >= 3")
    if bound_id.endswith("/d3") and params.get("d", 3) != 3:
        raise DomainError(f"table entry {bound_id!r} is for d = 3")
    c = registry_constant(bound_id) if constant is None else constant
    return c * spec.formula(**args)


def randomexpt_weights(a1: float, a2: float, r: float) -> Tuple[float, float]:
    """(b1, b2) for the two-angle experiment, chosen by the ordering of a1, a2 and r."""
    if a1 <= r and a2 <= r:
        return a1, a2
    if a1 >= r and a2 >= r:
        return r, r
    if a1 >= r >= a2:
        return r, a2
    return a1, r


def calibrate(path=None) -> dict:
    """Refit the angle-bound constants; optionally write them to ``path`` as JSON."""
    fitted = fit_sup_constants()
    out = dict(angle_constants())
    out["fitted_C1"], out["fitted_C2"] = fitted["C1"], fitted["C2"]
    out["shipped_covers_fit"] = out["C1"] >= fitted["C1"] and out["C2"] >= fitted["C2"]
    if path is not None:
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
    return out
