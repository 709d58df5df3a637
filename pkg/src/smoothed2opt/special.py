"""Modified Bessel functions, their lower bounds, and chi distributions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np
from scipy import integrate

from .errors import DomainError, InvalidParameterError, NumericalError, RangeError

SCALED_THRESHOLD = 30.0
SERIES_RTOL = 1e-17
GENERIC_C = 0.05
CHI_CDF_ATOL = 1e-9
CROSS_FORM_RTOL = 1e-8
_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class BesselArgs:
    nu: float
    x: float

    def __post_init__(self):
        if not self.nu > -0.5:
            raise DomainError(f"Bessel order nu={self.nu} must exceed -1/2")
        if not self.x >= 0:
            raise DomainError(f"Bessel argument x={self.x} must be >= 0")


@dataclass(frozen=True)
class ChiParams:
    d: int
    s: float
    sigma: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise InvalidParameterError(f"d must be an integer >= 2, got {self.d}")
        if not self.s >= 0:
            raise InvalidParameterError(f"noncentrality s must be >= 0, got {self.s}")
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be > 0, got {self.sigma}")


# ---------------------------------------------------------------- Bessel I_nu

def _log_term(k: int, nu: float, lhx: float) -> float:
    return (2 * k + nu) * lhx - math.lgamma(k + 1) - math.lgamma(k + nu + 1)


def log_bessel_i(nu: float, x: float) -> float:
    """log I_nu(x) from the power series, summed outward from its largest term."""
    BesselArgs(nu, x)
    if x == 0.0:
        if nu == 0:
            return 0.0
        if nu > 0:
            return -math.inf
        raise RangeError(f"I_{nu}(0) is infinite for negative order")
    q = 0.25 * x * x
    lhx = math.log(0.5 * x)
    kp = max(0, int((math.sqrt(nu * nu + x * x) - nu) / 2.0))
    total = 1.0
    t = 1.0
    k = kp
    while True:
        t *= q / ((k + 1) * (k + 1 + nu))
        total += t
        k += 1
        if t < SERIES_RTOL * total:
            break
    t = 1.0
    k = kp
    while k > 0:
        t *= k * (k + nu) / q
        total += t
        k -= 1
        if t < SERIES_RTOL * total:
            break
    return _log_term(kp, nu, lhx) + math.log(total)


def bessel_i(nu: float, x: float, scaled: bool = False) -> float:
    """I_nu(x), or e^{-x} I_nu(x) when ``scaled``.

    Past x = 30 the unscaled value is only formed on return, so huge
    arguments raise :class:`RangeError` unless ``scaled`` is set.
    """
    lv = log_bessel_i(nu, x)
    if scaled:
        return math.exp(lv - x)
    if lv > _LOG_MAX:
        raise RangeError(f"I_{nu}({x}) overflows a double; call with scaled=True")
    return math.exp(lv)


def _sqrt_term(nu, x):
    return math.sqrt(x * x + nu * nu)


def largex_constant(nu: float) -> float:
    if nu < 0.5:
        raise DomainError("largex bound needs nu >= 1/2 (main branch of the large-x lemma)")
    return (1 / (nu + 0.5) - 1 / (nu + 1.5)) / (2 ** nu * math.sqrt(math.pi) * math.gamma(nu + 0.5))


def bessel_lower_bound(which: str, nu: float, x: float, c: float = GENERIC_C) -> float:
    """One of the four lower bounds on I_nu (``ratio`` bounds I_nu / I_{nu-1})."""
    if which == "k0":
        if not (x >= 0 and nu > -0.5):
            raise DomainError("k0 bound needs x >= 0 and nu > -1/2")
        if x == 0:
            return 1.0 if nu == 0 else (0.0 if nu > 0 else math.inf)
        return math.exp(nu * math.log(x / 2) - math.lgamma(nu + 1))
    if which == "largex":
        if not x > 1:
            raise DomainError("largex bound needs x > 1")
        return largex_constant(nu) * math.exp(x) / math.sqrt(x)
    if which == "generic":
        if not (x > 1 and nu >= 0):
            raise DomainError("generic bound needs x > 1 and nu >= 0")
        r = _sqrt_term(nu, x)
        return c * math.exp((nu + 0.5) * math.log((r - nu) / x) + r - 0.5 * math.log(x))
    if which == "ratio":
        if not (x > 0 and nu >= 1):
            raise DomainError("ratio bound needs x > 0 and nu >= 1")
        return (_sqrt_term(nu, x) - nu) / x
    raise InvalidParameterError(f"unknown bound {which!r}; expected k0, largex, generic or ratio")


def bessel_bound_truth(which: str, nu: float, x: float) -> float:
    """Quantity each bound is compared against."""
    if which == "ratio":
        return math.exp(log_bessel_i(nu, x) - log_bessel_i(nu - 1, x))
    return bessel_i(nu, x)


def simple_inequality_lhs(x: float, y: float) -> float:
    if not (x >= 0 and y >= 1):
        raise DomainError(f"need x >= 0 and y >= 1, got x={x}, y={y}")
    h = y - 0.5
    return ((math.sqrt(x * x + y * y) + y) / (math.sqrt(x * x + h * h) + h)) ** y


# -------------------------------------------------------------- chi densities

def _log_central(d: int, sigma: float, r: float) -> float:
    return ((d - 1) * math.log(r) - r * r / (2 * sigma * sigma)
            - (d / 2 - 1) * math.log(2) - math.lgamma(d / 2) - d * math.log(sigma))


def _log_bessel_form(p: ChiParams, r: float) -> float:
    d, s, sig = p.d, p.s, p.sigma
    if s == 0:
        return _log_central(d, sig, r)
    nu = d / 2 - 1
    kappa = r * s / (sig * sig)
    return (-(r * r + s * s) / (2 * sig * sig) + (d - 1) * math.log(r) - d * math.log(sig)
            - nu * math.log(kappa) + log_bessel_i(nu, kappa))


def _log_mixture_form(p: ChiParams, r: float) -> float:
    d, s, sig = p.d, p.s, p.sigma
    lam = s * s / (2 * sig * sig)
    if lam == 0:
        return _log_central(d, sig, r)
    llam = math.log(lam)
    # term i ~ (lam r^2/2sigma^2)^i / (i! Gamma(d/2+i)); largest near i = kappa/2
    ip = int(r * s / (2 * sig * sig))
    logs = []
    i = ip
    top = None
    while True:
        v = i * llam - math.lgamma(i + 1) + _log_central(d + 2 * i, sig, r)
        top = v if top is None else max(top, v)
        logs.append(v)
        if v < top - 45:
            break
        i += 1
    i = ip - 1
    while i >= 0:
        v = i * llam - math.lgamma(i + 1) + _log_central(d + 2 * i, sig, r)
        logs.append(v)
        if v < top - 45:
            break
        i -= 1
    arr = np.asarray(logs)
    m = arr.max()
    return -lam + m + math.log(math.fsum(np.exp(arr - m)))


def chi_log_density(p: ChiParams, r: float, form: str = "bessel") -> float:
    if not r > 0:
        raise DomainError(f"chi density needs r > 0, got {r}")
    if form == "bessel":
        return _log_bessel_form(p, r)
    if form == "mixture":
        return _log_mixture_form(p, r)
    raise InvalidParameterError(f"unknown chi form {form!r}")


def chi_density(p: ChiParams, r, check: bool = True):
    """Noncentral chi density (Bessel form), cross-checked against the Poisson mixture.

    Accepts a scalar or an array of radii.
    """
    if np.ndim(r):
        return np.array([chi_density(p, float(v), check) for v in np.ravel(r)]).reshape(np.shape(r))
    lb = chi_log_density(p, r, "bessel")
    if check and p.s > 0:
        lm = chi_log_density(p, r, "mixture")
        if math.isfinite(lb) and math.isfinite(lm) and abs(lb - lm) > CROSS_FORM_RTOL:
            raise NumericalError(f"chi density forms disagree at r={r}: {lb} vs {lm} (log)")
    return math.exp(lb)


def chi_mode(p: ChiParams) -> float:
    """Location of the density peak (approximate for s > 0)."""
    central = p.sigma * math.sqrt(p.d - 1)
    if p.s == 0:
        return central
    return 0.5 * (p.s + math.sqrt(p.s * p.s + 4 * (p.d - 1) * p.sigma ** 2))


def _integrate(p: ChiParams, a: float, b: float) -> float:
    f = lambda t: math.exp(_log_bessel_form(p, t)) if t > 0 else 0.0
    mode = chi_mode(p)
    pts = [mode] if a < mode < b else None
    val, _ = integrate.quad(f, a, b, points=pts, epsabs=CHI_CDF_ATOL / 10, epsrel=1e-12, limit=400)
    return val


def _support_top(p: ChiParams) -> float:
    return chi_mode(p) + 45 * p.sigma


def chi_cdf(p: ChiParams, x: float) -> float:
    if not x >= 0:
        raise DomainError(f"chi CDF needs x >= 0, got {x}")
    if x == 0:
        return 0.0
    lo = max(0.0, chi_mode(p) - 45 * p.sigma)
    top = _support_top(p)
    if x <= lo:
        return _integrate(p, 0.0, x)
    val = _integrate(p, lo, min(x, top))
    if lo > 0:
        val += _integrate(p, 0.0, lo)
    return min(1.0, val)


def chi_total_mass(p: ChiParams) -> float:
    lo = max(0.0, chi_mode(p) - 45 * p.sigma)
    return _integrate(p, lo, _support_top(p)) + (_integrate(p, 0.0, lo) if lo > 0 else 0.0)


def chi_sample(p: ChiParams, seed=None, size: Optional[int] = None):
    """Norm of ``s e_1 + sigma Z`` for standard Gaussian ``Z`` in R^d."""
    rng = np.random.default_rng(seed)
    m = 1 if size is None else int(size)
    z = rng.standard_normal((m, p.d)) * p.sigma
    z[:, 0] += p.s
    out = np.sqrt(np.einsum("ij,ij->i", z, z))
    return float(out[0]) if size is None else out


def chi_stochdom_check(p: ChiParams, xs: Iterable[float]) -> List[tuple]:
    """Rows ``(x, F_s(x), F_0(x))``; dominance means F_s <= F_0 at every x."""
    central = ChiParams(p.d, 0.0, p.sigma)
    return [(float(x), chi_cdf(p, x), chi_cdf(central, x)) for x in xs]


def chi_inverse_moment_closed(d: int, sigma: float, c: float) -> float:
    return sigma ** (-c) * 2 ** (-c / 2) * math.exp(math.lgamma((d - c) / 2) - math.lgamma(d / 2))


def chi_inverse_moment(d: int, sigma: float, c: float):
    """``(value, ratio)`` with value = E[X^-c] for central chi_d by quadrature, ratio = value d^{c/2} sigma^c."""
    if not 0 <= c < d:
        raise DomainError(f"inverse moment needs 0 <= c < d (integral diverges), got c={c}, d={d}")
    p = ChiParams(d, 0.0, sigma)
    g = lambda t: math.exp(_log_central(d, sigma, t) - c * math.log(t)) if t > 0 else (
        0.0 if d - 1 - c > 0 else math.exp(-math.lgamma(d / 2) - (d / 2 - 1) * math.log(2) - d * math.log(sigma)))
    mode = chi_mode(p)
    val, _ = integrate.quad(g, 0.0, _support_top(p), points=[mode], epsabs=1e-12, epsrel=1e-12, limit=400)
    return val, val * d ** (c / 2) * sigma ** c


# ------------------------------------------------------------ verification grid

BOUND_XS = (1.1, 1.5, 2.0, 5.0, 10.0, 50.0, 100.0)
BOUND_NUS = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0)


def _applies(which, nu, x):
    if which == "k0":
        return True
    if which == "largex":
        return x > 1 and nu >= 0.5
    if which == "generic":
        return x > 1
    return nu >= 1


def bessel_bound_rows(xs=BOUND_XS, nus=BOUND_NUS, c: float = GENERIC_C) -> List[dict]:
    rows = []
    for which in ("k0", "largex", "generic", "ratio"):
        for nu in nus:
            for x in xs:
                if not _applies(which, nu, x):
                    continue
                b = bessel_lower_bound(which, nu, x, c)
                t = bessel_bound_truth(which, nu, x)
                rows.append({"lemma": which, "nu": nu, "x": x, "bound": b, "truth": t, "margin": t - b})
    return rows


def simple_inequality_rows(xs=None, ys=None) -> List[dict]:
    xs = np.linspace(0.0, 50.0, 101) if xs is None else xs
    ys = np.linspace(1.0, 20.0, 39) if ys is None else ys
    rows = []
    for y in ys:
        for x in xs:
            v = simple_inequality_lhs(float(x), float(y))
            rows.append({"lemma": "simple_inequality", "nu": float(y), "x": float(x),
                         "bound": v, "truth": math.e, "margin": math.e - v})
    return rows


def fit_generic_constant(xs=None, nus=None) -> float:
    """Largest c for which the generic bound holds on the grid (the shipped value must not exceed it)."""
    xs = np.concatenate([np.linspace(1.0001, 10, 60), np.linspace(10, 100, 46)]) if xs is None else xs
    nus = np.linspace(0.0, 20.0, 81) if nus is None else nus
    best = math.inf
    for nu in nus:
        for x in xs:
            ratio = bessel_i(float(nu), float(x), scaled=True) / (
                bessel_lower_bound("generic", float(nu), float(x), 1.0) * math.exp(-x))
            best = min(best, ratio)
    return best


CSV_FIELDS = ("lemma", "nu", "x", "d", "s", "sigma", "bound", "truth", "margin")


def write_verification_csv(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, restval="", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
