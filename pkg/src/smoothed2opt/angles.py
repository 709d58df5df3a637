"""Conditional angle densities, their maximisers and samplers.

The angle phi lies between y - x and E[y] - x for a Gaussian point y
conditioned on ||y - x|| = r. With kappa = r s / sigma^2 and
nu = d/2 - 1 its density on [0, pi] is

    f(phi) = (kappa/2)^nu sin^{2 nu}(phi) e^{kappa cos phi} / (sqrt(pi) Gamma(nu + 1/2) I_nu(kappa)).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import DomainError, InsufficientDataError, InvalidParameterError, NumericalError
from .special import log_bessel_i

NORMALIZATION_TOL = 1e-8
LARGE_KAPPA = 1e4


@dataclass(frozen=True)
class AngleContext:
    d: int
    r: float
    s: float
    sigma: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise InvalidParameterError(f"d must be an integer >= 2, got {self.d}")
        if not self.r > 0:
            raise InvalidParameterError(f"r must be > 0, got {self.r}")
        if not self.s >= 0:
            raise InvalidParameterError(f"s must be >= 0, got {self.s}")
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be > 0, got {self.sigma}")

    @property
    def kappa(self) -> float:
        return self.r * self.s / self.sigma ** 2

    @property
    def nu(self) -> float:
        return self.d / 2 - 1

    @classmethod
    def from_kappa(cls, d: int, kappa: float) -> "AngleContext":
        return cls(d, 1.0, float(kappa), 1.0)


@dataclass(frozen=True)
class RandomExptOutcome:
    branch: int
    good_angle: float


# ------------------------------------------------------------------ density

def _log_norm(nu: float, kappa: float) -> float:
    """log of the constant multiplying sin^{2nu} e^{kappa cos}."""
    base = -0.5 * math.log(math.pi) - math.lgamma(nu + 0.5)
    if kappa == 0:
        return base + math.lgamma(nu + 1)
    return base + nu * math.log(kappa / 2) - log_bessel_i(nu, kappa)


def log_angle_density(nu: float, kappa: float, phi):
    phi = np.asarray(phi, dtype=float)
    if np.any((phi < 0) | (phi > math.pi)):
        raise DomainError("phi must lie in [0, pi]")
    with np.errstate(divide="ignore"):
        ls = np.log(np.sin(phi))
    sin_part = 0.0 if nu == 0 else 2 * nu * ls
    return _log_norm(nu, kappa) + sin_part + kappa * np.cos(phi)


@lru_cache(maxsize=4096)
def _check_normalization(nu: float, kappa: float) -> float:
    ln = _log_norm(nu, kappa)

    def f(t):
        sn = math.sin(t)
        if nu == 0:
            return math.exp(ln + kappa * math.cos(t))
        return math.exp(ln + 2 * nu * math.log(sn) + kappa * math.cos(t)) if sn > 0 else 0.0

    peak = _peak(nu, kappa)
    # the mass sits within a few multiples of 1/sqrt(kappa) of the peak
    cut = min(math.pi, peak + 60 / math.sqrt(max(kappa, 1.0)))
    pts = [peak] if 0 < peak < cut else None
    total, _ = integrate.quad(f, 0.0, cut, points=pts, epsabs=1e-13, epsrel=1e-12, limit=400)
    if cut < math.pi:
        total += integrate.quad(f, cut, math.pi, epsabs=1e-13, limit=200)[0]
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NumericalError(f"angle density integrates to {total} for nu={nu}, kappa={kappa}")
    return total


def angle_density(ctx: AngleContext, phi, check: bool = True):
    """Exact conditional density of phi; scalar or array ``phi``."""
    nu, kappa = ctx.nu, ctx.kappa
    if check:
        _check_normalization(nu, kappa)
    out = np.exp(log_angle_density(nu, kappa, phi))
    return float(out) if np.ndim(out) == 0 else out


def optimal_angle(nu: float, kappa: float):
    """``(phi_star, cos_phi_star)`` maximising sin^{2nu}(phi) e^{kappa cos phi}."""
    if not kappa > 0:
        raise DomainError(f"optimal angle needs kappa > 0, got {kappa}")
    if nu == 0:
        return 0.0, 1.0
    cos_star = kappa / (math.hypot(kappa, nu) + nu)
    q = kappa / nu
    phi_star = 2 * math.atan(math.sqrt(1 / (math.hypot(q, 1.0) + q)))
    return phi_star, cos_star


def stationarity_residual(nu: float, kappa: float) -> float:
    phi, c = optimal_angle(nu, kappa)
    return abs(math.sin(phi) ** 2 - (2 * nu / kappa) * c)


def _peak(nu: float, kappa: float) -> float:
    if kappa == 0:
        return math.pi / 2 if nu > 0 else 0.0
    return optimal_angle(nu, kappa)[0]


def exact_sup(ctx: AngleContext) -> float:
    """sup over [0, pi] of the angle density."""
    return float(np.exp(log_angle_density(ctx.nu, ctx.kappa, _peak(ctx.nu, ctx.kappa))))


def exact_sup_over_sine(ctx: AngleContext) -> float:
    """sup over (0, pi) of density / sin(phi); needs d >= 3."""
    if ctx.d < 3:
        raise DomainError("over-sine supremum needs d >= 3")
    nu, kappa = ctx.nu, ctx.kappa
    if ctx.d == 3:
        # limit at phi -> 0 of kappa e^{kappa cos}/(2 sinh kappa)
        return 0.5 if kappa == 0 else kappa / -math.expm1(-2 * kappa)
    phi = _peak(nu - 0.5, kappa)
    return float(np.exp(log_angle_density(nu, kappa, phi) - math.log(math.sin(phi))))


# ------------------------------------------------------------------ bounds

@lru_cache(maxsize=1)
def angle_constants() -> dict:
    text = resources.files(__package__).joinpath("constants.json").read_text()
    return json.loads(text)


def sup_bound_shape(d: int, kappa: float, form: str) -> float:
    if form == "plain":
        return math.sqrt(d) + math.sqrt(kappa)
    if form == "over_sine":
        if d < 3:
            raise DomainError("over_sine bound needs d >= 3")
        return math.sqrt(d) + kappa / math.sqrt(d)
    raise InvalidParameterError(f"unknown form {form!r}; expected plain or over_sine")


def angle_sup_bound(ctx: AngleContext, form: str = "plain", constant: Optional[float] = None) -> float:
    """C1 (sqrt d + sqrt(rs)/sigma) or, for d >= 3, C2 (sqrt d + rs/(sigma^2 sqrt d))."""
    shape = sup_bound_shape(ctx.d, ctx.kappa, form)
    if constant is None:
        constant = angle_constants()["C1" if form == "plain" else "C2"]
    return constant * shape


def corollary_sup_bound(d, r, rbar, s, sbar, sigma, form="plain", constant=None) -> float:
    """Sup bound for the angle at x between two Gaussian points, using min(r rbar, s sbar)."""
    k = min(r * rbar, s * sbar)
    return angle_sup_bound(AngleContext(d, 1.0, k, sigma), form, constant)


def fit_sup_constants(ds=range(2, 11), kappas=None, margin: float = 1.05) -> dict:
    """Grid-fit C1, C2 as the worst exact/shape ratio times ``margin``."""
    if kappas is None:
        kappas = np.concatenate([[0.0], np.logspace(-3, 5, 241)])
    c1 = c2 = 0.0
    for d in ds:
        for k in kappas:
            ctx = AngleContext.from_kappa(d, float(k))
            c1 = max(c1, exact_sup(ctx) / sup_bound_shape(d, ctx.kappa, "plain"))
            if d >= 3:
                c2 = max(c2, exact_sup_over_sine(ctx) / sup_bound_shape(d, ctx.kappa, "over_sine"))
    return {"C1": c1 * margin, "C2": c2 * margin}


# ------------------------------------------------------------------ sampling

def _polar_u_wood(nu: float, kappa: float, rng, m: int) -> np.ndarray:
    """u = 1 - cos(phi) by Wood's rejection scheme for the von Mises-Fisher polar law."""
    dm1 = 2 * nu + 1.0  # d - 1
    b = dm1 / (math.sqrt(4 * kappa * kappa + dm1 * dm1) + 2 * kappa)
    x0 = (1 - b) / (1 + b)
    c = kappa * x0 + dm1 * math.log(1 - x0 * x0)
    out = np.empty(m)
    filled = 0
    while filled < m:
        k = max(16, int(1.3 * (m - filled)))
        z = rng.beta(dm1 / 2, dm1 / 2, size=k)
        den = 1 - (1 - b) * z
        u = 2 * b * z / den
        w = 1 - u
        v = rng.random(k)
        ok = kappa * w + dm1 * np.log1p(-x0 * w) - c >= np.log(v)
        got = u[ok][: m - filled]
        out[filled:filled + got.size] = got
        filled += got.size
    return out


def _polar_u_gamma(nu: float, kappa: float, rng, m: int) -> np.ndarray:
    """Large-kappa branch: Gamma(nu + 1/2, 1/kappa) proposal on u = 1 - cos(phi)."""
    a = nu - 0.5
    out = np.empty(m)
    filled = 0
    while filled < m:
        k = max(16, int(1.2 * (m - filled)))
        u = rng.gamma(nu + 0.5, 1 / kappa, size=k)
        v = rng.random(k)
        if a >= 0:
            ok = (u < 2) & (v <= ((2 - u) / 2) ** a)
        else:
            # mass beyond u = 1 is below e^{-kappa}, zero in double precision
            ok = (u <= 1) & (v <= (2 - np.minimum(u, 1)) ** a)
        got = u[ok][: m - filled]
        out[filled:filled + got.size] = got
        filled += got.size
    return out


def sample_polar(nu: float, kappa: float, rng, size: int) -> np.ndarray:
    if kappa > LARGE_KAPPA:
        u = _polar_u_gamma(nu, kappa, rng, size)
    else:
        u = _polar_u_wood(nu, kappa, rng, size)
    return 2 * np.arcsin(np.sqrt(np.clip(u, 0, 2) / 2))


def sample_angle(ctx: AngleContext, seed=None, size: Optional[int] = None):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    phi = sample_polar(ctx.nu, ctx.kappa, rng, 1 if size is None else int(size))
    return float(phi[0]) if size is None else phi


def random_expt(b1: float, b2: float, ctx1: AngleContext, ctx2: AngleContext,
                seed=None, draws=None) -> RandomExptOutcome:
    """One run of the two-angle experiment; ``draws`` injects (phi1, phi2)."""
    if not (b1 > 0 and b2 > 0):
        raise InvalidParameterError("b1 and b2 must be positive")
    if draws is None:
        rng = np.random.default_rng(seed)
        phi1 = sample_angle(ctx1, rng)
        phi2 = sample_angle(ctx2, rng)
    else:
        phi1, phi2 = draws
    if math.sqrt(b1) * math.sin(phi1) > math.sqrt(b2) * math.sin(phi2):
        return RandomExptOutcome(1, float(phi1))
    return RandomExptOutcome(2, float(phi2))


def random_expt_batch(b1, b2, ctx1, ctx2, size: int, seed=None):
    """Vectorised runs: arrays ``(branch, good_angle)``."""
    if not (b1 > 0 and b2 > 0):
        raise InvalidParameterError("b1 and b2 must be positive")
    rng = np.random.default_rng(seed)
    phi1 = sample_angle(ctx1, rng, size)
    phi2 = sample_angle(ctx2, rng, size)
    first = math.sqrt(b1) * np.sin(phi1) > math.sqrt(b2) * np.sin(phi2)
    return np.where(first, 1, 2), np.where(first, phi1, phi2)


def goodangle_density_bound(phi, b_i, b_j, m1, m2, p_ei):
    """2 M1 M2 / P(E_i) * arcsin(min(1, sqrt(b_i/b_j) sin phi))."""
    arg = np.minimum(1.0, math.sqrt(b_i / b_j) * np.sin(np.asarray(phi, dtype=float)))
    return 2 * m1 * m2 / p_ei * np.arcsin(arg)


# ------------------------------------------------------------------ eta densities

def eta_phi(a: float, r: float, eta: float) -> float:
    lo, hi = -r, a - abs(a - r)
    if not lo <= eta <= hi:
        raise DomainError(f"eta={eta} outside the feasible range [{lo}, {hi}]")
    c = (a * a + r * r - (a - eta) ** 2) / (2 * a * r)
    return math.acos(min(1.0, max(-1.0, c)))


def eta_density_bound(a: float, r: float, eta: Optional[float] = None, form: str = "general",
                      ctx: Optional[AngleContext] = None, M: Optional[float] = None,
                      d: Optional[int] = None, D: Optional[float] = None,
                      sigma: Optional[float] = None, constant: float = 1.0):
    """Bound on the density of eta.

    ``general`` returns ``(bound, phi(eta))`` using the exact angle density of
    ``ctx`` or a flat sup ``M``; it is +inf where sin(phi(eta)) = 0.
    ``d3`` returns ``constant * (a + r)/(a r) * (sqrt d + D min(r, a)/sigma^2)``.
    """
    if not (a > 0 and r > 0):
        raise DomainError("a and r must be positive")
    pref = (a + r) / (a * r)
    if form == "d3":
        if d is None or D is None or sigma is None:
            raise InvalidParameterError("d3 form needs d, D and sigma")
        if d < 3:
            raise DomainError("d3 eta bound needs d >= 3")
        return constant * pref * (math.sqrt(d) + D * min(r, a) / sigma ** 2)
    if form != "general":
        raise InvalidParameterError(f"unknown form {form!r}")
    if eta is None:
        raise InvalidParameterError("general form needs eta")
    phi = eta_phi(a, r, eta)
    sn = math.sin(phi)
    if sn <= 1e-300:
        return math.inf, phi
    if ctx is not None:
        f = angle_density(ctx, phi)
    elif M is not None:
        f = M
    else:
        raise InvalidParameterError("general form needs ctx or M")
    return pref * f / sn, phi


# ------------------------------------------------------------------ Monte Carlo

@dataclass
class AngleMCReport:
    d: int
    s: float
    sigma: float
    r: float
    window: float
    accepted: int
    drawn: int
    proposal: str
    ess: float
    empirical_sup: float
    exact_sup: float
    bound: float
    empirical_sup_half: float
    drift: float
    tolerance: float
    edges: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    @property
    def ok_exact(self) -> bool:
        return self.empirical_sup <= self.exact_sup * (1 + self.tolerance)

    @property
    def ok_bound(self) -> bool:
        return self.exact_sup * (1 + self.tolerance) <= self.bound

    @property
    def ok_drift(self) -> bool:
        return self.drift < 0.02

    @property
    def passed(self) -> bool:
        return self.ok_exact and self.ok_bound and self.ok_drift

    def summary(self) -> dict:
        keys = ("d", "s", "sigma", "r", "window", "accepted", "drawn", "proposal", "ess",
                "empirical_sup", "exact_sup", "bound", "empirical_sup_half", "drift", "tolerance")
        out = {k: getattr(self, k) for k in keys}
        out.update(ok_exact=self.ok_exact, ok_bound=self.ok_bound, ok_drift=self.ok_drift,
                   passed=self.passed)
        return out


def _weighted_hist(phi, w, bins):
    edges = np.linspace(0.0, math.pi, bins + 1)
    h, _ = np.histogram(phi, bins=edges, weights=w)
    return edges, h / (h.sum() * (edges[1] - edges[0]))


def mc_angle_verify(d: int, s: float, sigma: float, r: float, window: float = 0.01,
                    trials: int = 10**6, seed=None, bins: int = 24, tolerance: float = 0.05,
                    proposal: str = "auto", batch: int = 2_000_000,
                    max_draws: int = 2 * 10**9) -> AngleMCReport:
    """Histogram the angle of Gaussian points whose distance to the origin is within ``window`` of ``r``.

    ``trials`` counts accepted points. With ``proposal='tilted'`` (chosen
    automatically when the radius window is rarely hit) points are drawn
    around a mean pulled towards radius r and reweighted by the likelihood
    ratio, which keeps the estimate exact in expectation.
    """
    if not window > 0:
        raise InvalidParameterError("window must be > 0")
    ctx = AngleContext(d, r, s, sigma)
    rng = np.random.default_rng(seed)
    lo, hi = r * (1 - window), r * (1 + window)
    s2 = sigma * sigma

    def draw(mean, k):
        y = rng.standard_normal((k, d)) * sigma
        y[:, 0] += mean
        return y

    tilt = math.sqrt(max(r * r - d * s2, 0.0))
    if proposal == "auto":
        y = draw(s, 100_000)
        rad = np.sqrt(np.einsum("ij,ij->i", y, y))
        rate = np.mean((rad >= lo) & (rad <= hi))
        proposal = "direct" if rate > 1e-3 else "tilted"
    if proposal not in ("direct", "tilted"):
        raise InvalidParameterError(f"unknown proposal {proposal!r}")
    mean = s if proposal == "direct" else tilt

    phis, ws, inner = [], [], []
    accepted = drawn = 0
    while accepted < trials and drawn < max_draws:
        y = draw(mean, batch)
        drawn += batch
        rad = np.sqrt(np.einsum("ij,ij->i", y, y))
        keep = (rad >= lo) & (rad <= hi)
        if not keep.any():
            continue
        yk, rk = y[keep], rad[keep]
        phi = np.arccos(np.clip(yk[:, 0] / rk, -1.0, 1.0))
        if proposal == "direct":
            w = np.ones(phi.size)
        else:
            w = np.exp(yk[:, 0] * (s - mean) / s2 - (s * s - mean * mean) / (2 * s2))
        take = min(phi.size, trials - accepted)
        phis.append(phi[:take])
        ws.append(w[:take])
        inner.append(np.abs(rk[:take] - r) <= r * window / 2)
        accepted += take
    if accepted == 0:
        raise InsufficientDataError(
            f"no samples fell in the radius window {window}; use a larger window or more trials")
    phi = np.concatenate(phis)
    w = np.concatenate(ws)
    half = np.concatenate(inner)
    if not half.any():
        raise InsufficientDataError("no samples in the halved window; use a larger window")
    edges, dens = _weighted_hist(phi, w, bins)
    _, dens_half = _weighted_hist(phi[half], w[half], bins)
    emp, emp_half = float(dens.max()), float(dens_half.max())
    ess = float(w.sum() ** 2 / np.dot(w, w))
    return AngleMCReport(d, s, sigma, r, window, accepted, drawn, proposal, ess,
                         emp, exact_sup(ctx), angle_sup_bound(ctx, "plain"), emp_half,
                         abs(emp_half - emp) / emp, tolerance, edges, dens)
