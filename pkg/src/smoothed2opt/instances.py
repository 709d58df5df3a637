"""Adversarial layouts, Gaussian perturbation, the bounding-box event and instance files."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, ParseError, UnsupportedFormatError

KINDS = ("uniform", "grid", "clustered", "file")
DEFAULT_BOX_C = 4.0
CLUSTER_SPREAD = 0.05


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _check_distinct(points):
    if np.unique(points, axis=0).shape[0] != points.shape[0]:
        raise InvalidParameterError("points must be pairwise distinct")


@dataclass(frozen=True, eq=False)
class AdversarialLayout:
    points: np.ndarray
    kind: str
    seed: Optional[int] = None

    def __post_init__(self):
        pts = _frozen(self.points)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2:
            raise InvalidParameterError("points must be an (n, d) array")
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown layout kind {self.kind!r}")
        if self.n < 4:
            raise InvalidParameterError("a layout needs n >= 4 points")
        if self.d < 2:
            raise InvalidParameterError("a layout needs d >= 2")
        if np.any(np.abs(pts) > 1.0):
            raise InvalidParameterError("layout coordinates must lie in [-1, 1]")
        _check_distinct(pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class PerturbationSpec:
    sigma: float
    seed: int

    def __post_init__(self):
        if not (0.0 < self.sigma <= 1.0):
            raise InvalidParameterError("sigma must lie in (0, 1]")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray
    layout: Optional[AdversarialLayout] = None
    perturbation: Optional[PerturbationSpec] = None

    def __post_init__(self):
        pts = _frozen(self.points)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise InvalidParameterError("points must be an (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("points must be finite")
        if (self.layout is None) != (self.perturbation is None):
            raise InvalidParameterError("provenance needs both layout and perturbation")
        if self.layout is not None and self.layout.points.shape != pts.shape:
            raise InvalidParameterError("provenance layout shape mismatch")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def provenance(self):
        if self.layout is None:
            return None
        return self.layout, self.perturbation

    def noise(self):
        """The recorded Gaussian draws (regenerated from the seed)."""
        if self.perturbation is None:
            return None
        p = self.perturbation
        return gaussian_noise(p.seed, self.n, self.d) * p.sigma

    def check_provenance(self) -> bool:
        if self.layout is None:
            return True
        return bool(np.array_equal(self.points, self.layout.points + self.noise()))

    def scaled(self, lam: float) -> "PointSet":
        return PointSet(self.points * lam)


# --------------------------------------------------------------------------
# generation


def generate_adversarial(kind: str, n: int, d: int, seed: int = 0) -> AdversarialLayout:
    """Deterministic adversarial layout inside ``[-1, 1]^d``."""
    if n < 4:
        raise InvalidParameterError("n must be at least 4")
    if d < 2:
        raise InvalidParameterError("d must be at least 2")
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        pts = rng.uniform(-1.0, 1.0, size=(n, d))
    elif kind == "grid":
        k = max(2, math.ceil(round(n ** (1.0 / d), 12)))
        while k**d < n:
            k += 1
        axis = np.linspace(-1.0, 1.0, k)
        mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)
        pts = mesh.reshape(-1, d)[:n]
    elif kind == "clustered":
        k = math.ceil(math.sqrt(n))
        centers = rng.uniform(-1.0, 1.0, size=(k, d))
        labels = np.arange(n) % k
        pts = np.empty((n, d))
        for i in range(n):
            while True:  # truncation to the cube by resampling
                p = centers[labels[i]] + CLUSTER_SPREAD * rng.standard_normal(d)
                if np.all(np.abs(p) <= 1.0):
                    break
            pts[i] = p
    elif kind == "file":
        raise InvalidParameterError("kind 'file' layouts come from load_instance")
    else:
        raise InvalidParameterError(f"unknown layout kind {kind!r}")
    return AdversarialLayout(pts, kind, seed)


def gaussian_noise(seed: int, count: int, d: int) -> np.ndarray:
    """Standard normal ``(count, d)`` block; row ``i`` depends only on ``(seed, i)``.

    Uniforms come from a Philox counter stream, ``2 * ceil(d / 2)`` per row at a
    fixed offset, and are turned into normals by the Box-Muller transform.
    """
    k = 2 * ((d + 1) // 2)
    bg = np.random.Philox(key=int(seed))
    raw = bg.random_raw(count * k).reshape(count, k // 2, 2)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    rad = np.sqrt(-2.0 * np.log(u[..., 0]))
    ang = 2.0 * math.pi * u[..., 1]
    z = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1).reshape(count, k)
    return z[:, :d]


def perturb(layout: AdversarialLayout, spec: PerturbationSpec) -> PointSet:
    noise = gaussian_noise(spec.seed, layout.n, layout.d) * spec.sigma
    return PointSet(layout.points + noise, layout, spec)


def perturb_batch(layout: AdversarialLayout, sigma: float, seed: int, trials: int) -> np.ndarray:
    """``trials`` perturbed copies, shape ``(trials, n, d)``.

    Copy ``t`` equals ``perturb`` with row offset ``t * n`` in the same stream,
    so copy 0 coincides with ``perturb(layout, PerturbationSpec(sigma, seed))``.
    """
    PerturbationSpec(sigma, seed)
    n, d = layout.n, layout.d
    noise = gaussian_noise(seed, trials * n, d).reshape(trials, n, d)
    return layout.points[None] + sigma * noise


# --------------------------------------------------------------------------
# bounding box


def box_radius(c: float, sigma: float, n: float) -> float:
    """``D = c (1 + sigma sqrt(n ln n))``."""
    if c < 2:
        raise InvalidParameterError("the box constant c must be at least 2")
    return c * (1.0 + sigma * math.sqrt(n * math.log(n)))


def bounding_box_check(ps: PointSet, c: float = DEFAULT_BOX_C, sigma: Optional[float] = None):
    """Return ``(D, inside)``; sigma defaults to the recorded perturbation."""
    if sigma is None:
        if ps.perturbation is None:
            raise InvalidParameterError("sigma is required for point sets without provenance")
        sigma = ps.perturbation.sigma
    D = box_radius(c, sigma, ps.n)
    return D, bool(np.all(np.abs(ps.points) <= D))


# --------------------------------------------------------------------------
# files


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        raise InvalidParameterError("cannot serialize non-finite coordinates")
    return format(float(v), ".17g")


def _fmt_points(points) -> str:
    return "[" + ",".join("[" + ",".join(_fmt(v) for v in row) + "]" for row in points) + "]"


def to_native_json(ps: PointSet) -> str:
    prov = "null"
    if ps.layout is not None:
        lay, spec = ps.provenance
        prov = (
            '{"layout": {"kind": %s, "seed": %s, "points": %s}, "sigma": %s, "seed": %d}'
            % (json.dumps(lay.kind), json.dumps(lay.seed), _fmt_points(lay.points),
               _fmt(spec.sigma), int(spec.seed))
        )
    return '{"d": %d, "n": %d, "points": %s, "provenance": %s}\n' % (
        ps.d, ps.n, _fmt_points(ps.points), prov)


def from_native_json(text: str) -> PointSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno) from None
    for key in ("d", "n", "points"):
        if key not in doc:
            raise ParseError(f"missing key {key!r}", 1)
    pts = np.asarray(doc["points"], dtype=np.float64)
    if pts.shape != (doc["n"], doc["d"]):
        raise ParseError(f"points shape {pts.shape} does not match n={doc['n']}, d={doc['d']}", 1)
    _check_distinct(pts)
    prov = doc.get("provenance")
    if prov is None:
        return PointSet(pts)
    lay = prov["layout"]
    layout = AdversarialLayout(np.asarray(lay["points"], dtype=np.float64), lay["kind"], lay.get("seed"))
    return PointSet(pts, layout, PerturbationSpec(float(prov["sigma"]), int(prov["seed"])))


_HEADER = re.compile(r"^\s*([A-Z_]+)\s*:?\s*(.*?)\s*$")


def from_tsplib(text: str) -> PointSet:
    header = {}
    coords = {}
    in_coords = False
    lines = text.splitlines()
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s:
            continue
        if s == "EOF":
            break
        if in_coords:
            parts = s.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'index x y', got {s!r}", lineno)
            try:
                idx = int(parts[0])
                xy = (float(parts[1]), float(parts[2]))
            except ValueError:
                raise ParseError(f"bad coordinate line {s!r}", lineno) from None
            if idx in coords:
                raise ParseError(f"duplicate node index {idx}", lineno)
            coords[idx] = xy
            continue
        if s.startswith("NODE_COORD_SECTION"):
            if header.get("EDGE_WEIGHT_TYPE", "EUC_2D") != "EUC_2D":
                raise UnsupportedFormatError(
                    f"EDGE_WEIGHT_TYPE {header['EDGE_WEIGHT_TYPE']} is not supported (EUC_2D only)")
            in_coords = True
            continue
        m = _HEADER.match(s)
        if m is None:
            raise ParseError(f"unrecognized line {s!r}", lineno)
        key, val = m.group(1), m.group(2)
        header[key] = val
        if key == "EDGE_WEIGHT_TYPE" and val != "EUC_2D":
            raise UnsupportedFormatError(f"EDGE_WEIGHT_TYPE {val} is not supported (EUC_2D only)")
        if key == "TYPE" and val != "TSP":
            raise UnsupportedFormatError(f"TYPE {val} is not supported (TSP only)")
    if not in_coords:
        raise ParseError("missing NODE_COORD_SECTION", len(lines))
    try:
        n = int(header["DIMENSION"])
    except (KeyError, ValueError):
        raise ParseError("missing or invalid DIMENSION", 1) from None
    if sorted(coords) != list(range(1, n + 1)):
        raise ParseError(f"expected node indices 1..{n}, got {len(coords)} entries", len(lines))
    pts = np.array([coords[i] for i in range(1, n + 1)], dtype=np.float64)
    if np.unique(pts, axis=0).shape[0] != n:
        raise ParseError("duplicate coordinates in NODE_COORD_SECTION", len(lines))
    return PointSet(pts)


def to_tsplib(ps: PointSet, name: str = "instance") -> str:
    if ps.d != 2:
        raise UnsupportedFormatError("TSPLIB EUC_2D output needs d = 2")
    out = [f"NAME : {name}", "TYPE : TSP", f"DIMENSION : {ps.n}",
           "EDGE_WEIGHT_TYPE : EUC_2D", "NODE_COORD_SECTION"]
    out += [f"{i + 1} {_fmt(x)} {_fmt(y)}" for i, (x, y) in enumerate(ps.points)]
    out.append("EOF")
    return "\n".join(out) + "\n"


FORMATS = ("native-json", "tsplib-euc2d")


def save_instance(ps: PointSet, path, format: str = "native-json") -> None:
    if format == "native-json":
        text = to_native_json(ps)
    elif format == "tsplib-euc2d":
        text = to_tsplib(ps, Path(path).stem)
    else:
        raise UnsupportedFormatError(f"unknown instance format {format!r}")
    Path(path).write_text(text)


def load_instance(path, format: str = "native-json") -> PointSet:
    text = Path(path).read_text()
    if format == "native-json":
        return from_native_json(text)
    if format == "tsplib-euc2d":
        return from_tsplib(text)
    raise UnsupportedFormatError(f"unknown instance format {format!r}")
