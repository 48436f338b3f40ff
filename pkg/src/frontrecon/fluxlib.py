"""Flux curves, piecewise-constant coefficients and the scalar queries on them.

A :class:`FluxCurve` bundles an evaluator, its derivative and the domain
``[lo, hi]``.  Three kinds are supported:

``concave``
    strictly concave with ``f(lo) = f(hi) = 0``; has a unique maximizer and
    two monotone branches that can be inverted.
``general``
    piecewise C^1 with finitely many inflection points.
``linear``
    piecewise-linear interpolant of a node list.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import CoefficientError, ConfigError, FluxValidationError, Unattainable

ROOT_TOL = 1e-12
# branch inverses promise a flux residual of 1e-12 * max f, so the state is solved tighter
BRANCH_XTOL = 1e-15
INCREASING = "increasing"
DECREASING = "decreasing"

CONCAVE = "concave"
GENERAL = "general"
LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class FluxCurve:
    f: Callable
    df: Callable
    lo: float
    hi: float
    kind: str = GENERAL
    lip_df: float | None = None
    inflections: tuple = ()
    quadratic: tuple | None = None  # (a, b) for a*u*(b-u)
    nodes: tuple | None = None  # (u, f) arrays for the linear kind
    name: str = ""
    umax: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.hi > self.lo:
            raise FluxValidationError(f"empty flux domain [{self.lo}, {self.hi}]")
        if self.kind == CONCAVE and self.umax is None:
            object.__setattr__(self, "umax", self._find_maximizer())

    # construction ---------------------------------------------------------

    @classmethod
    def quadratic_flux(cls, a: float = 1.0, b: float = 1.0) -> "FluxCurve":
        """``a*u*(b-u)`` on ``[0, b]``."""
        if a <= 0 or b <= 0:
            raise FluxValidationError("quadratic flux needs a > 0 and b > 0")
        return cls(
            f=lambda u: a * u * (b - u),
            df=lambda u: a * (b - 2.0 * u),
            lo=0.0,
            hi=float(b),
            kind=CONCAVE,
            lip_df=2.0 * a,
            quadratic=(float(a), float(b)),
            name=f"{a}*u*({b}-u)",
            umax=b / 2.0,
        )

    @classmethod
    def from_callables(
        cls,
        f: Callable,
        df: Callable,
        lo: float,
        hi: float,
        kind: str = GENERAL,
        lip_df: float | None = None,
        inflections: Sequence[float] = (),
        name: str = "",
        validate: bool = True,
    ) -> "FluxCurve":
        curve = cls(
            f=f,
            df=df,
            lo=float(lo),
            hi=float(hi),
            kind=kind,
            lip_df=lip_df,
            inflections=tuple(sorted(inflections)),
            name=name,
        )
        if validate:
            curve.validate()
        return curve

    @classmethod
    def from_table(cls, u: Sequence[float], fu: Sequence[float], kind: str = GENERAL,
                   name: str = "table") -> "FluxCurve":
        """Monotone-cubic reconstruction of a sampled flux."""
        u = np.asarray(u, dtype=float)
        fu = np.asarray(fu, dtype=float)
        if u.size < 1024:
            raise FluxValidationError(f"flux tables need at least 1024 samples, got {u.size}")
        if np.any(np.diff(u) <= 0):
            raise FluxValidationError("flux table abscissas must be strictly increasing")
        p = PchipInterpolator(u, fu)
        dp = p.derivative()
        d2 = p.derivative(2)
        grid = np.linspace(u[0], u[-1], 4 * u.size)
        return cls.from_callables(
            f=lambda x: p(x)[()],
            df=lambda x: dp(x)[()],
            lo=u[0],
            hi=u[-1],
            kind=kind,
            lip_df=float(np.max(np.abs(d2(grid)))),
            name=name,
        )

    # queries -------------------------------------------------------------

    def __call__(self, u):
        return self.f(u)

    def validate(self, n: int = 2001) -> None:
        grid = np.linspace(self.lo, self.hi, n)
        fv = np.array([self.f(x) for x in grid], dtype=float)
        dv = np.array([self.df(x) for x in grid], dtype=float)
        # small enough that a jump in f'' at a sample point stays under the tolerance
        h = 1e-7 * (self.hi - self.lo)
        inner = grid[1:-1]
        fd = (np.array([self.f(x + h) for x in inner]) - np.array([self.f(x - h) for x in inner])) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(dv))))
        if np.max(np.abs(fd - dv[1:-1])) > 1e-6 * scale and self.kind != LINEAR:
            raise FluxValidationError("derivative does not match finite differences of f")
        if self.kind == CONCAVE:
            fmax = float(np.max(fv))
            if abs(fv[0]) > 1e-12 * fmax or abs(fv[-1]) > 1e-12 * fmax:
                raise FluxValidationError("concave flux must vanish at both domain ends")
            if np.any(fv[1:-1] <= 0):
                raise FluxValidationError("concave flux must be positive inside its domain")
            if np.any(np.diff(dv) >= 0):
                raise FluxValidationError("concave flux derivative must be strictly decreasing")

    @property
    def fmax(self) -> float:
        return float(self.f(self.umax))

    def _find_maximizer(self) -> float:
        if self.quadratic is not None:
            return self.quadratic[1] / 2.0
        if not float(self.df(self.lo)) > 0 > float(self.df(self.hi)):
            raise FluxValidationError("concave flux needs f' > 0 at the left end and f' < 0 at the right end")
        return brentq(self.df, self.lo, self.hi, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps)

    def require_concave(self) -> None:
        if self.kind != CONCAVE:
            raise FluxValidationError(f"operation needs a concave flux, got kind '{self.kind}'")

    def in_domain(self, u: float, tol: float = 1e-12) -> bool:
        return self.lo - tol <= u <= self.hi + tol

    def lax_speed(self, ul: float, ur: float, k: float = 1.0) -> float:
        """Rankine-Hugoniot speed of a jump, or the characteristic speed if the states agree."""
        if ul == ur:
            return k * float(self.df(ul))
        return k * (float(self.f(ur)) - float(self.f(ul))) / (ur - ul)


def maximizer(f: FluxCurve) -> float:
    f.require_concave()
    return f.umax


def branch_inverse(f: FluxCurve, y: float, branch: str) -> float:
    """State on the requested monotone branch with ``f(u) = y``."""
    f.require_concave()
    fm = f.fmax
    tol = 1e-12 * max(fm, 1.0)
    if y < -tol:
        raise ConfigError(f"flux level {y} is negative")
    if y > fm + tol:
        raise Unattainable(f"flux level {y} exceeds the maximum {fm}")
    y = min(max(y, 0.0), fm)
    if branch not in (INCREASING, DECREASING):
        raise ValueError(f"unknown branch '{branch}'")
    if f.quadratic is not None:
        a, b = f.quadratic
        disc = max(b * b - 4.0 * y / a, 0.0)
        r = math.sqrt(disc)
        if branch == INCREASING:
            # stable form of (b - r)/2
            return (2.0 * y / a) / (b + r) if b + r > 0 else b / 2.0
        return (b + r) / 2.0
    if y >= fm:
        return f.umax
    if branch == INCREASING:
        if y <= 0.0:
            return f.lo
        return brentq(lambda u: f.f(u) - y, f.lo, f.umax, xtol=BRANCH_XTOL, rtol=4 * np.finfo(float).eps)
    if y <= 0.0:
        return f.hi
    return brentq(lambda u: f.f(u) - y, f.umax, f.hi, xtol=BRANCH_XTOL, rtol=4 * np.finfo(float).eps)


def branch_of(f: FluxCurve, u: float) -> str:
    return INCREASING if u <= f.umax else DECREASING


def companion(f: FluxCurve, u: float) -> float:
    """The other state with the same flux value."""
    f.require_concave()
    if u == f.umax:
        return u
    other = DECREASING if u < f.umax else INCREASING
    return branch_inverse(f, float(f.f(u)), other)


# ---------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True)
class EnvelopePiece:
    u_lo: float
    u_hi: float
    affine: bool


@dataclass(frozen=True)
class Envelope:
    """Convex (from below) or concave (from above) envelope of a flux on an interval."""

    f: FluxCurve
    kind: str
    pieces: tuple

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        for i, x in np.ndenumerate(u):
            out[i] = self._eval(float(x))
        return out[()] if out.ndim == 0 else out

    def _piece(self, x: float) -> EnvelopePiece:
        for p in self.pieces:
            if x <= p.u_hi:
                return p
        return self.pieces[-1]

    def _eval(self, x: float) -> float:
        p = self._piece(x)
        if not p.affine:
            return float(self.f.f(x))
        fa, fb = float(self.f.f(p.u_lo)), float(self.f.f(p.u_hi))
        return fa + (fb - fa) * (x - p.u_lo) / (p.u_hi - p.u_lo)

    def slope(self, x: float) -> float:
        p = self._piece(x)
        if not p.affine:
            return float(self.f.df(x))
        return (float(self.f.f(p.u_hi)) - float(self.f.f(p.u_lo))) / (p.u_hi - p.u_lo)

    @property
    def contact_arcs(self):
        return [(p.u_lo, p.u_hi) for p in self.pieces if not p.affine]


def _hull_vertices(u: np.ndarray, fu: np.ndarray, lower: bool) -> np.ndarray:
    """Indices of the lower (or upper) hull of sampled points, left to right."""
    sign = 1.0 if lower else -1.0
    pts = []
    for i in range(u.size):
        while len(pts) >= 2:
            i0, i1 = pts[-2], pts[-1]
            cross = (u[i1] - u[i0]) * (sign * fu[i] - sign * fu[i0]) - (sign * fu[i1] - sign * fu[i0]) * (u[i] - u[i0])
            if cross <= 0:
                pts.pop()
            else:
                break
        pts.append(i)
    return np.array(pts)


def envelope(f: FluxCurve, u_lo: float, u_hi: float, kind: str = "convex", n: int = 4097) -> Envelope:
    """Envelope of ``f`` on ``[u_lo, u_hi]``.

    ``kind`` is ``"convex"`` (largest convex minorant) or ``"concave"``
    (smallest concave majorant).  Concave and piecewise-linear fluxes are
    handled exactly; general fluxes use a sampled hull whose tangent points
    are then refined by root finding.
    """
    if not u_hi > u_lo:
        raise ValueError("envelope needs u_lo < u_hi")
    lower = kind == "convex"
    if kind not in ("convex", "concave"):
        raise ValueError(f"unknown envelope kind '{kind}'")

    if f.kind == CONCAVE:
        piece = EnvelopePiece(u_lo, u_hi, affine=lower)
        return Envelope(f, kind, (piece,))

    if f.kind == LINEAR:
        nu, _ = f.nodes
        inner = nu[(nu > u_lo) & (nu < u_hi)]
        u = np.concatenate(([u_lo], inner, [u_hi]))
        fu = np.array([f.f(x) for x in u])
        idx = _hull_vertices(u, fu, lower)
        pieces = tuple(EnvelopePiece(float(u[i]), float(u[j]), True) for i, j in zip(idx[:-1], idx[1:]))
        return Envelope(f, kind, pieces)

    u = np.linspace(u_lo, u_hi, n)
    fu = np.array([f.f(x) for x in u], dtype=float)
    idx = _hull_vertices(u, fu, lower)
    # consecutive hull vertices that are also consecutive samples lie on a contact arc
    raw = []
    for i, j in zip(idx[:-1], idx[1:]):
        affine = j - i > 1
        if raw and raw[-1][2] == affine and not affine:
            raw[-1][1] = j
        else:
            raw.append([i, j, affine])
    # drop affine pieces that are only sampling noise on a contact arc
    merged = []
    for i, j, affine in raw:
        if affine:
            chord = fu[i] + (fu[j] - fu[i]) * (u[i:j + 1] - u[i]) / (u[j] - u[i])
            gap = np.max(np.abs(chord - fu[i:j + 1]))
            if gap < 1e-13 * max(1.0, np.max(np.abs(fu))):
                affine = False
        if merged and merged[-1][2] == affine and not affine:
            merged[-1][1] = j
        else:
            merged.append([i, j, affine])

    ends = [[float(u[i]), float(u[j]), affine] for i, j, affine in merged]
    _refine_tangencies(f, ends, u_lo, u_hi)
    pieces = []
    for a, b, affine in ends:
        if b - a > 0:
            pieces.append(EnvelopePiece(a, b, affine))
    return Envelope(f, kind, tuple(pieces))


def _refine_tangencies(f: FluxCurve, ends: list, u_lo: float, u_hi: float) -> None:
    """Move interior endpoints of affine pieces onto exact tangency points."""
    h = None
    for idx, (a, b, affine) in enumerate(ends):
        if not affine:
            continue
        a_free = a > u_lo
        b_free = b < u_hi
        if h is None:
            h = 2.0 * (u_hi - u_lo) / 4096
        if a_free and not b_free:
            g = lambda s: float(f.df(s)) * (b - s) - (float(f.f(b)) - float(f.f(s)))
            a = _root_near(g, a, h, u_lo, b)
        elif b_free and not a_free:
            g = lambda s: float(f.df(s)) * (s - a) - (float(f.f(s)) - float(f.f(a)))
            b = _root_near(g, b, h, a, u_hi)
        elif a_free and b_free:
            from scipy.optimize import fsolve

            def eqs(z):
                s, t = z
                m = (float(f.f(t)) - float(f.f(s))) / (t - s)
                return [float(f.df(s)) - m, float(f.df(t)) - m]

            a, b = (float(v) for v in fsolve(eqs, [a, b], xtol=1e-14))
        ends[idx][0], ends[idx][1] = a, b
        if idx > 0:
            ends[idx - 1][1] = a
        if idx + 1 < len(ends):
            ends[idx + 1][0] = b


def _root_near(g, x0: float, h: float, lo: float, hi: float) -> float:
    a, b = max(lo, x0 - h), min(hi, x0 + h)
    ga, gb = g(a), g(b)
    grow = h
    while ga * gb > 0 and (a > lo or b < hi):
        grow *= 2
        a, b = max(lo, x0 - grow), min(hi, x0 + grow)
        ga, gb = g(a), g(b)
    if ga * gb > 0:
        return x0
    return brentq(g, a, b, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# piecewise-linear fluxes


def interpolate_nodes(nodes, name: str = "interpolant") -> FluxCurve:
    pts = sorted((float(x), float(y)) for x, y in nodes)
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if xs.size < 2:
        raise ConfigError("need at least two nodes")
    if np.any(np.diff(xs) <= 0):
        raise ConfigError("node abscissas must be distinct")
    slopes = np.diff(ys) / np.diff(xs)

    def f(u):
        return np.interp(u, xs, ys)[()]

    def df(u):
        i = np.clip(np.searchsorted(xs, u, side="right") - 1, 0, slopes.size - 1)
        return slopes[i][()]

    return FluxCurve(
        f=f,
        df=df,
        lo=float(xs[0]),
        hi=float(xs[-1]),
        kind=LINEAR,
        lip_df=None,
        nodes=(xs, ys),
        name=name,
    )


def sample_nodes(f: FluxCurve, u: Sequence[float]) -> FluxCurve:
    u = np.asarray(u, dtype=float)
    return interpolate_nodes(zip(u, [float(f.f(x)) for x in u]), name=f"{f.name} interpolant")


def lip_of_difference(f: FluxCurve, g: FluxCurve, n: int = 1 << 13) -> float:
    """Upper estimate of the Lipschitz constant of ``f - g``."""
    lo, hi = max(f.lo, g.lo), min(f.hi, g.hi)
    if f.kind == LINEAR and g.kind == LINEAR:
        xs = np.union1d(f.nodes[0], g.nodes[0])
        xs = xs[(xs >= lo) & (xs <= hi)]
        mids = 0.5 * (xs[:-1] + xs[1:])
        return float(np.max(np.abs(f.df(mids) - g.df(mids)))) if mids.size else 0.0

    def sup_on(m):
        x = np.linspace(lo, hi, m + 1)
        x = 0.5 * (x[:-1] + x[1:])
        d = np.array([float(f.df(v)) - float(g.df(v)) for v in x])
        return float(np.max(np.abs(d)))

    coarse, fine = sup_on(n // 2), sup_on(n)
    return fine + abs(fine - coarse)


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True, eq=False)
class SpatialCoeff:
    """Piecewise-constant positive coefficient with finitely many jumps."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = tuple(float(x) for x in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(bp) + 1:
            raise CoefficientError("need exactly one more value than breakpoints")
        if any(v <= 0 for v in vals):
            raise CoefficientError("coefficient values must be positive")
        if any(b >= c for b, c in zip(bp, bp[1:])):
            raise CoefficientError("breakpoints must be strictly increasing")
        if any(v == w for v, w in zip(vals, vals[1:])):
            raise CoefficientError("adjacent coefficient values must differ")

    @classmethod
    def constant(cls, value: float) -> "SpatialCoeff":
        return cls((), (value,))

    @classmethod
    def from_cells(cls, breakpoints, values) -> "SpatialCoeff":
        """Build a coefficient, merging equal neighbouring cells."""
        bp, vals = [], [float(values[0])]
        for x, v in zip(breakpoints, values[1:]):
            if float(v) == vals[-1]:
                continue
            bp.append(float(x))
            vals.append(float(v))
        return cls(tuple(bp), tuple(vals))

    def __call__(self, x: float, side: str = "right") -> float:
        i = np.searchsorted(self.breakpoints, x, side=side)
        return self.values[int(i)]

    def left(self, x: float) -> float:
        return self(x, side="left")

    def right(self, x: float) -> float:
        return self(x, side="right")

    @property
    def kmax(self) -> float:
        return max(self.values)

    def restrict(self, lo: float, hi: float) -> "SpatialCoeff":
        inside = [i for i, x in enumerate(self.breakpoints) if lo < x < hi]
        if not inside:
            return SpatialCoeff.constant(self(0.5 * (lo + hi)))
        bp = [self.breakpoints[i] for i in inside]
        vals = [self.values[inside[0]]] + [self.values[i + 1] for i in inside]
        return SpatialCoeff(tuple(bp), tuple(vals))


@dataclass(frozen=True)
class Obstruction:
    """Coefficient ``k1`` on ``[xi1, xi2]`` inside ambient ``k_o``, hidden in ``(a, b)``."""

    k1: float
    xi1: float
    xi2: float
    k_o: float = 1.0
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not 0 < self.k1 < self.k_o:
            raise CoefficientError("obstruction needs 0 < k1 < k_o")
        if not self.a <= self.xi1 < self.xi2 <= self.b:
            raise CoefficientError("obstruction needs a <= xi1 < xi2 <= b")

    def coefficient(self) -> SpatialCoeff:
        return SpatialCoeff((self.xi1, self.xi2), (self.k_o, self.k1, self.k_o))

    @property
    def width(self) -> float:
        return self.xi2 - self.xi1


# ---------------------------------------------------------------------------
# flux tables


def read_flux_csv(path, kind: str = GENERAL) -> FluxCurve:
    us, fs = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames[:2]] != ["u", "f"]:
            raise ConfigError(f"{path}: flux table header must be 'u,f'")
        for row in reader:
            us.append(float(row["u"]))
            fs.append(float(row["f"]))
    return FluxCurve.from_table(us, fs, kind=kind, name=str(path))


def write_flux_csv(path, u: Sequence[float], fu: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "f"])
        for x, y in zip(u, fu):
            w.writerow([f"{float(x):.17g}", f"{float(y):.17g}"])
