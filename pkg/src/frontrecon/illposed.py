"""Coefficient families that look alike from outside the window.

A coefficient equal to ``k_o`` outside a run of spans ``(chi_i, k_i)``
starting at ``xi_start`` is summarized by its transit sum
``sum chi_i / k_i``.  Every generator here keeps the total support inside
``[a, b]`` and that sum unchanged.  :func:`indistinguishable` measures how
far apart the traces at the window edges really are.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fluxlib import INCREASING, FluxCurve, SpatialCoeff, branch_inverse
from .fronttrack import Profile, Scenario
from .observe import Observer


@dataclass(frozen=True)
class SpanCoefficient:
    """``k_o`` outside ``(xi_start, xi_start + sum chi)``, ``k_i`` on consecutive spans of length ``chi_i``."""

    xi_start: float
    chis: tuple
    ks: tuple
    k_o: float = 1.0

    def __post_init__(self):
        if len(self.chis) != len(self.ks) or not self.chis:
            raise ConfigError("need one coefficient value per span")
        if any(c <= 0 for c in self.chis):
            raise ConfigError("span lengths must be positive")
        if any(not 0 < k for k in self.ks) or not self.k_o > 0:
            raise ConfigError("coefficient values must be positive")

    @property
    def end(self) -> float:
        return self.xi_start + sum(self.chis)

    @property
    def breakpoints(self) -> list:
        return list(self.xi_start + np.concatenate(([0.0], np.cumsum(self.chis))))

    def coefficient(self) -> SpatialCoeff:
        return SpatialCoeff(tuple(self.breakpoints), (self.k_o,) + tuple(self.ks) + (self.k_o,))

    def transit_sum(self) -> float:
        return float(sum(c / k for c, k in zip(self.chis, self.ks)))

    def check_window(self, a: float, b: float) -> None:
        if self.xi_start < a - 1e-15 or self.end > b + 1e-12:
            raise ConfigError(f"support [{self.xi_start}, {self.end}] leaves the window [{a}, {b}]")


def transit_sum_exact(chis, ks) -> Fraction:
    """Transit sum in rational arithmetic from the decimal representations of the inputs."""
    return sum((Fraction(c) / Fraction(k) for c, k in zip(chis, ks)), Fraction(0))


def refracted_transit_time(f: FluxCurve, coeff: SpanCoefficient, q: float, length: float) -> float:
    """Time a state carrying flux ``q`` needs to cross ``[xi_start, xi_start + length]``.

    Inside span ``i`` the state solves ``k_i f(w) = q`` on the increasing
    branch and moves at ``k_i f'(w)``; the rest of the distance is covered at
    ``k_o`` speed.
    """
    w_o = branch_inverse(f, q / coeff.k_o, INCREASING)
    t = (length - sum(coeff.chis)) / (coeff.k_o * float(f.df(w_o)))
    for c, k in zip(coeff.chis, coeff.ks):
        if q > k * f.fmax:
            return math.inf
        w = branch_inverse(f, q / k, INCREASING)
        t += c / (k * float(f.df(w)))
    return t


# ---------------------------------------------------------------------------
# generators


def widen(base: SpanCoefficient, eps: float, window: tuple | None = None) -> SpanCoefficient:
    """Stretch the last of two spans by ``eps`` at a value between ``k_2`` and ``k_o``."""
    if len(base.ks) != 2:
        raise ConfigError("widening acts on a two-span obstruction")
    if eps < 0:
        raise ConfigError("eps must be nonnegative")
    (c1, c2), (k1, k2), ko = base.chis, base.ks, base.k_o
    if not 0 < k1 < k2 < ko:
        raise ConfigError("widening needs 0 < k1 < k2 < k_o")
    if eps == 0:
        return base
    k_eps = (c2 + eps) / (c2 / k2 + eps / ko)
    out = SpanCoefficient(base.xi_start, (c1, c2 + eps), (k1, k_eps), ko)
    if window is not None:
        out.check_window(*window)
    return out


def shift(base: SpanCoefficient, rho: float) -> SpanCoefficient:
    """Move the inner breakpoint left by ``rho``; the total support is unchanged."""
    if len(base.ks) != 2:
        raise ConfigError("shifting acts on a two-span obstruction")
    (c1, c2), (k1, k2), ko = base.chis, base.ks, base.k_o
    if not 0 < k1 < k2 < ko:
        raise ConfigError("shifting needs 0 < k1 < k2 < k_o")
    if not 0 <= rho < c1:
        raise ConfigError(f"rho must lie in [0, {c1})")
    if rho == 0:
        return base
    k_rho = (c2 + rho) / (c2 / k2 + rho / k1)
    return SpanCoefficient(base.xi_start, (c1 - rho, c2 + rho), (k1, k_rho), ko)


def harmonic_value(chis, ks) -> float:
    """Single value over the union of spans with the same transit sum."""
    return float(sum(chis) / sum(c / k for c, k in zip(chis, ks)))


@dataclass(frozen=True)
class MergeFamily:
    base: SpanCoefficient
    ell: float
    merged: SpanCoefficient  # k1 then ell
    ell_prime: float
    collapsed: SpanCoefficient  # a single span at ell_prime

    def member(self, eps: float, k_hat: float) -> SpanCoefficient:
        """Move ``eps`` from the second span to the third; ``k_hat`` on the shortened span."""
        (c1, c2, c3), (k1, k2, k3) = self.base.chis, self.base.ks
        if not 0 <= eps < c2:
            raise ConfigError(f"eps must lie in [0, {c2})")
        rest = c2 / k2 + c3 / k3 - (c2 - eps) / k_hat
        if not rest > 0:
            raise ConfigError("k_hat too small: no positive value left for the widened span")
        k_tilde = (c3 + eps) / rest
        return SpanCoefficient(self.base.xi_start, (c1, c2 - eps, c3 + eps), (k1, k_hat, k_tilde), self.base.k_o)


def merge(base: SpanCoefficient) -> MergeFamily:
    if len(base.ks) != 3:
        raise ConfigError("merging acts on a three-span obstruction")
    (c1, c2, c3), (k1, k2, k3), ko = base.chis, base.ks, base.k_o
    if not 0 < k1 < k2 < k3 < ko:
        raise ConfigError("merging needs 0 < k1 < k2 < k3 < k_o")
    ell = harmonic_value((c2, c3), (k2, k3))
    merged = SpanCoefficient(base.xi_start, (c1, c2 + c3), (k1, ell), ko)
    ell_p = harmonic_value((c1, c2 + c3), (k1, ell))
    collapsed = SpanCoefficient(base.xi_start, (c1 + c2 + c3,), (ell_p,), ko)
    return MergeFamily(base, ell, merged, ell_p, collapsed)


def swap(base: SpanCoefficient) -> SpanCoefficient:
    """Exchange the second and third spans together with their values."""
    if len(base.ks) != 3:
        raise ConfigError("swapping acts on a three-span obstruction")
    (c1, c2, c3), (k1, k2, k3) = base.chis, base.ks
    return SpanCoefficient(base.xi_start, (c1, c3, c2), (k1, k3, k2), base.k_o)


# ---------------------------------------------------------------------------
# numerical comparison


def sup_distance(A, B, side: str = "left") -> float:
    """Largest pointwise gap between two traces."""
    pts = np.union1d(A.times, B.times)
    T = min(A.T, B.T)
    pts = np.concatenate(([0.0], pts[(pts > 0) & (pts < T)], [T]))
    mids = 0.5 * (pts[:-1] + pts[1:])
    a = (A.left if side == "left" else A.right)[np.searchsorted(A.times, mids, side="right")]
    b = (B.left if side == "left" else B.right)[np.searchsorted(B.times, mids, side="right")]
    return float(np.max(np.abs(a - b)))


@dataclass
class Comparison:
    deviation: float  # largest mean absolute trace gap over [0, T]
    per_edge: dict
    delta: float
    T: float
    sup_deviation: float = 0.0

    def within(self, factor: float = 5.0) -> bool:
        return self.deviation <= factor * self.delta


def probe_data(f: FluxCurve, a: float, left_state: float, x_left: float | None = None) -> Profile:
    """``left_state`` on ``(x_left, a)``, ``u1`` elsewhere: a fan enters the empty window from ``a``."""
    u1 = f.lo
    if x_left is None:
        return Profile(np.array([a]), np.array([left_state, u1]))
    return Profile(np.array([x_left, a]), np.array([u1, left_state, u1]))


def indistinguishable(f: FluxCurve, A: SpatialCoeff, B: SpatialCoeff, window: tuple, initial: Profile,
                      T: float, delta: float, factor: float = 5.0) -> tuple:
    """Simulate both coefficients and compare the traces at both window edges.

    Returns ``(within, comparison)`` where ``within`` tests the deviation
    against ``factor * delta``.
    """
    a, b = window
    runs = [Observer(Scenario(f, k, initial, delta, T), mode="partial", window=(a, b)) for k in (A, B)]
    per, sup = {}, 0.0
    for x in (a, b):
        for side in ("left", "right"):
            ta, tb = runs[0].trace(x), runs[1].trace(x)
            per[(x, side)] = ta.l1_distance(tb, side) / T
            sup = max(sup, sup_distance(ta, tb, side))
    cmp = Comparison(max(per.values()), per, delta, T, sup)
    return cmp.within(factor), cmp


# ---------------------------------------------------------------------------
# export


def write_certificate(path, members: dict) -> None:
    """One line per member: name, breakpoints, values, transit sum (float and exact)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["member", "breakpoints", "values", "transit_sum", "transit_sum_exact"])
        for name, m in members.items():
            w.writerow([name, " ".join(f"{x:.17g}" for x in m.breakpoints),
                        " ".join(f"{k:.17g}" for k in m.ks),
                        f"{m.transit_sum():.17g}", str(transit_sum_exact(m.chis, m.ks))])


def export_family(out_dir, members: dict) -> list:
    from .recon_k import write_coefficient_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, m in members.items():
        p = out / f"{name}.csv"
        write_coefficient_csv(p, m.coefficient())
        paths.append(p)
    cert = out / "certificate.csv"
    write_certificate(cert, members)
    paths.append(cert)
    return paths
