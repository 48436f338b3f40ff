"""Exact Riemann solvers.

``solve_homogeneous`` handles a constant coefficient and any flux kind via
convex/concave envelopes.  ``solve_two_k`` handles a coefficient jump at
``x = 0`` for concave fluxes, selecting the stationary jump with the
smallest-jump entropy rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .fluxlib import (
    CONCAVE,
    DECREASING,
    INCREASING,
    FluxCurve,
    branch_inverse,
    envelope,
)
from .errors import Unattainable

ZERO_STRENGTH = 1e-14
DISPATCH_TOL = 1e-12


@dataclass(frozen=True)
class Shock:
    u_left: float
    u_right: float
    speed: float
    k: float

    @property
    def head(self) -> float:
        return self.speed

    @property
    def tail(self) -> float:
        return self.speed


@dataclass(frozen=True, eq=False)
class Rarefaction:
    """Centered fan at coefficient ``k`` between ``u_left`` and ``u_right``."""

    u_left: float
    u_right: float
    k: float
    f: FluxCurve

    @property
    def tail(self) -> float:
        return self.k * float(self.f.df(self.u_left))

    @property
    def head(self) -> float:
        return self.k * float(self.f.df(self.u_right))

    def speed_fn(self, u: float) -> float:
        return self.k * float(self.f.df(u))

    def state_at(self, xi: float) -> float:
        """State on the fan where the characteristic speed equals ``xi``."""
        if xi <= self.tail:
            return self.u_left
        if xi >= self.head:
            return self.u_right
        if self.f.quadratic is not None:
            a, b = self.f.quadratic
            return 0.5 * (b - xi / (self.k * a))
        lo, hi = sorted((self.u_left, self.u_right))
        return brentq(lambda u: self.k * float(self.f.df(u)) - xi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class KWave:
    k_left: float
    k_right: float
    u_left: float
    u_right: float
    speed: float = 0.0

    @property
    def head(self) -> float:
        return 0.0

    @property
    def tail(self) -> float:
        return 0.0


Wave = Union[Shock, Rarefaction, KWave]


@dataclass(frozen=True, eq=False)
class WaveFan:
    f: FluxCurve
    k_left: float
    u_left: float
    k_right: float
    u_right: float
    waves: tuple
    case: str = ""

    def sample(self, xi: float, side: str = "left") -> float:
        """State at ``x/t = xi``; on a jump return the requested one-sided limit."""
        u = self.u_left
        for w in self.waves:
            if isinstance(w, Rarefaction):
                if xi < w.tail:
                    return u
                if xi < w.head or (xi == w.head and side == "left"):
                    return w.state_at(xi)
                u = w.u_right
                continue
            s = w.speed
            if xi < s or (xi == s and side == "left"):
                return u
            u = w.u_right
        return u

    def sample_xt(self, x: float, t: float, side: str = "left") -> float:
        if t <= 0:
            return self.u_left if x < 0 or (x == 0 and side == "left") else self.u_right
        return self.sample(x / t, side)

    def coefficient_at(self, xi: float) -> float:
        if self.k_left == self.k_right:
            return self.k_left
        return self.k_left if xi < 0 else self.k_right

    def states(self):
        out = [self.u_left]
        for w in self.waves:
            out.append(w.u_right)
        return out


# ---------------------------------------------------------------------------


def _drop_weak(waves):
    kept = []
    for w in waves:
        if isinstance(w, KWave):
            kept.append(w)
        elif abs(w.u_right - w.u_left) >= ZERO_STRENGTH:
            kept.append(w)
    return kept


def _homogeneous_waves(f: FluxCurve, k: float, ul: float, ur: float):
    if abs(ur - ul) < ZERO_STRENGTH:
        return []
    if f.kind == CONCAVE:
        if ul < ur:
            return [Shock(ul, ur, f.lax_speed(ul, ur, k), k)]
        return [Rarefaction(ul, ur, k, f)]
    if ul < ur:
        env = envelope(f, ul, ur, "convex")
        pieces = list(env.pieces)
    else:
        env = envelope(f, ur, ul, "concave")
        pieces = list(reversed(env.pieces))
    waves = []
    for p in pieces:
        a, b = (p.u_lo, p.u_hi) if ul < ur else (p.u_hi, p.u_lo)
        if p.affine:
            waves.append(Shock(a, b, f.lax_speed(a, b, k), k))
        else:
            waves.append(Rarefaction(a, b, k, f))
    return waves


def solve_homogeneous(f: FluxCurve, k: float, u_left: float, u_right: float) -> WaveFan:
    waves = _drop_weak(_homogeneous_waves(f, k, u_left, u_right))
    return WaveFan(f, k, u_left, k, u_right, tuple(waves), case="homogeneous")


def stationary_pairs(f: FluxCurve, k_left: float, k_right: float, u: float, side: str = "given-left"):
    """Partner states across a coefficient jump with matching ``k f``.

    Returns a dict ``{branch: state}`` (at most two entries, one if the level
    equals the partner's maximum).  An empty dict means the level cannot be
    reached on the other side.
    """
    f.require_concave()
    if side == "given-left":
        level, k_other = k_left * float(f.f(u)), k_right
    elif side == "given-right":
        level, k_other = k_right * float(f.f(u)), k_left
    else:
        raise ValueError(f"unknown side '{side}'")
    y = level / k_other
    if y > f.fmax * (1 + 1e-12):
        return {}
    inc = branch_inverse(f, y, INCREASING)
    dec = branch_inverse(f, y, DECREASING)
    if inc == dec:
        return {INCREASING: inc}
    return {INCREASING: inc, DECREASING: dec}


def _gt(a: float, b: float) -> bool:
    return a > b + DISPATCH_TOL


def _ge(a: float, b: float) -> bool:
    return a >= b - DISPATCH_TOL


def _inc(f, y):
    return branch_inverse(f, y, INCREASING)


def _dec(f, y):
    return branch_inverse(f, y, DECREASING)


def solve_two_k(f: FluxCurve, k_left: float, u_left: float, k_right: float, u_right: float) -> WaveFan:
    """Riemann problem across a coefficient jump at ``x = 0``."""
    if k_left == k_right:
        return solve_homogeneous(f, k_left, u_left, u_right)
    f.require_concave()
    kl, ul, kr, ur = float(k_left), float(u_left), float(k_right), float(u_right)
    um, fm = f.umax, f.fmax
    Fl, Fr = kl * float(f.f(ul)), kr * float(f.f(ur))

    def hom(k, a, b):
        return _homogeneous_waves(f, k, a, b)

    if kl < kr and ul <= um:
        if ur <= um or Fl < Fr - DISPATCH_TOL:
            v = _inc(f, Fl / kr)
            waves = [KWave(kl, kr, ul, v)] + hom(kr, v, ur)
            case = "1a"
        else:
            w = _dec(f, Fr / kl)
            waves = hom(kl, ul, w) + [KWave(kl, kr, w, ur)]
            case = "1b"
    elif kl < kr:
        if ur <= um or _gt(Fr, kl * fm):
            v1 = _inc(f, kl * fm / kr)
            waves = hom(kl, ul, um) + [KWave(kl, kr, um, v1)] + hom(kr, v1, ur)
            case = "2a"
        else:
            w1 = _dec(f, Fr / kl)
            waves = hom(kl, ul, w1) + [KWave(kl, kr, w1, ur)]
            case = "2b"
    elif ur <= um:
        if ul >= um or _gt(Fl, kr * fm):
            v2 = _dec(f, kr * fm / kl)
            waves = hom(kl, ul, v2) + [KWave(kl, kr, v2, um)] + hom(kr, um, ur)
            case = "3a"
        else:
            w2 = _inc(f, Fl / kr)
            waves = [KWave(kl, kr, ul, w2)] + hom(kr, w2, ur)
            case = "3b"
    else:
        if ul >= um or _ge(Fl, Fr):
            v3 = _dec(f, Fr / kl)
            waves = hom(kl, ul, v3) + [KWave(kl, kr, v3, ur)]
            case = "4a"
        else:
            w3 = _inc(f, Fl / kr)
            waves = [KWave(kl, kr, ul, w3)] + hom(kr, w3, ur)
            case = "4b"
    return WaveFan(f, kl, ul, kr, ur, tuple(_drop_weak(waves)), case=case)


def solve(f: FluxCurve, k_left: float, u_left: float, k_right: float, u_right: float) -> WaveFan:
    if k_left == k_right:
        return solve_homogeneous(f, k_left, u_left, u_right)
    return solve_two_k(f, k_left, u_left, k_right, u_right)


# ---------------------------------------------------------------------------
# diagnostics used by the property suite


def rh_residual(f: FluxCurve, w: Wave) -> float:
    if isinstance(w, Shock):
        return abs(w.speed * (w.u_right - w.u_left) - w.k * (float(f.f(w.u_right)) - float(f.f(w.u_left))))
    if isinstance(w, KWave):
        return abs(w.k_left * float(f.f(w.u_left)) - w.k_right * float(f.f(w.u_right)))
    return 0.0


def smallest_jump_gap(f: FluxCurve, w: KWave) -> float:
    """How much the selected pair exceeds the best alternative (<= 0 when admissible).

    The pair is checked holding either side fixed; the rule is satisfied if
    it holds in at least one direction.
    """
    best = np.inf
    jump = abs(w.u_right - w.u_left)
    for side, fixed in (("given-left", w.u_left), ("given-right", w.u_right)):
        partners = stationary_pairs(f, w.k_left, w.k_right, fixed, side)
        if not partners:
            continue
        closest = min(abs(p - fixed) for p in partners.values())
        best = min(best, jump - closest)
    return best


def check_fan(fan: WaveFan, tol: float = 1e-12) -> list:
    """List of invariant violations (empty when the fan is well formed)."""
    f = fan.f
    problems = []
    u, k = fan.u_left, fan.k_left
    last = -np.inf
    for w in fan.waves:
        if abs(w.u_left - u) > tol:
            problems.append(f"state chain broken at {w}")
        if w.tail < last - 1e-12:
            problems.append(f"speeds not ordered at {w}")
        last = w.head
        if isinstance(w, KWave):
            if w.k_left != k:
                problems.append("coefficient chain broken")
            k = w.k_right
            scale = max(1.0, w.k_left * f.fmax)
            if rh_residual(f, w) > tol * scale:
                problems.append(f"stationary flux mismatch {rh_residual(f, w)}")
            if smallest_jump_gap(f, w) > 1e-10:
                problems.append(f"smallest-jump rule violated at {w}")
            if w.speed != 0.0:
                problems.append("k-wave must be stationary")
        else:
            if w.k != k:
                problems.append(f"wave at wrong coefficient {w}")
            if isinstance(w, Shock):
                if rh_residual(f, w) > tol * max(1.0, abs(w.u_right - w.u_left)):
                    problems.append(f"RH residual {rh_residual(f, w)}")
                if f.kind == CONCAVE and not w.u_left < w.u_right:
                    problems.append(f"non-entropic shock {w}")
        u = w.u_right
    if abs(u - fan.u_right) > tol:
        problems.append("fan does not end at the right state")
    if k != fan.k_right:
        problems.append("fan does not end at the right coefficient")
    return problems
