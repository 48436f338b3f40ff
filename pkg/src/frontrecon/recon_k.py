"""Recover a piecewise-constant coefficient from full observations at small times.

A constant probe state ``u_probe`` in ``(lo, umax)`` is placed on an
interval ``I`` that contains the target window ``J`` with a margin larger
than the distance any wave can travel before ``T``.  Every coefficient jump
then emits its own Riemann fan.  Before these fans interact, the jumps are
the stationary discontinuities of the solution; the flux balance across
each of them fixes the ratio of neighbouring coefficient values, and one
moving wave fixes the scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InconsistentObservation
from .fluxlib import FluxCurve, SpatialCoeff
from .fronttrack import Profile, Scenario
from .observe import Observer, detect_stationary_jumps

STATE_TOL = 1e-11


@dataclass(frozen=True)
class Probe:
    interval: tuple
    state: float
    profile: Profile
    speed_bound: float


def design_probe(J: tuple, T: float, f: FluxCurve, u_probe: float | None = None, k_bound: float = 1.0) -> Probe:
    f.require_concave()
    if u_probe is None:
        u_probe = 0.5 * (f.lo + f.umax)
    if not f.lo < u_probe < f.umax:
        raise ConfigError(f"probe state {u_probe} must lie strictly between {f.lo} and {f.umax}")
    grid = np.linspace(f.lo, f.hi, 2049)
    lam = k_bound * float(np.max(np.abs([f.df(u) for u in grid])))
    lo, hi = min(J) - lam * T, max(J) + lam * T
    prof = Profile(np.array([lo, hi]), np.array([f.lo, u_probe, f.lo]))
    return Probe((lo, hi), float(u_probe), prof, lam)


def choose_pre_interaction_time(o: Observer, J: tuple | None = None) -> float:
    """Half of the first collision time of the run, capped at the horizon."""
    fs = o.front_set
    t_first = fs.min_collision_time
    return min(0.5 * t_first, o.T)


def _front_with_states(jumps, ul, ur, lo, hi, tol=STATE_TOL):
    """Position of the front with states ``(ul, ur)`` inside ``[lo, hi]`` closest to ``hi``."""
    best = None
    for x, a, b in jumps:
        if lo <= x <= hi and abs(a - ul) <= tol and abs(b - ur) <= tol:
            if best is None or abs(hi - x) < abs(hi - best):
                best = x
    return best


def anchor_last_kappa(o: Observer, x_M: float, tau: float, u_probe: float, right_edge: float | None = None) -> float:
    """Coefficient to the right of the last stationary jump, from the speed of its forward wave.

    With ``x_M = None`` the fan at the right edge of the probe interval is
    used instead.
    """
    f = o.f
    if x_M is not None:
        jumps = [j for j in o.jumps(tau) if j[0] > x_M + 1e-12 * max(1.0, abs(x_M))]
        origin = x_M
        # the first front whose right state is the probe plateau closes the fan
        sel = next((j for j in jumps if abs(j[2] - u_probe) <= STATE_TOL), None)
        if sel is None:
            raise InconsistentObservation(f"no forward wave to the right of x={x_M} before t={tau}")
        y, u_minus, _ = sel
        other = u_minus
    else:
        if right_edge is None:
            raise ConfigError("anchoring without jumps needs the probe interval")
        jumps = [j for j in o.jumps(tau) if j[0] >= right_edge]
        sel = next((j for j in jumps if abs(j[1] - u_probe) <= STATE_TOL and j[2] < j[1]), None)
        if sel is None:
            raise InconsistentObservation("no fan at the right edge of the probe interval")
        y, _, other = sel
        origin = right_edge
    # measured speed: difference the same front at tau/2 and tau
    early = o.jumps(0.5 * tau)
    ul, ur = (other, u_probe) if x_M is not None else (u_probe, other)
    y_half = _front_with_states(early, ul, ur, min(origin, y), max(origin, y))
    sigma = (y - y_half) / (0.5 * tau) if y_half is not None else (y - origin) / tau
    if abs(other - u_probe) <= STATE_TOL:
        return sigma / float(f.df(u_probe))
    return sigma * (u_probe - other) / (float(f.f(u_probe)) - float(f.f(other)))


def recover_kappa_chain(o: Observer, jumps_at: list, tau: float, anchor: float) -> tuple:
    """Solve ``kappa[i-1] f(u(x_i-)) = kappa[i] f(u(x_i+))`` from right to left.

    Returns ``(values, residuals)`` with one value per cell.
    """
    f = o.f
    kappa = [anchor]
    states = []
    for x in reversed(jumps_at):
        um, up = o.limits(tau, x)
        fm_, fp_ = float(f.f(um)), float(f.f(up))
        if fm_ <= STATE_TOL or fp_ <= STATE_TOL:
            raise ConfigError(f"vanishing flux next to the jump at x={x}; the probe state is too small")
        kappa.append(kappa[-1] * fp_ / fm_)
        states.append((um, up))
    kappa.reverse()
    states.reverse()
    residuals = [abs(kappa[i] * float(f.f(um)) - kappa[i + 1] * float(f.f(up))) for i, (um, up) in enumerate(states)]
    return kappa, residuals


@dataclass
class CoefficientReport:
    coefficient: SpatialCoeff
    jumps: list
    values: list
    tau: float
    anchor: float
    residuals: list
    probe: Probe | None = None
    window: tuple | None = None
    notes: list = field(default_factory=list)

    def on_window(self) -> SpatialCoeff:
        lo, hi = self.window
        return self.coefficient.restrict(lo, hi)


def reconstruct_coefficient(o: Observer, J: tuple, probe: Probe) -> CoefficientReport:
    """Full pipeline on an observer already running the probe data."""
    if o.mode != "full":
        raise ConfigError("coefficient recovery needs full observations")
    tau = choose_pre_interaction_time(o, J)
    lo, hi = probe.interval
    S = detect_stationary_jumps(o, 0.5 * tau, tau, (lo, hi))
    if S:
        anchor = anchor_last_kappa(o, S[-1], tau, probe.state)
    else:
        anchor = anchor_last_kappa(o, None, tau, probe.state, right_edge=hi)
    values, residuals = recover_kappa_chain(o, S, tau, anchor)
    coeff = SpatialCoeff(tuple(S), tuple(values))
    return CoefficientReport(coeff, list(S), list(values), tau, anchor, residuals, probe, tuple(J))


def write_coefficient_csv(path, coeff: SpatialCoeff) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_break", "k_value"])
        w.writerow(["-inf", f"{coeff.values[0]:.17g}"])
        for x, v in zip(coeff.breakpoints, coeff.values[1:]):
            w.writerow([f"{x:.17g}", f"{v:.17g}"])


def read_coefficient_csv(path) -> SpatialCoeff:
    bps, vals = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if row["x_break"].strip() != "-inf":
                bps.append(float(row["x_break"]))
            vals.append(float(row["k_value"]))
    return SpatialCoeff(tuple(bps), tuple(vals))
