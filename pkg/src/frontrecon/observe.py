"""Observation oracles over a completed front-tracking run.

An :class:`Observer` answers snapshot, point and trace queries.  In partial
mode every query touching the open window ``(a, b)`` raises
:class:`AccessViolation`; the window edges themselves are observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AccessViolation, HorizonTooShort
from .fronttrack import POS_TOL, History, ObservationTrace, Profile, Scenario, exact_trace, simulate


@dataclass(frozen=True)
class WaveArrival:
    x: float
    time: float
    before: float  # trace value just before the arrival
    after: float  # trace value just after
    u_left: float  # spatial left state of the arriving front
    u_right: float
    speed: float
    kind: str  # "shock" or "rarefaction"


@dataclass(frozen=True)
class MaskedProfile:
    """A snapshot with the window ``(a, b)`` withheld."""

    profile: Profile
    a: float
    b: float

    def __call__(self, x: float, side: str = "right") -> float:
        if self.a < x < self.b:
            raise AccessViolation(f"x={x} lies in the unobservable window ({self.a}, {self.b})")
        return self.profile(x, side)

    def jumps(self) -> list:
        p = self.profile
        out = []
        for i, x in enumerate(p.breakpoints):
            if self.a < x < self.b:
                continue
            out.append((float(x), float(p.values[i]), float(p.values[i + 1])))
        return out


class Observer:
    def __init__(self, scenario: Scenario, mode: str = "full", window: tuple | None = None,
                 T: float | None = None, dt: float | None = None):
        if mode not in ("full", "partial"):
            raise ValueError(f"unknown observer mode '{mode}'")
        if mode == "partial" and window is None:
            raise ValueError("partial observers need a window (a, b)")
        self.scenario = scenario
        self.mode = mode
        self.window = tuple(float(v) for v in window) if window is not None else None
        self.T = float(scenario.T if T is None else T)
        self.dt = self.T / 1e4 if dt is None else dt
        self._fs = None
        self._hist = None
        self._traces = {}

    # lazily evolve the hidden solution
    @property
    def history(self) -> History:
        if self._hist is None:
            self._fs = simulate(self.scenario, self.T)
            self._hist = History(self._fs)
        return self._hist

    @property
    def front_set(self):
        self.history
        return self._fs

    @property
    def f(self):
        return self.scenario.f

    def _check(self, x: float) -> None:
        if self.mode == "partial":
            a, b = self.window
            if a < x < b:
                raise AccessViolation(f"x={x} lies in the unobservable window ({a}, {b})")

    def _check_time(self, t: float) -> None:
        if t < 0 or t > self.T * (1 + 1e-14):
            raise HorizonTooShort(f"time {t} outside the observation horizon [0, {self.T}]")

    def snapshot(self, t: float):
        self._check_time(t)
        p = self.history.profile(t)
        if self.mode == "partial":
            return MaskedProfile(p, *self.window)
        return p

    def jumps(self, t: float, lo: float = -math.inf, hi: float = math.inf) -> list:
        """Observable fronts ``(x, u_left, u_right)`` at time ``t`` inside ``[lo, hi]``."""
        self._check_time(t)
        out = []
        for x, ul, ur, _ in self.history.jumps(t):
            if not lo <= x <= hi:
                continue
            if self.mode == "partial" and self.window[0] < x < self.window[1]:
                continue
            if out and abs(out[-1][0] - x) <= POS_TOL * max(1.0, abs(x)):
                out[-1] = (out[-1][0], out[-1][1], ur)
                continue
            out.append((x, ul, ur))
        return [j for j in out if j[1] != j[2]]

    def limits(self, t: float, x: float) -> tuple:
        self._check(x)
        self._check_time(t)
        return self.history.limits(t, x)

    def trace(self, x: float) -> ObservationTrace:
        self._check(x)
        if x not in self._traces:
            self._traces[x] = exact_trace(self.history, x, self.T)
        return self._traces[x]

    def measure_speed(self, x: float, t: float, u_left: float, u_right: float, tol: float = 1e-11) -> float:
        """Speed of the front with states ``(u_left, u_right)`` passing ``x`` at ``t``.

        Two snapshots straddling ``t`` are differenced; the gap shrinks until
        the same front is found in both.
        """
        h = 1e-3 * max(self.T, 1.0)
        for _ in range(80):
            t1, t2 = max(t - h, 0.0), min(t + h, self.T)
            p1 = self._find(t1, x, u_left, u_right, tol) if t1 < t else None
            p2 = self._find(t2, x, u_left, u_right, tol) if t2 > t else None
            if p1 is not None and p2 is not None:
                return (p2 - p1) / (t2 - t1)
            # one-sided difference against the arrival point itself
            if p2 is not None and self._find(0.5 * (t + t2), x, u_left, u_right, tol) is not None:
                return (p2 - x) / (t2 - t)
            if p1 is not None and self._find(0.5 * (t + t1), x, u_left, u_right, tol) is not None:
                return (x - p1) / (t - t1)
            h *= 0.5
        raise HorizonTooShort(f"could not measure the speed of the front at x={x}, t={t}")

    def _find(self, t: float, x: float, ul: float, ur: float, tol: float):
        best = None
        for p, a, b, _ in self.history.jumps(t):
            if self.mode == "partial" and self.window[0] < p < self.window[1]:
                continue
            if abs(a - ul) <= tol and abs(b - ur) <= tol:
                if best is None or abs(p - x) < abs(best - x):
                    best = p
        return best


# ---------------------------------------------------------------------------


def snapshot(o: Observer, t: float):
    return o.snapshot(t)


def detect_stationary_jumps(o: Observer, t1: float, t2: float, window: tuple, tol: float = 1e-11) -> list:
    """Positions where the same jump sits at both times."""
    lo, hi = window
    early = o.jumps(t1, lo, hi)
    late = o.jumps(t2, lo, hi)
    out = []
    for x, ul, ur in late:
        for y, vl, vr in early:
            if abs(x - y) <= 1e-12 * max(1.0, abs(x)) and abs(ul - vl) <= tol and abs(ur - vr) <= tol:
                if abs(ul - ur) > tol:
                    out.append(x)
                break
    return out


def first_arrival(o: Observer, x: float, predicate: Callable[[float], bool], after: float = 0.0,
                  side: str = "left", strict: bool = True) -> WaveArrival:
    """Earliest time after ``after`` at which the trace at ``x`` satisfies ``predicate``.

    The trace is exact, so the time is the crossing time of a front.
    Raises :class:`HorizonTooShort` if the predicate never fires before ``T``.
    """
    tr = o.trace(x)
    vals = tr.left if side == "left" else tr.right
    starts = np.concatenate(([0.0], tr.times))
    for i, (t0, v) in enumerate(zip(starts, vals)):
        if i == 0:
            continue
        if t0 < after or (strict and t0 == after):
            continue
        if predicate(float(v)):
            before = float(vals[i - 1])
            return _arrival(o, x, float(t0), before, float(v))
    raise HorizonTooShort(f"no arrival at x={x} after t={after} before T={o.T}")


def _arrival(o: Observer, x: float, t: float, before: float, after: float) -> WaveArrival:
    h = o.history
    # the arriving front sits on x at time t
    ul = ur = None
    for p, a, b, _ in h.jumps(t):
        if abs(p - x) <= 1e-9 * max(1.0, abs(x)):
            ul = a if ul is None else ul
            ur = b
    if ul is None:
        ul, ur = (after, before) if after != before else (before, after)
    if o.f.kind == "concave":
        kind = "shock" if ul < ur else "rarefaction"
    else:
        kind = "shock"
    speed = o.measure_speed(x, t, ul, ur)
    return WaveArrival(x, t, before, after, ul, ur, speed, kind)
