"""Event-driven front tracking for ``u_t + (k(x) f(u))_x = 0``.

Piecewise-constant data evolve as straight-line fronts.  Rarefactions are
split into steps of state width at most ``delta``; every moving front,
steps included, travels at the Rankine-Hugoniot speed of its two states so
that the approximate solution is an exact weak solution.  Coefficient jumps
are stationary fronts.  When fronts meet, the Riemann problem between the
outermost states of the colliding cluster is solved again.

For non-concave fluxes only a constant coefficient is supported; the flux
is replaced by its piecewise-linear interpolant on a uniform grid of
spacing ``delta`` (plus the initial states), for which front tracking is
exact.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import riemann
from .errors import ConfigError, LivelockError
from .fluxlib import CONCAVE, LINEAR, FluxCurve, SpatialCoeff, interpolate_nodes

MAX_EVENTS = 10_000_000
PARALLEL_TOL = 1e-13
POS_TOL = 1e-12

SHOCK = "shock"
STEP = "step"
KFRONT = "kfront"


@dataclass(frozen=True)
class Profile:
    """Piecewise-constant function: ``values[i]`` lives between ``breakpoints[i-1]`` and ``breakpoints[i]``."""

    breakpoints: np.ndarray
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if vals.size != bp.size + 1:
            raise ConfigError("profile needs one more value than breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ConfigError("profile breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, u: float, time: float = 0.0) -> "Profile":
        return cls(np.array([]), np.array([u]), time)

    @classmethod
    def from_pieces(cls, breakpoints, values, time: float = 0.0) -> "Profile":
        """Like the constructor but merges equal neighbouring values."""
        bp, vals = [], [float(values[0])]
        for x, v in zip(breakpoints, values[1:]):
            if float(v) == vals[-1]:
                continue
            bp.append(float(x))
            vals.append(float(v))
        return cls(np.array(bp), np.array(vals), time)

    def __call__(self, x: float, side: str = "right") -> float:
        i = np.searchsorted(self.breakpoints, x, side=side)
        return float(self.values[i])

    def limits(self, x: float) -> tuple:
        return self(x, "left"), self(x, "right")

    def integral(self, lo: float, hi: float, ref: float = 0.0) -> float:
        """Integral of ``u - ref`` over ``[lo, hi]``."""
        edges = np.concatenate(([lo], np.clip(self.breakpoints, lo, hi), [hi]))
        return float(np.sum((self.values - ref) * np.diff(edges)))

    def l1_distance(self, other: "Profile", lo: float, hi: float) -> float:
        pts = np.union1d(self.breakpoints, other.breakpoints)
        pts = np.concatenate(([lo], pts[(pts > lo) & (pts < hi)], [hi]))
        mids = 0.5 * (pts[:-1] + pts[1:])
        a = self.values[np.searchsorted(self.breakpoints, mids)]
        b = other.values[np.searchsorted(other.breakpoints, mids)]
        return float(np.sum(np.abs(a - b) * np.diff(pts)))

    @property
    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.values))))


@dataclass(frozen=True, eq=False)
class Scenario:
    f: FluxCurve
    k: SpatialCoeff
    initial: Profile
    delta: float
    T: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not self.T >= 0:
            raise ConfigError("horizon T must be nonnegative")
        if self.f.kind != CONCAVE and self.k.breakpoints:
            raise ConfigError("coefficient jumps need a concave flux")
        lo, hi = float(np.min(self.initial.values)), float(np.max(self.initial.values))
        if not (self.f.in_domain(lo) and self.f.in_domain(hi)):
            raise ConfigError(f"initial values [{lo}, {hi}] leave the flux domain [{self.f.lo}, {self.f.hi}]")


@dataclass(eq=False)
class Front:
    x0: float
    t0: float
    speed: float
    ul: float
    ur: float
    kl: float
    kr: float
    kind: str
    id: int = -1
    t1: float = math.inf
    prev: "Front | None" = field(default=None, repr=False)
    next: "Front | None" = field(default=None, repr=False)

    def x(self, t: float) -> float:
        if self.speed == 0.0:
            return self.x0
        return self.x0 + self.speed * (t - self.t0)

    @property
    def alive(self) -> bool:
        return self.t1 == math.inf


class FrontSet:
    """Mutable state of a front-tracking run, with its full history."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.t = 0.0
        self.events = 0
        self.history: list[Front] = []
        self.head: Front | None = None
        self.u_minus = float(scenario.initial.values[0])
        self.u_plus = float(scenario.initial.values[-1])
        self._heap: list = []
        self._seq = 0
        self.min_collision_time = math.inf
        f = scenario.f
        if f.kind == CONCAVE:
            self.flux = f
            self._width = scenario.delta
        else:
            self.flux = self._piecewise_linear(f, scenario)
            self._width = math.inf

    @staticmethod
    def _piecewise_linear(f: FluxCurve, s: Scenario) -> FluxCurve:
        if f.kind == LINEAR:
            nodes = f.nodes[0]
        else:
            n = max(1, math.ceil((f.hi - f.lo) / s.delta - 1e-9))
            nodes = np.linspace(f.lo, f.hi, n + 1)
        nodes = np.union1d(nodes, s.initial.values)
        return interpolate_nodes(zip(nodes, [float(f.f(u)) for u in nodes]))

    # -- front creation -------------------------------------------------

    def _new(self, x, t, speed, ul, ur, kl, kr, kind) -> Front:
        fr = Front(float(x), float(t), float(speed), float(ul), float(ur), float(kl), float(kr), kind, len(self.history))
        self.history.append(fr)
        return fr

    def fronts_from_fan(self, fan: riemann.WaveFan, x: float, t: float) -> list:
        out = []
        for w in fan.waves:
            if isinstance(w, riemann.KWave):
                out.append(self._new(x, t, 0.0, w.u_left, w.u_right, w.k_left, w.k_right, KFRONT))
            elif isinstance(w, riemann.Shock):
                out.append(self._new(x, t, w.speed, w.u_left, w.u_right, w.k, w.k, SHOCK))
            else:
                out.extend(self._split(w, x, t))
        return out

    def _split(self, w: riemann.Rarefaction, x: float, t: float) -> list:
        width = abs(w.u_right - w.u_left)
        n = max(1, math.ceil(width / self._width - 1e-9)) if math.isfinite(self._width) else 1
        states = np.linspace(w.u_left, w.u_right, n + 1)
        states[0], states[-1] = w.u_left, w.u_right
        out = []
        for a, b in zip(states[:-1], states[1:]):
            s = self.flux.lax_speed(a, b, w.k)
            out.append(self._new(x, t, s, a, b, w.k, w.k, STEP))
        return out

    def solve(self, kl, ul, kr, ur) -> riemann.WaveFan:
        return riemann.solve(self.flux, kl, ul, kr, ur)

    # -- linked list and events -----------------------------------------

    def alive_fronts(self) -> list:
        out, fr = [], self.head
        while fr is not None:
            out.append(fr)
            fr = fr.next
        return out

    def _link(self, left: Front | None, new: list, right: Front | None) -> None:
        chain = [left] + new + [right]
        for a, b in zip(chain[:-1], chain[1:]):
            if a is not None:
                a.next = b
            if b is not None:
                b.prev = a
        if left is None:
            self.head = new[0] if new else right

    def _collision_time(self, a: Front, b: Front) -> float:
        ds = a.speed - b.speed
        if ds <= PARALLEL_TOL * max(1.0, abs(a.speed), abs(b.speed)):
            return math.inf
        if b.speed == 0.0:
            tc = a.t0 + (b.x0 - a.x0) / a.speed
        elif a.speed == 0.0:
            tc = b.t0 + (a.x0 - b.x0) / b.speed
        else:
            tc = (b.x0 - a.x0 + a.speed * a.t0 - b.speed * b.t0) / ds
        return max(tc, self.t)

    def _schedule(self, a: Front | None, b: Front | None) -> None:
        if a is None or b is None:
            return
        tc = self._collision_time(a, b)
        if math.isfinite(tc):
            self._seq += 1
            heapq.heappush(self._heap, (tc, self._seq, a.id, b.id))

    # -- public API -------------------------------------------------------

    def initialize(self) -> "FrontSet":
        s = self.scenario
        pts = np.union1d(s.initial.breakpoints, np.asarray(s.k.breakpoints, dtype=float))
        fronts = []
        for x in pts:
            ul, ur = s.initial.limits(x)
            kl, kr = s.k.left(x), s.k.right(x)
            if ul == ur and kl == kr:
                continue
            fronts.extend(self.fronts_from_fan(self.solve(kl, ul, kr, ur), x, 0.0))
        self._link(None, fronts, None)
        for a, b in zip(fronts[:-1], fronts[1:]):
            self._schedule(a, b)
        return self

    def advance(self, t_target: float) -> "FrontSet":
        if t_target < self.t:
            raise ValueError("cannot advance backwards in time")
        while self._heap and self._heap[0][0] <= t_target:
            tc, _, ia, ib = heapq.heappop(self._heap)
            a, b = self.history[ia], self.history[ib]
            if not (a.alive and b.alive and a.next is b):
                continue
            self._interact(tc, a, b)
            self.events += 1
            if self.events > MAX_EVENTS:
                raise LivelockError(f"more than {MAX_EVENTS} interactions before t={t_target}")
        self.t = t_target
        return self

    def _interact(self, tc: float, a: Front, b: Front) -> None:
        self.min_collision_time = min(self.min_collision_time, tc)
        if a.kind == KFRONT:
            p = a.x0
        elif b.kind == KFRONT:
            p = b.x0
        else:
            p = 0.5 * (a.x(tc) + b.x(tc))
        tol = POS_TOL * max(1.0, abs(p))
        cluster = [a, b]
        fr = a.prev
        while fr is not None and abs(fr.x(tc) - p) <= tol:
            cluster.insert(0, fr)
            fr = fr.prev
        left = fr
        fr = b.next
        while fr is not None and abs(fr.x(tc) - p) <= tol:
            cluster.append(fr)
            fr = fr.next
        right = fr
        kfronts = [c for c in cluster if c.kind == KFRONT]
        if kfronts:
            p = kfronts[0].x0
        self.t = tc
        for c in cluster:
            c.t1 = tc
        first, last = cluster[0], cluster[-1]
        fan = self.solve(first.kl, first.ul, last.kr, last.ur)
        new = self.fronts_from_fan(fan, p, tc)
        self._link(left, new, right)
        chain = [left] + new + [right]
        for x, y in zip(chain[:-1], chain[1:]):
            self._schedule(x, y)

    def profile(self, t: float | None = None) -> Profile:
        """Snapshot at ``t`` (defaults to the current time)."""
        t = self.t if t is None else t
        return sample_profile(self, t)

    def finish(self, t: float | None = None) -> "FrontSet":
        return self.advance(self.scenario.T if t is None else t)


def initialize(s: Scenario) -> FrontSet:
    return FrontSet(s).initialize()


def advance(fs: FrontSet, t_target: float) -> FrontSet:
    return fs.advance(t_target)


def simulate(s: Scenario, T: float | None = None) -> FrontSet:
    fs = initialize(s)
    return fs.advance(s.T if T is None else T)


# ---------------------------------------------------------------------------
# sampling from the recorded history


class History:
    """Column view of every front ever created in a run."""

    def __init__(self, fs: FrontSet):
        h = fs.history
        self.fs = fs
        self.t_end = fs.t
        self.t0 = np.array([fr.t0 for fr in h])
        self.t1 = np.array([fr.t1 for fr in h])
        self.x0 = np.array([fr.x0 for fr in h])
        self.speed = np.array([fr.speed for fr in h])
        self.ul = np.array([fr.ul for fr in h])
        self.ur = np.array([fr.ur for fr in h])
        self.kind = np.array([fr.kind for fr in h])
        self.u_minus = fs.u_minus
        self.u_plus = fs.u_plus

    def alive_at(self, t: float) -> np.ndarray:
        """Fronts alive at ``t``; at an event time the outgoing fronts are used."""
        return (self.t0 <= t) & (t < self.t1)

    def positions(self, t: float, idx: np.ndarray) -> np.ndarray:
        return self.x0[idx] + self.speed[idx] * (t - self.t0[idx])

    def fronts_at(self, t: float):
        idx = np.nonzero(self.alive_at(t))[0]
        pos = self.positions(t, idx)
        order = np.lexsort((self.speed[idx], pos))
        return idx[order], pos[order]

    def limits(self, t: float, x: float) -> tuple:
        idx, pos = self.fronts_at(t)
        tol = POS_TOL * max(1.0, abs(x))
        left = np.nonzero(pos < x - tol)[0]
        right = np.nonzero(pos > x + tol)[0]
        on = np.nonzero(np.abs(pos - x) <= tol)[0]
        if on.size:
            return float(self.ul[idx[on[0]]]), float(self.ur[idx[on[-1]]])
        ul = float(self.ur[idx[left[-1]]]) if left.size else self.u_minus
        ur = float(self.ul[idx[right[0]]]) if right.size else self.u_plus
        return ul, ur

    def profile(self, t: float) -> Profile:
        idx, pos = self.fronts_at(t)
        bps, vals = [], [self.u_minus]
        for i, p in zip(idx, pos):
            if bps and abs(p - bps[-1]) <= POS_TOL * max(1.0, abs(p)):
                vals[-1] = float(self.ur[i])
                continue
            bps.append(float(p))
            vals.append(float(self.ur[i]))
        # drop cells emptied by coincident fronts
        keep_bp, keep_val = [], [vals[0]]
        for x, v in zip(bps, vals[1:]):
            if v == keep_val[-1]:
                continue
            keep_bp.append(x)
            keep_val.append(v)
        return Profile(np.array(keep_bp), np.array(keep_val), t)

    def jumps(self, t: float) -> list:
        """``(x, u_left, u_right, kind)`` for every front alive at ``t``."""
        idx, pos = self.fronts_at(t)
        return [(float(p), float(self.ul[i]), float(self.ur[i]), str(self.kind[i])) for i, p in zip(idx, pos)]

    def crossing_times(self, x: float, t_lo: float = 0.0, t_hi: float | None = None) -> np.ndarray:
        """Times at which a front passes ``x`` or a front sitting on ``x`` appears or vanishes."""
        t_hi = self.t_end if t_hi is None else t_hi
        moving = self.speed != 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = self.t0 + (x - self.x0) / np.where(moving, self.speed, 1.0)
        tol = 1e-13 * max(1.0, t_hi)
        hit = moving & (tc >= self.t0 - tol) & (tc <= self.t1 + tol)
        times = list(tc[hit])
        still = (~moving) & (np.abs(self.x0 - x) <= POS_TOL * max(1.0, abs(x)))
        times.extend(self.t0[still])
        times.extend(self.t1[still][np.isfinite(self.t1[still])])
        times = np.array(sorted(t for t in times if t_lo < t <= t_hi))
        if times.size == 0:
            return times
        keep = np.concatenate(([True], np.diff(times) > tol))
        return times[keep]


@dataclass(frozen=True)
class ObservationTrace:
    """Time series of the one-sided limits at a fixed position.

    ``times[i]`` are the instants where the trace changes; on
    ``(times[i-1], times[i])`` the limits are ``left[i]``, ``right[i]``.
    """

    x: float
    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    T: float

    def value(self, t: float, side: str = "left") -> float:
        i = int(np.searchsorted(self.times, t, side="right"))
        return float((self.left if side == "left" else self.right)[i])

    def grid(self, dt: float) -> tuple:
        ts = np.arange(0.0, self.T + 0.5 * dt, dt)
        i = np.searchsorted(self.times, ts, side="right")
        return ts, self.left[i], self.right[i]

    def l1_distance(self, other: "ObservationTrace", side: str = "left") -> float:
        pts = np.union1d(self.times, other.times)
        T = min(self.T, other.T)
        pts = np.concatenate(([0.0], pts[(pts > 0) & (pts < T)], [T]))
        mids = 0.5 * (pts[:-1] + pts[1:])
        a = (self.left if side == "left" else self.right)[np.searchsorted(self.times, mids, side="right")]
        b = (other.left if side == "left" else other.right)[np.searchsorted(other.times, mids, side="right")]
        return float(np.sum(np.abs(a - b) * np.diff(pts)))


def exact_trace(hist: History, x: float, T: float | None = None) -> ObservationTrace:
    T = hist.t_end if T is None else T
    times = hist.crossing_times(x, 0.0, T)
    pts = np.concatenate(([0.0], times, [T]))
    left, right = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        ul, ur = hist.limits(0.5 * (lo + hi), x) if hi > lo else hist.limits(lo, x)
        left.append(ul)
        right.append(ur)
    return ObservationTrace(float(x), times, np.array(left), np.array(right), float(T))


def sample_profile(fs: FrontSet, t: float) -> Profile:
    if t > fs.t + 1e-15:
        raise ValueError(f"time {t} is beyond the evolved horizon {fs.t}")
    return History(fs).profile(t)


def sample_trace(s: Scenario | FrontSet, x: float, times=None) -> ObservationTrace:
    fs = s if isinstance(s, FrontSet) else simulate(s)
    tr = exact_trace(History(fs), x, fs.t)
    if times is None:
        return tr
    times = np.asarray(times, dtype=float)
    i = np.searchsorted(tr.times, times, side="right")
    return ObservationTrace(float(x), times[1:] if times.size else times, tr.left[i], tr.right[i], tr.T)


# ---------------------------------------------------------------------------
# CSV output


def write_snapshot_csv(path, jumps) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u_left", "u_right"])
        for x, ul, ur, *_ in jumps:
            w.writerow([f"{x:.17g}", f"{ul:.17g}", f"{ur:.17g}"])


def write_trace_csv(path, trace: ObservationTrace, dt: float | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "u_left", "u_right"])
        if dt is None:
            ts = np.concatenate(([0.0], trace.times))
            for i, t in enumerate(ts):
                w.writerow([f"{t:.17g}", f"{trace.left[i]:.17g}", f"{trace.right[i]:.17g}"])
        else:
            ts, ul, ur = trace.grid(dt)
            for t, a, b in zip(ts, ul, ur):
                w.writerow([f"{t:.17g}", f"{a:.17g}", f"{b:.17g}"])
