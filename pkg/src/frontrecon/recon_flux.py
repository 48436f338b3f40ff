"""Piecewise-affine flux recovery from snapshots of Riemann problems.

For increasing Riemann data ``(u_h | u_h+1)`` the snapshot at time ``T`` is
nondecreasing in ``x`` and equals ``u_h`` far left, ``u_h+1`` far right.
Conservation over a large box gives

    f(u_h+1) - f(u_h) = (1/T) * sum_alpha (v_alpha+1 - v_alpha) * y_alpha

where ``y_alpha`` are jump positions and each continuous arc is replaced by
the position of the single jump with the same area.  Every quantity is an
area of the observed profile, so the inverse of an arc is never formed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from . import riemann
from .errors import ConfigError, InconsistentObservation
from .fluxlib import FluxCurve, SpatialCoeff, interpolate_nodes, write_flux_csv
from .fronttrack import History, Profile, Scenario, simulate

SHOCK = "shock"
RAREFACTION = "rarefaction"
GENERAL = "general"


@dataclass(frozen=True)
class ReconstructionGrid:
    u_lo: float
    u_hi: float
    nu: int
    anchor: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if not self.u_hi > self.u_lo:
            raise ConfigError("reconstruction interval must have u_hi > u_lo")
        if self.nu < 0:
            raise ConfigError("nu must be nonnegative")
        if not self.T > 0:
            raise ConfigError("observation time must be positive")

    @property
    def delta(self) -> float:
        return (self.u_hi - self.u_lo) / 2**self.nu

    @property
    def nodes(self) -> np.ndarray:
        n = 2**self.nu
        u = self.u_lo + self.delta * np.arange(n + 1)
        u[-1] = self.u_hi
        return u


@dataclass(frozen=True)
class Arc:
    """Continuous increasing piece of a snapshot from ``u_lo`` at ``x_lo`` to ``u_hi`` at ``x_hi``."""

    x_lo: float
    x_hi: float
    u_lo: float
    u_hi: float
    area: float  # integral of u over [x_lo, x_hi]

    @property
    def equivalent_jump(self) -> float:
        """Position of the jump from ``u_lo`` to ``u_hi`` enclosing the same area."""
        return (self.u_hi * self.x_hi - self.u_lo * self.x_lo - self.area) / (self.u_hi - self.u_lo)


@dataclass(frozen=True)
class Snapshot:
    """Observed Riemann solution at time ``T`` as an ordered list of jumps and arcs.

    Jumps are ``(x, u_left, u_right)`` tuples.  ``resolution`` is the step
    height of staircased fans (zero when arcs are exact); jumps no taller
    than it are counted as rarefaction steps when labelling the snapshot.
    """

    u_left: float
    u_right: float
    items: tuple
    T: float
    resolution: float = 0.0

    @classmethod
    def from_profile(cls, p: Profile, T: float, resolution: float = 0.0) -> "Snapshot":
        items = tuple((float(x), float(p.values[i]), float(p.values[i + 1])) for i, x in enumerate(p.breakpoints))
        return cls(float(p.values[0]), float(p.values[-1]), items, float(T), resolution)

    @property
    def jumps(self) -> list:
        return [it for it in self.items if not isinstance(it, Arc)]

    @property
    def arcs(self) -> list:
        return [it for it in self.items if isinstance(it, Arc)]

    def _is_step(self, it) -> bool:
        return not isinstance(it, Arc) and it[2] - it[1] <= self.resolution * (1 + 1e-9)

    @property
    def kind(self) -> str:
        big = [it for it in self.jumps if not self._is_step(it)]
        if not big:
            return RAREFACTION
        if len(self.items) == 1:
            return SHOCK
        return GENERAL

    def waves(self) -> list:
        """``(position, u_lo, u_hi)`` per wave; arcs and staircase runs are merged into one entry each."""
        out = []
        run = None  # [weighted position sum, u_lo, u_hi]
        for it in self.items:
            if isinstance(it, Arc):
                wave, step = (it.equivalent_jump, it.u_lo, it.u_hi), True
            else:
                wave, step = it, self._is_step(it)
            if step and run is not None and abs(run[2] - wave[1]) <= 1e-15:
                run[0] += wave[0] * (wave[2] - wave[1])
                run[2] = wave[2]
                continue
            if run is not None:
                out.append((run[0] / (run[2] - run[1]), run[1], run[2]))
                run = None
            if step:
                run = [wave[0] * (wave[2] - wave[1]), wave[1], wave[2]]
            else:
                out.append(wave)
        if run is not None:
            out.append((run[0] / (run[2] - run[1]), run[1], run[2]))
        return out

    def check(self, tol: float = 1e-12) -> None:
        u = self.u_left
        for it in self.items:
            lo, hi = (it.u_lo, it.u_hi) if isinstance(it, Arc) else (it[1], it[2])
            if abs(lo - u) > tol:
                raise InconsistentObservation(f"snapshot states do not connect at {it}")
            if not hi > lo:
                raise InconsistentObservation(f"plateau values must increase, got {lo} -> {hi}")
            u = hi
        if abs(u - self.u_right) > tol:
            raise InconsistentObservation("snapshot does not end at its right state")


# ---------------------------------------------------------------------------
# single steps


def shock_step(snap: Snapshot, f_h: float) -> float:
    if len(snap.items) != 1 or isinstance(snap.items[0], Arc):
        raise InconsistentObservation("shock_step needs a snapshot with a single jump; use general_step")
    x, ul, ur = snap.items[0]
    return f_h + (ur - ul) * x / snap.T


def rarefaction_step(snap: Snapshot, f_h: float) -> float:
    if len(snap.items) != 1 or not isinstance(snap.items[0], Arc):
        raise InconsistentObservation("rarefaction_step needs a snapshot with a single continuous arc")
    arc = snap.items[0]
    return f_h + (arc.u_hi - arc.u_lo) * arc.equivalent_jump / snap.T


def general_step(snap: Snapshot, f_h: float) -> tuple:
    """Flux value at the right state plus the plateau values passed on the way.

    Returns ``(f_right, plateaus)`` with ``plateaus`` a list of ``(v, f(v))``
    for the interior plateaus between waves.
    """
    snap.check()
    waves = snap.waves()
    val = f_h
    plateaus = []
    for i, (y, lo, hi) in enumerate(waves):
        val = val + (hi - lo) * y / snap.T
        if i < len(waves) - 1:
            plateaus.append((hi, val))
    return val, plateaus


def step(snap: Snapshot, f_h: float) -> tuple:
    kind = snap.kind
    if kind == SHOCK:
        return shock_step(snap, f_h), [], kind
    if kind == RAREFACTION and len(snap.items) == 1:
        return rarefaction_step(snap, f_h), [], kind
    val, plateaus = general_step(snap, f_h)
    return val, plateaus, kind


# ---------------------------------------------------------------------------
# oracles: callables (u_left, u_right) -> Snapshot


def exact_fan_oracle(f: FluxCurve, T: float, k: float = 1.0) -> Callable:
    """Snapshots from the exact self-similar Riemann solution; arc areas by adaptive quadrature."""

    def oracle(ul: float, ur: float) -> Snapshot:
        fan = riemann.solve_homogeneous(f, k, ul, ur)
        items = []
        for w in fan.waves:
            if isinstance(w, riemann.Rarefaction):
                x_lo, x_hi = T * w.tail, T * w.head
                with warnings.catch_warnings():
                    # round-off floor of the root-solved fan profile
                    warnings.simplefilter("ignore", IntegrationWarning)
                    area, _ = quad(lambda x: w.state_at(x / T), x_lo, x_hi, epsabs=1e-15, epsrel=1e-14, limit=200)
                items.append(Arc(x_lo, x_hi, w.u_left, w.u_right, area))
            else:
                items.append((T * w.speed, w.u_left, w.u_right))
        return Snapshot(ul, ur, tuple(items), T)

    return oracle


def front_tracking_oracle(f: FluxCurve, T: float, delta: float, k: float = 1.0) -> Callable:
    """Snapshots from a front-tracking run on the Riemann datum."""

    def oracle(ul: float, ur: float) -> Snapshot:
        s = Scenario(f, SpatialCoeff.constant(k), Profile(np.array([0.0]), np.array([ul, ur])), delta, T)
        fs = simulate(s)
        return Snapshot.from_profile(History(fs).profile(T), T, resolution=delta)

    return oracle


def table_oracle(table: dict) -> Callable:
    """Oracle over a fixed set of observed snapshots keyed by ``(u_left, u_right)``."""

    def oracle(ul: float, ur: float) -> Snapshot:
        for (a, b), snap in table.items():
            if abs(a - ul) <= 1e-12 and abs(b - ur) <= 1e-12:
                return snap
        raise InconsistentObservation(f"no observation for the Riemann datum ({ul} | {ur})")

    return oracle


# ---------------------------------------------------------------------------
# full reconstruction


@dataclass
class FluxReport:
    nodes: np.ndarray
    values: np.ndarray
    provenance: list  # one label per grid interval
    delta: float
    lip_estimate: float
    derivative_bound: float
    gaps: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    flagged: list = field(default_factory=list)  # interval indices whose snapshot held a shock

    @property
    def complete(self) -> bool:
        return not self.gaps

    def lines(self) -> list:
        out = [f"delta = {self.delta:.17g}",
               f"slope-variation estimate of Lip(f') = {self.lip_estimate:.17g}",
               f"derivative bound Lip(f')*delta = {self.derivative_bound:.17g}"]
        for i, kind in enumerate(self.provenance):
            out.append(f"interval {i}: {kind}")
        out.extend(f"gap: {g}" for g in self.gaps)
        out.extend(self.notes)
        return out


@dataclass
class FluxReconstruction:
    curve: FluxCurve | None
    report: FluxReport
    grid: ReconstructionGrid

    def write_csv(self, path) -> None:
        write_flux_csv(path, self.report.nodes, self.report.values)


def _slope_lip(u: np.ndarray, v: np.ndarray) -> float:
    if u.size < 3:
        return 0.0
    s = np.diff(v) / np.diff(u)
    mids = 0.5 * (u[:-1] + u[1:])
    return float(np.max(np.abs(np.diff(s)) / np.diff(mids)))


def _assemble(grid, pts: dict, provenance, gaps, notes, flagged) -> FluxReconstruction:
    u = np.array(sorted(pts))
    v = np.array([pts[x] for x in u])
    lip = _slope_lip(u, v)
    # the widest node gap governs the derivative bound
    width = float(np.max(np.diff(u))) if u.size >= 2 else grid.delta
    rep = FluxReport(u, v, provenance, width, lip, lip * width, gaps, notes, flagged)
    curve = interpolate_nodes(zip(u, v), name=f"reconstructed nu={grid.nu}") if u.size >= 2 else None
    return FluxReconstruction(curve, rep, grid)


def _run(nodes: np.ndarray, f0: float, oracle: Callable, plateau_nodes: bool):
    pts = {float(nodes[0]): float(f0)}
    provenance, gaps = [], []
    val = f0
    for h in range(nodes.size - 1):
        try:
            snap = oracle(float(nodes[h]), float(nodes[h + 1]))
            val, plateaus, kind = step(snap, val)
        except Exception as exc:  # oracle or data failure: keep the prefix
            gaps.append(f"interval [{nodes[h]:.17g}, {nodes[h + 1]:.17g}]: {exc}")
            break
        provenance.append(kind)
        if plateau_nodes:
            for p, fp in plateaus:
                pts[float(p)] = float(fp)
        pts[float(nodes[h + 1])] = float(val)
    return pts, provenance, gaps


def reconstruct(grid: ReconstructionGrid, oracle: Callable, plateau_nodes: bool = True) -> FluxReconstruction:
    """Node values by a prefix scan over the Riemann snapshots.

    With ``plateau_nodes`` the flux values at intermediate plateaus of
    multi-wave snapshots are kept as extra nodes.
    """
    pts, provenance, gaps = _run(grid.nodes, grid.anchor, oracle, plateau_nodes)
    flagged = [i for i, k in enumerate(provenance) if k in (SHOCK, GENERAL)]
    return _assemble(grid, pts, provenance, gaps, [], flagged)


def refine(prev: FluxReconstruction, nu_new: int, oracle: Callable, restrict_to: list | None = None,
           plateau_nodes: bool = True) -> FluxReconstruction:
    """Subdivide the flagged coarse intervals to ``2**(nu_new - nu)`` pieces each."""
    g = prev.grid
    if nu_new <= g.nu:
        raise ConfigError("refinement needs a finer level")
    flagged = prev.report.flagged if restrict_to is None else list(restrict_to)
    coarse = g.nodes
    pts = {float(u): float(v) for u, v in zip(prev.report.nodes, prev.report.values)}
    gaps = list(prev.report.gaps)
    m = 2 ** (nu_new - g.nu)
    provenance = list(prev.report.provenance)
    for i in flagged:
        lo, hi = float(coarse[i]), float(coarse[i + 1])
        sub = lo + (hi - lo) * np.arange(m + 1) / m
        sub[-1] = hi
        got, prov, gp = _run(sub, pts[lo], oracle, plateau_nodes)
        pts.update(got)
        gaps.extend(gp)
        provenance[i] = "refined(" + ",".join(prov) + ")"
    grid = ReconstructionGrid(g.u_lo, g.u_hi, nu_new, g.anchor, g.T)
    return _assemble(grid, pts, provenance, gaps, list(prev.report.notes), [])


# ---------------------------------------------------------------------------
# quality checks


def derivative_error(f: FluxCurve, f_nu: FluxCurve, n: int = 1 << 14) -> float:
    """Sup over a dense grid of ``|f_nu' - f'|`` away from the nodes of ``f_nu``."""
    u = np.linspace(f_nu.lo, f_nu.hi, n + 1)
    u = 0.5 * (u[:-1] + u[1:])
    knots = f_nu.nodes[0]
    u = u[np.min(np.abs(u[:, None] - knots[None, :]), axis=1) > 1e-12]
    return float(np.max(np.abs(np.asarray(f_nu.df(u), float) - np.array([float(f.df(x)) for x in u]))))


def solution_gap(f: FluxCurve, f_nu: FluxCurve, datum: Profile, T: float, delta_ref: float,
                 k: float = 1.0) -> float:
    """L1 distance at ``T`` between front-tracking solutions with ``f`` and with ``f_nu``.

    The run with the piecewise-affine ``f_nu`` is exact; ``delta_ref`` only
    controls the reference run with ``f``.
    """
    kc = SpatialCoeff.constant(k)
    ref = History(simulate(Scenario(f, kc, datum, delta_ref, T))).profile(T)
    got = History(simulate(Scenario(f_nu, kc, datum, delta_ref, T))).profile(T)
    lam = k * max(abs(float(f.df(u))) for u in np.linspace(f.lo, f.hi, 1025)) * 1.01
    bp = datum.breakpoints
    lo = (bp[0] if bp.size else 0.0) - lam * T - 1.0
    hi = (bp[-1] if bp.size else 0.0) + lam * T + 1.0
    return ref.l1_distance(got, lo, hi)


def node_error(f: FluxCurve, rec: FluxReconstruction) -> float:
    return float(max(abs(float(f.f(u)) - v) for u, v in zip(rec.report.nodes, rec.report.values)))


def lip_of_derivative(f: FluxCurve, n: int = 1 << 14) -> float:
    if f.lip_df is not None:
        return float(f.lip_df)
    u = np.linspace(f.lo, f.hi, n + 1)
    d = np.array([float(f.df(x)) for x in u])
    return float(np.max(np.abs(np.diff(d)) / np.diff(u)))


def reconstruction_summary(f: FluxCurve, rec: FluxReconstruction) -> dict:
    lip = lip_of_derivative(f)
    return {
        "nu": rec.grid.nu,
        "delta": rec.grid.delta,
        "node_error": node_error(f, rec),
        "derivative_error": derivative_error(f, rec.curve),
        "derivative_bound": lip * rec.grid.delta,
    }

