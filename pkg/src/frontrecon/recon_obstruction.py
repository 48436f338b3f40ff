"""Locate an obstruction ``k = k1`` on ``[xi1, xi2]`` hidden inside ``(a, b)``.

Only the traces at ``x = a`` and ``x = b`` are used.  Two protocols are
supported.

Stationary ambient
    The data right of ``a`` is a known-at-the-edges stationary state.  A
    probe is placed left of ``a``: a fan from ``u^m`` down to ``u1`` behind
    a shock that first empties the window.  The fan then enters the window,
    part of it is transmitted to ``b`` and part is reflected at ``xi1`` as a
    backward shock reaching ``a``.

Constant data
    The whole line starts at a constant state.  The coefficient jumps emit
    waves by themselves; their arrival times and speeds at ``a`` and ``b``
    locate the jumps.

The default ("discrete") route inverts the observations with the chord
speeds of the fronts actually observed, so it is exact up to round-off on
front-tracked data.  The "tangent" route uses characteristic speeds and
the backward integration of the generalized characteristic through the
continuous fan; it converges at first order in the fan step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import Congested, ConfigError, HorizonTooShort, InconsistentObservation
from .fluxlib import INCREASING, FluxCurve, Obstruction, SpatialCoeff, branch_inverse, companion
from .fronttrack import Profile, Scenario
from .observe import Observer, first_arrival
from . import riemann

STATE_TOL = 1e-11
DISPATCH_TOL = riemann.DISPATCH_TOL


def chord(f: FluxCurve, u: float, v: float) -> float:
    if u == v:
        return float(f.df(u))
    return (float(f.f(v)) - float(f.f(u))) / (v - u)


def splice(left: Profile, right: Profile, x0: float) -> Profile:
    """``left`` on ``x < x0`` and ``right`` on ``x > x0``."""
    bl = [x for x in left.breakpoints if x < x0]
    vl = [left.values[i] for i in range(len(bl) + 1)]
    br = [x for x in right.breakpoints if x > x0]
    vr = list(right.values[len(right.breakpoints) - len(br):])
    return Profile.from_pieces(bl + [x0] + br, vl + vr)


# ---------------------------------------------------------------------------
# ambient state and probes


@dataclass(frozen=True)
class StationaryAmbient:
    """Edge states of a stationary solution on ``[a, inf)`` with coefficient ``k_o`` outside the window."""

    f: FluxCurve
    k_o: float
    u_a: float
    u_b: float
    a: float
    b: float

    def __post_init__(self):
        self.f.require_concave()
        if not self.b > self.a:
            raise ConfigError("window needs b > a")
        fa, fb = float(self.f.f(self.u_a)), float(self.f.f(self.u_b))
        if abs(fa - fb) > 1e-12 * max(1.0, self.f.fmax):
            raise ConfigError(f"edge states {self.u_a}, {self.u_b} carry different fluxes; not stationary")

    @property
    def companion(self) -> float:
        return companion(self.f, self.u_a)

    @property
    def congested(self) -> bool:
        hi = self.f.hi
        return abs(self.u_a - hi) <= STATE_TOL or abs(self.u_b - hi) <= STATE_TOL

    @property
    def empty(self) -> bool:
        return abs(self.u_a - self.f.lo) <= STATE_TOL

    def flags(self) -> list:
        out = []
        if self.empty:
            out.append("empty ambient: no emptying shock is needed")
        if self.congested:
            out.append("fully congested edge state: the obstruction value cannot be probed")
        if abs(self.u_a - self.f.umax) <= STATE_TOL:
            out.append("edge state at the flux maximizer: the coefficient is constant on the window")
        return out


@dataclass(frozen=True)
class ProbeDesign:
    ambient: StationaryAmbient
    x_tilde: float
    y_tilde: float
    left: Profile  # data on x < a
    fan_center: float
    base: float  # state ahead of the probing fan
    fast: bool = False

    def initial(self, tail: Profile) -> Profile:
        return splice(self.left, tail, self.ambient.a)

    @property
    def emptying_bound(self) -> float:
        """Upper bound on the time the emptying shock needs to leave the window."""
        amb = self.ambient
        if self.fast or amb.empty:
            return 0.0
        M = max(amb.u_a, amb.companion)
        return (M - amb.f.lo) / (amb.k_o * float(amb.f.f(amb.u_a))) * (amb.b - amb.a + self.x_tilde)


def probe_stationary(ambient: StationaryAmbient, x_tilde: float) -> ProbeDesign:
    """Data ``u^m | u1 | u_o(a)`` left of ``a``; the fan sits far enough back to let the window empty first."""
    f, amb = ambient.f, ambient
    if not x_tilde > 0:
        raise ConfigError("x_tilde must be positive")
    if abs(amb.u_a - f.umax) <= STATE_TOL:
        raise ConfigError("edge state equals the flux maximizer; nothing to reconstruct")
    if amb.congested:
        raise Congested("an edge state is fully congested; the obstruction value cannot be reconstructed")
    u1 = f.lo
    if u1 < amb.u_a < f.hi:
        M = max(amb.u_a, amb.companion)
        y = (M - u1) / float(f.f(amb.u_a)) * float(f.df(u1)) * (amb.b - amb.a + x_tilde)
    else:
        y = 0.0
    a = amb.a
    xc = a - x_tilde - y
    if y > 0:
        left = Profile(np.array([xc, a - x_tilde]), np.array([f.umax, u1, amb.u_a]))
    else:
        left = Profile.from_pieces([xc], [f.umax, u1])
    return ProbeDesign(amb, float(x_tilde), float(y), left, xc, u1)


def fast_probe_design(ambient: StationaryAmbient, x_tilde: float) -> ProbeDesign:
    """Data ``u^m | u_o(a)`` left of ``a``: no emptying phase."""
    f, amb = ambient.f, ambient
    if not max(amb.u_a, amb.u_b) < f.umax:
        raise ConfigError("the direct probe needs both edge states below the flux maximizer")
    if not x_tilde > 0:
        raise ConfigError("x_tilde must be positive")
    xc = amb.a - x_tilde
    left = Profile(np.array([xc]), np.array([f.umax, amb.u_a]))
    return ProbeDesign(amb, float(x_tilde), 0.0, left, xc, amb.u_a, fast=True)


# ---------------------------------------------------------------------------
# hidden world


@dataclass(frozen=True, eq=False)
class HiddenWorld:
    """Ground truth behind the window: coefficient and the data right of ``a``."""

    f: FluxCurve
    k: SpatialCoeff
    tail: Profile
    a: float
    b: float
    delta: float

    def observe(self, left: Profile, T: float) -> Observer:
        init = splice(left, self.tail, self.a)
        s = Scenario(self.f, self.k, init, self.delta, T)
        return Observer(s, mode="partial", window=(self.a, self.b))

    def observe_constant(self, ubar: float, T: float) -> Observer:
        s = Scenario(self.f, self.k, Profile.constant(ubar), self.delta, T)
        return Observer(s, mode="partial", window=(self.a, self.b))

    def restarted(self, o: Observer, tau: float) -> "HiddenWorld":
        """The world as it stands at ``tau``, used to restart a protocol."""
        return HiddenWorld(self.f, self.k, o.history.profile(tau), self.a, self.b, self.delta)


def stationary_tail(f: FluxCurve, obs: Obstruction, u_a: float, omega: float | None = None,
                    u_b: float | None = None) -> Profile:
    """Stationary data on ``[a, inf)`` with edge state ``u_a``; checked against the Riemann solver."""
    level = obs.k_o * float(f.f(u_a))
    if omega is None:
        pairs = riemann.stationary_pairs(f, obs.k_o, obs.k1, u_a, "given-left")
        if not pairs:
            raise ConfigError(f"edge state {u_a} carries more flux than the obstruction admits")
        omega = min(pairs.values(), key=lambda w: abs(w - u_a))
    if abs(obs.k1 * float(f.f(omega)) - level) > 1e-12:
        raise ConfigError("obstruction state does not balance the edge flux")
    if u_b is None:
        u_b = u_a
    for kl, ul, kr, ur in ((obs.k_o, u_a, obs.k1, omega), (obs.k1, omega, obs.k_o, u_b)):
        fan = riemann.solve_two_k(f, kl, ul, kr, ur)
        if any(not isinstance(w, riemann.KWave) for w in fan.waves):
            raise ConfigError(f"states {ul} | {ur} across the coefficient jump are not stationary")
    return Profile.from_pieces([obs.a - 1.0, obs.xi1, obs.xi2], [u_a, u_a, omega, u_b])


# ---------------------------------------------------------------------------
# stationary protocol: observables


@dataclass
class StationaryObservables:
    tau_tilde: float
    tau_o: float
    u_e: float  # state behind the leading fan front at a
    tau_b: float
    v_b: float  # state behind the leading front at b
    tau_a: float
    v_a: float  # left state of the reflected shock at a
    w_prime: float  # right state of the reflected shock
    w: float  # increasing-branch state with f(w) = f(w')
    sigma_a: float = math.nan

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _above(level: float):
    return lambda v: v > level + STATE_TOL


def emptying_time(o: Observer, design: ProbeDesign) -> float:
    """First time the state at ``b`` is ``u1``; checks the bound and watches for congestion."""
    amb, f = design.ambient, design.ambient.f
    u1, u2 = f.lo, f.hi
    if design.fast or amb.empty:
        return 0.0
    bound = design.emptying_bound
    try:
        arr = first_arrival(o, amb.b, lambda v: abs(v - u1) <= STATE_TOL, after=0.0)
        tau = arr.time
    except HorizonTooShort:
        tau = math.inf
    tr = o.trace(amb.a)
    ts = np.concatenate(([0.0], tr.times))
    jam = [t for t, v in zip(ts, np.maximum(tr.left, tr.right)) if v >= u2 - STATE_TOL and t < tau]
    if jam:
        raise Congested(f"fully congested state observed at x=a at t={jam[0]:.17g} before the window emptied")
    if not math.isfinite(tau):
        if bound < o.T:
            raise Congested("the window did not empty within the transit bound; a fully congested region blocks it")
        raise HorizonTooShort(f"window not yet empty at T={o.T:.17g}; the emptying bound is {bound:.17g}")
    if tau > bound * (1 + 1e-9) + 1e-12:
        raise InconsistentObservation(f"emptying time {tau:.17g} exceeds its bound {bound:.17g}")
    return tau


def stationary_observables(o: Observer, design: ProbeDesign, tau_tilde: float) -> StationaryObservables:
    amb, f = design.ambient, design.ambient.f
    base = design.base
    try:
        head_a = first_arrival(o, amb.a, _above(base), after=tau_tilde)
    except HorizonTooShort as exc:
        raise HorizonTooShort(f"the probing fan never reached x=a before T: {exc}") from None
    try:
        head_b = first_arrival(o, amb.b, _above(amb.u_b if design.fast else base), after=tau_tilde)
    except HorizonTooShort as exc:
        raise HorizonTooShort(f"no transmitted wave reached x=b before T: {exc}") from None
    try:
        refl = first_arrival(o, amb.a, _above(f.umax), after=tau_tilde, side="right")
    except HorizonTooShort as exc:
        raise HorizonTooShort(f"no reflected shock reached x=a before T (k may equal k_o): {exc}") from None
    w_prime = refl.u_right
    w = branch_inverse(f, float(f.f(w_prime)), INCREASING)
    return StationaryObservables(tau_tilde, head_a.time, head_a.after, head_b.time, head_b.after,
                                 refl.time, refl.u_left, w_prime, w, refl.speed)


def recover_k1_stationary(o: Observer, design: ProbeDesign, tau_tilde: float) -> tuple:
    obs = stationary_observables(o, design, tau_tilde)
    amb, f = design.ambient, design.ambient.f
    k1 = amb.k_o * float(f.f(obs.w_prime)) / f.fmax
    return k1, obs


# ---------------------------------------------------------------------------
# generation point of the reflected shock


@dataclass(frozen=True)
class StepFan:
    """Straight fronts of a staircase fan centred at ``(0, center)``, keyed by their left state."""

    center: float
    left_states: np.ndarray
    right_states: np.ndarray
    speeds: np.ndarray

    @classmethod
    def from_trace(cls, o: Observer, x: float, center: float, t_lo: float, t_hi: float) -> "StepFan":
        """Fan fronts crossing ``x`` in ``(t_lo, t_hi)`` read off the trace at ``x``."""
        tr = o.trace(x)
        ls, rs, sp = [], [], []
        for i, t in enumerate(tr.times):
            if not t_lo < t < t_hi:
                continue
            before, after = float(tr.left[i]), float(tr.left[i + 1])
            if after <= before:
                continue
            ls.append(after)
            rs.append(before)
            sp.append((x - center) / t)
        if not ls:
            raise InconsistentObservation(f"no fan fronts crossed x={x} in ({t_lo}, {t_hi})")
        return cls(float(center), np.array(ls), np.array(rs), np.array(sp))

    def front_with_left(self, u: float) -> int:
        i = int(np.argmin(np.abs(self.left_states - u)))
        if abs(self.left_states[i] - u) > STATE_TOL:
            raise InconsistentObservation(f"no observed fan front with left state {u}")
        return i


@dataclass(frozen=True)
class ShockPath:
    """Piecewise-linear backward path of the reflected shock through a step fan."""

    times: np.ndarray  # decreasing, starting at tau_a
    positions: np.ndarray
    speeds: np.ndarray  # speed on [times[i+1], times[i]]
    trigger_speed: float

    def __call__(self, t: float) -> float:
        # extend the oldest segment backwards if needed
        i = int(np.searchsorted(-self.times, -t, side="left")) - 1
        i = min(max(i, 0), self.speeds.size - 1)
        return float(self.positions[i] + self.speeds[i] * (t - self.times[i]))


def backward_shock_path(fan: StepFan, f: FluxCurve, k_o: float, tau_a: float, a: float, v_a: float,
                        w_prime: float) -> ShockPath:
    """Trace the reflected shock back from ``(tau_a, a)`` until it sits on the front that triggered it.

    The shock's left state climbs down the staircase as time runs backwards;
    each segment starts on the fan front whose left state it carries.  The
    trigger is the first fan front whose left state carries more flux than
    the obstruction admits.
    """
    threshold = k_o * float(f.f(w_prime)) + DISPATCH_TOL
    times, pos, speeds = [tau_a], [a], []
    u = v_a
    t, x = tau_a, a
    for _ in range(fan.left_states.size + 1):
        i = fan.front_with_left(u)
        s_front = float(fan.speeds[i])
        sigma = k_o * chord(f, u, w_prime)
        tc = (x - sigma * t - fan.center) / (s_front - sigma)
        speeds.append(sigma)
        if not k_o * float(f.f(fan.right_states[i])) > threshold:
            return ShockPath(np.array(times), np.array(pos), np.array(speeds), s_front)
        x = x + sigma * (tc - t)
        t = tc
        times.append(t)
        pos.append(x)
        u = float(fan.right_states[i])
    raise InconsistentObservation("the reflected shock path never reached its trigger front")


def chi_root(path_at, trig_speed: float, center: float, a: float, tau_a: float) -> tuple:
    """Zero of ``chi(xi) = xi - path(tau_bar(xi))`` with ``tau_bar(xi) = (xi - center)/trig_speed``.

    Returns ``(xi1, chi_lo, chi_hi)``.
    """

    def chi(xi):
        return xi - path_at((xi - center) / trig_speed)

    lo, hi = a, center + trig_speed * tau_a
    c_lo, c_hi = chi(lo), chi(hi)
    if c_lo >= -1e-13 * max(1.0, abs(a)):
        return a, c_lo, c_hi
    if not c_hi > 0:
        raise InconsistentObservation(f"chi does not change sign on [{lo}, {hi}]: chi={c_lo:.3e}, {c_hi:.3e}")
    xi = brentq(chi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return xi, c_lo, c_hi


def xi1_discrete(o: Observer, design: ProbeDesign, obs: StationaryObservables) -> float:
    amb, f = design.ambient, design.ambient.f
    fan = StepFan.from_trace(o, amb.a, design.fan_center, obs.tau_tilde, obs.tau_a)
    path = backward_shock_path(fan, f, amb.k_o, obs.tau_a, amb.a, obs.v_a, obs.w_prime)
    xi, _, _ = chi_root(path, path.trigger_speed, design.fan_center, amb.a, obs.tau_a)
    return xi


@dataclass(frozen=True)
class CenteredFan:
    """Continuous fan ``k_o f'(eta) = (x - center)/t`` between ``u_hi`` (left) and ``u_lo`` (right)."""

    f: FluxCurve
    k_o: float
    center: float
    u_hi: float
    u_lo: float

    def eta(self, t: float, x: float) -> float:
        z = (x - self.center) / t
        if z <= self.k_o * float(self.f.df(self.u_hi)):
            return self.u_hi
        if z >= self.k_o * float(self.f.df(self.u_lo)):
            return self.u_lo
        if self.f.quadratic is not None:
            qa, qb = self.f.quadratic
            return 0.5 * (qb - z / (self.k_o * qa))
        return brentq(lambda u: self.k_o * float(self.f.df(u)) - z, self.u_lo, self.u_hi, xtol=1e-15)


def xi1_continuum(fan: CenteredFan, tau_a: float, a: float, w_prime: float, w: float) -> tuple:
    """Generation point from the backward generalized characteristic through a continuous fan.

    Returns ``(xi1, solution)`` where ``solution`` is the dense ODE output.
    """
    f, k_o = fan.f, fan.k_o
    s_w = k_o * float(f.df(w))
    t_lo = (a - fan.center) / s_w

    def rhs(t, y):
        return [k_o * chord(f, fan.eta(t, y[0]), w_prime)]

    sol = solve_ivp(rhs, (tau_a, t_lo), [a], method="RK45", rtol=1e-11, atol=1e-13, dense_output=True)
    if not sol.success:
        raise InconsistentObservation(f"backward characteristic integration failed: {sol.message}")

    def path(t):
        return float(sol.sol(min(max(t, t_lo), tau_a))[0])

    xi, _, _ = chi_root(path, s_w, fan.center, a, tau_a)
    return xi, sol


def xi1_quadratic(f: FluxCurve, k_o: float, center: float, tau_a: float, a: float, w_prime: float,
                  w: float) -> float:
    """Closed form for ``f = p u (q - u)``: the characteristic solves ``y' = A + y/(2t)``."""
    if f.quadratic is None:
        raise ConfigError("closed form needs a quadratic flux")
    p, q = f.quadratic
    A = k_o * p * (0.5 * q - w_prime)
    C = (a - center - 2.0 * A * tau_a) / math.sqrt(tau_a)
    s_w = k_o * float(f.df(w))
    root = C / (s_w - 2.0 * A)
    tau_bar = root * root
    if root <= 0 or tau_bar > tau_a * (1 + 1e-12):
        return a
    return center + s_w * tau_bar


def recover_xi1_stationary(o: Observer, design: ProbeDesign, obs: StationaryObservables,
                           method: str = "discrete") -> float:
    amb, f = design.ambient, design.ambient.f
    if abs(obs.w - obs.v_a) <= STATE_TOL:
        return amb.a
    if method == "discrete":
        return xi1_discrete(o, design, obs)
    fan = CenteredFan(f, amb.k_o, design.fan_center, f.umax, design.base)
    if method == "tangent":
        return xi1_continuum(fan, obs.tau_a, amb.a, obs.w_prime, obs.w)[0]
    if method == "closed-form":
        return xi1_quadratic(f, amb.k_o, design.fan_center, obs.tau_a, amb.a, obs.w_prime, obs.w)
    raise ConfigError(f"unknown method '{method}'")


# ---------------------------------------------------------------------------
# width


def recover_width(f: FluxCurve, k_o: float, k1: float, obs: StationaryObservables, xi1: float, a: float,
                  b: float, base: tuple) -> float:
    """Width from the transit time of the leading fan front across the window.

    ``base = (state left of xi1, inside, right of xi2)`` ahead of the front.
    The front crosses ``[a, xi1]``, ``[xi1, xi2]`` and ``[xi2, b]`` at the
    chord speeds of its observed (or flux-matched) states.
    """
    ua, uw, ub = base
    h = branch_inverse(f, k_o * float(f.f(obs.v_b)) / k1, INCREASING)
    s_a = k_o * chord(f, ua, obs.u_e)
    s_b = k_o * chord(f, ub, obs.v_b)
    s_1 = k1 * chord(f, uw, h)
    gap = 1.0 / s_1 - 1.0 / s_b
    if abs(gap) < 1e-14:
        raise InconsistentObservation("transit speeds inside and outside the obstruction coincide")
    return (obs.tau_b - obs.tau_o - (xi1 - a) / s_a - (b - xi1) / s_b) / gap


def recover_width_tangent(f: FluxCurve, k_o: float, k1: float, tau_b: float, tau_o: float, a: float,
                          b: float) -> float:
    """Width from characteristic speeds at the fan edge (sign-corrected transit identity)."""
    u1 = f.lo
    omega = branch_inverse(f, k_o * float(f.f(u1)) / k1, INCREASING)
    s_o, s_1 = k_o * float(f.df(u1)), k1 * float(f.df(omega))
    if abs(s_o - s_1) < 1e-14:
        raise InconsistentObservation("resonant transit speeds; the width is undetermined")
    return k_o * k1 * float(f.df(omega)) / (s_o - s_1) * ((tau_b - tau_o) * float(f.df(u1)) - (b - a) / k_o)


# ---------------------------------------------------------------------------
# report


@dataclass
class ObstructionReport:
    k1: float
    xi1: float
    xi2: float
    k_o: float
    a: float
    b: float
    protocol: str
    unique: bool = True
    observables: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def obstruction(self) -> Obstruction:
        return Obstruction(self.k1, self.xi1, self.xi2, self.k_o, self.a, self.b)

    @property
    def coefficient(self) -> SpatialCoeff:
        return SpatialCoeff((self.xi1, self.xi2), (self.k_o, self.k1, self.k_o))

    def lines(self) -> list:
        out = [f"protocol = {self.protocol}",
               f"k1 = {self.k1:.17g}",
               f"xi1 = {self.xi1:.17g}",
               f"xi2 = {self.xi2:.17g}",
               f"unique = {str(self.unique).lower()}"]
        for key, val in self.observables.items():
            if val is None:
                continue
            out.append(f"{key} = {val:.17g}" if isinstance(val, float) else f"{key} = {val}")
        out.extend(f"note: {n}" for n in self.notes)
        return out


def reconstruct_stationary(o: Observer, design: ProbeDesign, method: str = "discrete") -> ObstructionReport:
    amb, f = design.ambient, design.ambient.f
    if o.mode != "partial" or o.window != (amb.a, amb.b):
        raise ConfigError("the observer must withhold exactly the window (a, b)")
    tau_tilde = emptying_time(o, design)
    k1, obs = recover_k1_stationary(o, design, tau_tilde)
    if not 0 < k1 < amb.k_o:
        raise InconsistentObservation(f"reflected states give k1={k1}, outside (0, k_o)")
    if design.fast and abs(float(f.f(obs.w_prime)) - float(f.f(amb.u_a))) <= 1e-12:
        raise InconsistentObservation("the reflected shock carries the ambient flux: the window was congested")
    if amb.u_b > f.umax + STATE_TOL and abs(float(f.f(obs.w_prime)) - float(f.f(amb.u_b))) <= 1e-12:
        # a queue behind b caps the throughput below the obstruction capacity
        raise Congested("the congested state beyond b spilled back to x=a; the obstruction capacity never binds "
                        "and k1 cannot be separated from the downstream queue")
    xi1 = recover_xi1_stationary(o, design, obs, method)
    if design.fast:
        omega = branch_inverse(f, amb.k_o * float(f.f(amb.u_a)) / k1, INCREASING)
        base = (amb.u_a, omega, amb.u_b)
    else:
        base = (f.lo, f.lo, f.lo)
    if method == "discrete":
        width = recover_width(f, amb.k_o, k1, obs, xi1, amb.a, amb.b, base)
    else:
        width = recover_width_tangent(f, amb.k_o, k1, obs.tau_b, obs.tau_o, amb.a, amb.b)
    notes = amb.flags()
    return ObstructionReport(k1, xi1, xi1 + width, amb.k_o, amb.a, amb.b,
                             "stationary-fast" if design.fast else "stationary",
                             True, obs.as_dict() | {"x_tilde": design.x_tilde, "y_tilde": design.y_tilde,
                                                    "method": method}, notes)


def fast_probe_stationary(world: HiddenWorld, ambient: StationaryAmbient, x_tilde: float, T: float,
                          method: str = "discrete") -> ObstructionReport:
    """Probe without emptying; restart with the emptying probe if the window turns out congested."""
    design = fast_probe_design(ambient, x_tilde)
    o = world.observe(design.left, T)
    f = ambient.f
    try:
        refl = first_arrival(o, ambient.a, _above(f.umax), after=0.0, side="right")
    except HorizonTooShort:
        refl = None
    if refl is not None and abs(float(f.f(refl.u_right)) - float(f.f(ambient.u_a))) <= 1e-12:
        # the window was congested from the start; its state at refl.time is stationary again
        tau = refl.time
        restarted = world.restarted(o, tau)
        amb2 = StationaryAmbient(f, ambient.k_o, refl.u_right, refl.u_right, ambient.a, ambient.b)
        tail = restarted.tail
        b_state = tail(ambient.b + 1e-9 * max(1.0, abs(ambient.b)))
        amb2 = StationaryAmbient(f, ambient.k_o, refl.u_right, b_state, ambient.a, ambient.b) \
            if abs(float(f.f(b_state)) - float(f.f(refl.u_right))) <= 1e-12 else amb2
        design2 = probe_stationary(amb2, x_tilde)
        o2 = restarted.observe(design2.left, T)
        rep = reconstruct_stationary(o2, design2, method)
        rep.protocol = "stationary-fast-restarted"
        rep.notes.append(f"congestion detected at t={tau:.17g}; restarted with the emptying probe")
        rep.observables["restart_time"] = tau
        return rep
    return reconstruct_stationary(o, design, method)


# ---------------------------------------------------------------------------
# constant-data protocol


REFLECTIVE = "reflective"
TRANSMISSIVE = "transmissive"
INVISIBLE = "invisible"


@dataclass
class ConstantDataFeatures:
    """Observed wave features for constant initial data ``ubar``.

    ``t_a, v_o, sigma_a``: the backward shock at ``a`` and its right state.
    ``t_b, v_1, sigma_b``: the first shock at ``b`` and its left state.
    ``rarefaction``: ``(t_r, v_hi, v_lo)`` for the first fan front at ``b``
    after that shock, when one was observed.
    """

    ubar: float
    k_o: float
    a: float
    b: float
    t_a: float | None = None
    v_o: float | None = None
    sigma_a: float | None = None
    t_b: float | None = None
    v_1: float | None = None
    sigma_b: float | None = None
    rarefaction: tuple | None = None

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "rarefaction"}
        if self.rarefaction is not None:
            d["t_r"], d["v_r_hi"], d["v_r_lo"] = self.rarefaction
        return d


def classify_constant_case(o: Observer, ubar: float, k_o: float) -> tuple:
    """Case label and the observed features."""
    a, b = o.window
    f = o.f
    if not f.lo <= ubar < f.umax:
        raise ConfigError("constant data must lie in [u1, u^m)")
    feats = ConstantDataFeatures(ubar, k_o, a, b)
    try:
        ra = first_arrival(o, a, _above(ubar), after=0.0, side="right")
        feats.t_a, feats.v_o, feats.sigma_a = ra.time, ra.u_right, ra.speed
    except HorizonTooShort:
        ra = None
    try:
        rb = first_arrival(o, b, lambda v: abs(v - ubar) > STATE_TOL, after=0.0)
        feats.t_b, feats.v_1, feats.sigma_b = rb.time, rb.u_left, rb.speed
    except HorizonTooShort:
        rb = None
    if rb is not None:
        try:
            rr = first_arrival(o, b, lambda v: True, after=rb.time)
            if rr.u_left > rr.u_right + STATE_TOL:
                feats.rarefaction = (rr.time, rr.u_left, rr.u_right)
        except HorizonTooShort:
            pass
    if ra is not None and ra.u_right >= f.hi - STATE_TOL:
        raise Congested("fully congested state reached x=a")
    if ra is not None:
        return REFLECTIVE, feats
    if rb is not None:
        return TRANSMISSIVE, feats
    return INVISIBLE, feats


def _inner(f: FluxCurve, k_o: float, k1: float, v: float) -> float:
    return branch_inverse(f, k_o * float(f.f(v)) / k1, INCREASING)


def _transit_speeds(f: FluxCurve, k_o: float, k1: float, v_hi: float, v_lo: float) -> tuple:
    """Speeds of one fan front inside (``k1``) and outside (``k_o``) the obstruction."""
    h_hi, h_lo = _inner(f, k_o, k1, v_hi), _inner(f, k_o, k1, v_lo)
    return k1 * chord(f, h_lo, h_hi), k_o * chord(f, v_lo, v_hi)


def reconstruct_reflective(f: FluxCurve, feats: ConstantDataFeatures, verify_tol: float = 1e-9,
                           tangent: bool = False) -> ObstructionReport:
    if feats.t_a is None or feats.v_o is None or feats.sigma_a is None:
        raise InconsistentObservation("reflective reconstruction needs the backward shock at a")
    if not feats.sigma_a < 0:
        raise InconsistentObservation(f"backward shock at a must move left, got speed {feats.sigma_a}")
    if feats.t_b is None or feats.sigma_b is None:
        raise HorizonTooShort("no shock reached x=b before T")
    if not feats.sigma_b > 0:
        raise InconsistentObservation(f"shock at b must move right, got speed {feats.sigma_b}")
    k_o, a, b = feats.k_o, feats.a, feats.b
    k1 = k_o * float(f.f(feats.v_o)) / f.fmax
    xi1 = a - feats.sigma_a * feats.t_a
    notes = []
    verified = None
    if feats.v_1 is not None:
        verified = abs(k_o * float(f.f(feats.v_1)) / float(f.f(feats.ubar)) - k1) <= verify_tol * max(1.0, k1)
    if verified is None or verified:
        xi2 = b - feats.sigma_b * feats.t_b
        if verified is None:
            notes.append("left state of the b-shock not given; flux balance of the shock left unchecked")
    else:
        if feats.rarefaction is None:
            raise HorizonTooShort("the b-shock was modified by the fan, but no fan front reached b before T")
        t_r, v_hi, v_lo = feats.rarefaction
        if tangent:
            s1 = k1 * float(f.df(_inner(f, k_o, k1, v_lo)))
            so = k_o * float(f.df(v_lo))
        else:
            s1, so = _transit_speeds(f, k_o, k1, v_hi, v_lo)
        # t_r = (xi2 - xi1)/s1 + (b - xi2)/so
        xi2 = (t_r + xi1 / s1 - b / so) / (1.0 / s1 - 1.0 / so)
        notes.append("b-shock modified by the fan; xi2 from the fan transit time")
    return ObstructionReport(k1, xi1, xi2, k_o, a, b, "constant-reflective", True,
                             feats.as_dict() | {"verified": verified}, notes)


def reconstruct_transmissive(f: FluxCurve, feats: ConstantDataFeatures, tangent: bool = False) -> ObstructionReport:
    if feats.t_b is None or feats.v_1 is None or feats.sigma_b is None:
        raise InconsistentObservation("transmissive reconstruction needs the shock at b")
    if not feats.sigma_b > 0:
        raise InconsistentObservation(f"shock at b must move right, got speed {feats.sigma_b}")
    if feats.rarefaction is None:
        raise HorizonTooShort("no fan front reached x=b after the shock before T")
    k_o, a, b = feats.k_o, feats.a, feats.b
    k1 = k_o * float(f.f(feats.v_1)) / float(f.f(feats.ubar))
    xi2 = b - feats.sigma_b * feats.t_b
    t_r, v_hi, v_lo = feats.rarefaction
    if tangent:
        s1 = k1 * float(f.df(_inner(f, k_o, k1, v_lo)))
        so = k_o * float(f.df(v_lo))
    else:
        s1, so = _transit_speeds(f, k_o, k1, v_hi, v_lo)
    xi1 = xi2 - s1 * (t_r - (b - xi2) / so)
    return ObstructionReport(k1, xi1, xi2, k_o, a, b, "constant-transmissive", True, feats.as_dict(), [])


def transmissive_adjacent(f: FluxCurve, feats: ConstantDataFeatures, delta: float) -> ObstructionReport:
    """Triple whose leading fan step reaches ``b`` together with the shock.

    Used when the shock at ``b`` has already met the fan; the step heights
    follow the front-tracking split of the inner fan with parameter ``delta``.
    """
    k_o, a, b, ubar = feats.k_o, feats.a, feats.b, feats.ubar
    k1 = k_o * float(f.f(feats.v_1)) / float(f.f(ubar))
    xi2 = b - feats.sigma_b * feats.t_b
    top = branch_inverse(f, k_o * float(f.f(ubar)) / k1, INCREASING)
    n = max(1, math.ceil(abs(top - ubar) / delta - 1e-9))
    h_hi = float(np.linspace(top, ubar, n + 1)[-2])
    v_hi = branch_inverse(f, k1 * float(f.f(h_hi)) / k_o, INCREASING)
    s1 = k1 * chord(f, ubar, h_hi)
    so = k_o * chord(f, feats.v_1, v_hi)
    xi1 = xi2 - s1 * (feats.t_b - (b - xi2) / so)
    return ObstructionReport(k1, xi1, xi2, k_o, a, b, "constant-transmissive", False, feats.as_dict(),
                             ["shock at b already interacted with the fan: the triple is one of many "
                              "reproducing the traces"])


def trace_mismatch(o: Observer, coeff: SpatialCoeff, initial: Profile | None = None) -> float:
    """Largest per-unit-time L1 gap between observed and re-simulated traces at ``a`` and ``b``."""
    s = o.scenario
    init = s.initial if initial is None else initial
    twin = Observer(Scenario(s.f, coeff, init, s.delta, o.T), mode="partial", window=o.window)
    gap = 0.0
    for x in o.window:
        for side in ("left", "right"):
            gap = max(gap, o.trace(x).l1_distance(twin.trace(x), side) / max(o.T, 1e-300))
    return gap


def reconstruct_constant_data(o: Observer, ubar: float, k_o: float = 1.0, match_tol: float = 1e-8,
                              tangent: bool = False) -> ObstructionReport:
    """Classify, reconstruct, and confirm by re-simulation."""
    case, feats = classify_constant_case(o, ubar, k_o)
    if case == INVISIBLE:
        raise HorizonTooShort("traces stay at the constant state up to T: the obstruction is invisible "
                              "(no obstruction, or its waves cancel inside the window)")
    f = o.f
    if case == REFLECTIVE:
        rep = reconstruct_reflective(f, feats, tangent=tangent)
    else:
        try:
            rep = reconstruct_transmissive(f, feats, tangent=tangent)
        except HorizonTooShort:
            rep = None
        if rep is None or not _admissible(rep) or trace_mismatch(o, rep.coefficient) > match_tol:
            rep = transmissive_adjacent(f, feats, o.scenario.delta)
    if not _admissible(rep):
        raise InconsistentObservation(f"observed features give an inadmissible obstruction "
                                      f"({rep.k1}, {rep.xi1}, {rep.xi2})")
    rep.observables["trace_mismatch"] = trace_mismatch(o, rep.coefficient)
    return rep


def _admissible(rep: ObstructionReport) -> bool:
    return 0 < rep.k1 < rep.k_o and rep.a <= rep.xi1 < rep.xi2 <= rep.b
