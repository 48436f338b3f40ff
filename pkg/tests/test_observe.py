import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frontrecon.errors import AccessViolation, HorizonTooShort
from frontrecon.fluxlib import FluxCurve, SpatialCoeff
from frontrecon.fronttrack import Profile, Scenario
from frontrecon.illposed import SpanCoefficient, probe_data, swap
from frontrecon.observe import MaskedProfile, Observer, detect_stationary_jumps, first_arrival

F = FluxCurve.quadratic_flux()
ONE = SpatialCoeff.constant(1.0)


def shock_fan_flux():
    """Affine with slope -5/2 on [3/4, 7/8], convex beyond with f'(1) = 0."""

    def f(u):
        u = np.asarray(u, float)
        s = np.clip((u - 7 / 8) * 8, 0, None)
        return np.where(u <= 7 / 8, 0.8 - 2.5 * (u - 0.75), 0.4875 - (2.5 / 8) * (1 - (1 - s) ** 5) / 5)[()]

    def df(u):
        u = np.asarray(u, float)
        s = np.clip((u - 7 / 8) * 8, 0, None)
        return np.where(u <= 7 / 8, -2.5, -2.5 * (1 - s) ** 4)[()]

    return FluxCurve.from_callables(f, df, 0.75, 1.0, name="shock then fan")


def worked_observer(T=1.0, window=(0.0, 2.0)):
    k = SpatialCoeff((1 / 12, 1.67), (1.0, 5 / 9, 1.0))
    return Observer(Scenario(F, k, Profile.constant(1 / 3), 1e-3, T), mode="partial", window=window)


def test_full_snapshot_at_zero():
    init = Profile(np.array([0.0]), np.array([0.2, 0.6]))
    o = Observer(Scenario(F, ONE, init, 1e-2, 1.0))
    p = o.snapshot(0.0)
    assert np.array_equal(p.values, init.values)


def test_mask_is_enforced():
    o = worked_observer()
    with pytest.raises(AccessViolation):
        o.limits(0.5, 1.0)
    with pytest.raises(AccessViolation):
        o.trace(1.0)
    snap = o.snapshot(0.5)
    assert isinstance(snap, MaskedProfile)
    with pytest.raises(AccessViolation):
        snap(1.0)
    assert snap(0.0, "left") == 1 / 3 and snap(2.0) == 1 / 3
    assert all(not 0.0 < x < 2.0 for x, *_ in snap.jumps())


def test_shock_then_fan_snapshot():
    f = shock_fan_flux()
    o = Observer(Scenario(f, ONE, Profile(np.array([0.0]), np.array([0.75, 1.0])), 1 / 256, 1.0))
    p = o.snapshot(1.0)
    assert abs(p.breakpoints[0] + 2.5) <= 1e-12 and tuple(p.values[:2]) == (0.75, 0.875)
    assert -1e-3 < p.breakpoints[-1] <= 0.0 and p.values[-1] == 1.0
    assert abs(p.integral(-2.5, 0.0) - 9 / 4) <= 1e-12


def test_detect_stationary_jumps():
    init = Profile(np.array([-1.0, 2.0]), np.array([0.0, 1 / 3, 0.0]))
    o = Observer(Scenario(F, ONE, init, 1e-3, 0.1))
    assert detect_stationary_jumps(o, 0.05, 0.1, (-0.5, 1.5)) == []
    o = Observer(Scenario(F, SpatialCoeff((0.3,), (1.0, 0.7)), init, 1e-3, 0.1))
    assert detect_stationary_jumps(o, 0.05, 0.1, (-0.5, 1.5)) == [0.3]
    k = SpatialCoeff((0.2, 0.5, 0.9), (1.0, 0.7, 1.2, 0.9))
    o = Observer(Scenario(F, k, init, 1e-3, 0.05))
    assert detect_stationary_jumps(o, 0.025, 0.05, (-0.5, 1.5)) == [0.2, 0.5, 0.9]


def test_first_arrival_reflected_shock():
    o = worked_observer()
    arr = first_arrival(o, 0.0, lambda u: u > 0.5)
    assert abs(arr.time - 0.5) <= 1e-12
    assert (arr.u_left, arr.u_right) == (1 / 3, pytest.approx(5 / 6, abs=1e-12))
    assert abs(arr.speed + 1 / 6) <= 1e-9 and arr.kind == "shock"


def test_first_arrival_at_exit():
    # with the stated obstruction the transmitted state is (1 - sqrt(41)/9)/2, not 1/6
    o = worked_observer()
    arr = first_arrival(o, 2.0, lambda u: u < 1 / 3)
    v1 = (1 - math.sqrt(41) / 9) / 2
    assert abs(arr.u_left - v1) <= 1e-12 and arr.u_right == 1 / 3
    chord = (F.f(1 / 3) - F.f(v1)) / (1 / 3 - v1)
    assert abs(arr.speed - chord) <= 1e-9
    assert abs(arr.time - (2.0 - 1.67) / chord) <= 1e-12


def test_first_arrival_not_found():
    o = Observer(Scenario(F, ONE, Profile.constant(0.3), 1e-2, 1.0))
    with pytest.raises(HorizonTooShort):
        first_arrival(o, 0.0, lambda u: u > 0.5)


def test_hidden_swap_leaves_observations_unchanged():
    base = SpanCoefficient(0.3, (0.4, 0.6, 0.8), (0.3, 0.5, 0.8), 1.0)
    init = probe_data(F, 0.0, 0.1)
    obs = [Observer(Scenario(F, c.coefficient(), init, 2e-3, 15.0), mode="partial", window=(0.0, 3.0))
           for c in (base, swap(base))]
    for x in (0.0, 3.0):
        a, b = obs[0].trace(x), obs[1].trace(x)
        # identical up to the order of floating-point additions along the spans
        assert a.l1_distance(b, "left") <= 1e-12 and a.l1_distance(b, "right") <= 1e-12
    ja = np.array(obs[0].snapshot(15.0).jumps())
    jb = np.array(obs[1].snapshot(15.0).jumps())
    assert ja.shape == jb.shape and np.max(np.abs(ja - jb)) <= 1e-12


@given(st.floats(0.0, 0.45), st.floats(0.55, 1.0), st.floats(0.3, 2.0))
def test_measured_shock_speed_obeys_rankine_hugoniot(ul, ur, k):
    o = Observer(Scenario(F, SpatialCoeff.constant(k), Profile(np.array([0.0]), np.array([ul, ur])), 1e-2, 2.0))
    s = k * (F.f(ur) - F.f(ul)) / (ur - ul)
    x = s * 1.0
    assert abs(o.measure_speed(x, 1.0, ul, ur) - s) <= 1e-9
