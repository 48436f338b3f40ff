import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frontrecon.errors import ConfigError, Congested, HorizonTooShort, InconsistentObservation
from frontrecon.fluxlib import FluxCurve, Obstruction, SpatialCoeff
from frontrecon.fronttrack import Profile
from frontrecon.recon_obstruction import (
    INVISIBLE,
    REFLECTIVE,
    TRANSMISSIVE,
    CenteredFan,
    ConstantDataFeatures,
    HiddenWorld,
    StationaryAmbient,
    StepFan,
    backward_shock_path,
    classify_constant_case,
    emptying_time,
    fast_probe_design,
    fast_probe_stationary,
    probe_stationary,
    reconstruct_constant_data,
    reconstruct_reflective,
    reconstruct_stationary,
    recover_width_tangent,
    stationary_observables,
    stationary_tail,
    trace_mismatch,
    xi1_continuum,
    xi1_quadratic,
)

from scenarios import quad_roots, random_constant_obstruction, random_stationary_obstruction

F = FluxCurve.quadratic_flux()


def stationary_world(k1, x1, x2, ua, delta=1e-3, a=0.0, b=1.0):
    obs = Obstruction(k1, x1, x2, 1.0, a, b)
    world = HiddenWorld(F, obs.coefficient(), stationary_tail(F, obs, ua), a, b, delta)
    return world, StationaryAmbient(F, 1.0, ua, ua, a, b)


def run_stationary(world, amb, T=20.0, method="discrete"):
    d = probe_stationary(amb, 1.0)
    for _ in range(6):
        try:
            o = world.observe(d.left, T)
            return reconstruct_stationary(o, d, method), o, d
        except HorizonTooShort:
            T *= 2
    raise AssertionError("horizon never long enough")


def constant_world(k1, x1, x2, b=2.0, delta=1e-3):
    obs = Obstruction(k1, x1, x2, 1.0, 0.0, b)
    return HiddenWorld(F, obs.coefficient(), None, 0.0, b, delta)


# probe design


def test_probe_offset_formula():
    amb = StationaryAmbient(F, 1.0, 1 / 3, 1 / 3, 0.0, 2.0)
    assert abs(amb.companion - 2 / 3) <= 1e-15
    d = probe_stationary(amb, 1.0)
    assert abs(d.y_tilde - 9.0) <= 1e-12
    assert d.left(d.fan_center - 1) == 0.5 and d.left(-5.0) == 0.0 and d.left(-0.5) == 1 / 3


def test_empty_ambient_needs_no_offset():
    d = probe_stationary(StationaryAmbient(F, 1.0, 0.0, 0.0, 0.0, 1.0), 1.0)
    assert d.y_tilde == 0.0 and d.fan_center == -1.0
    assert d.left(-2.0) == 0.5 and d.left(-0.5) == 0.0


def test_probe_preconditions():
    with pytest.raises(ConfigError):
        probe_stationary(StationaryAmbient(F, 1.0, 0.5, 0.5, 0.0, 1.0), 1.0)
    with pytest.raises(Congested):
        probe_stationary(StationaryAmbient(F, 1.0, 1.0, 1.0, 0.0, 1.0), 1.0)
    with pytest.raises(ConfigError):
        fast_probe_design(StationaryAmbient(F, 1.0, 0.8, 0.8, 0.0, 1.0), 1.0)
    with pytest.raises(ConfigError):
        StationaryAmbient(F, 1.0, 0.1, 0.2, 0.0, 1.0)


# stationary protocol


def test_emptying_time_matches_trace():
    world, amb = stationary_world(0.5, 0.3, 0.7, 0.1)
    d = probe_stationary(amb, 1.0)
    o = world.observe(d.left, 60.0)
    tau = emptying_time(o, d)
    tr = o.trace(1.0)
    first = next(t for t, v in zip(tr.times, tr.left[1:]) if v == 0.0)
    assert abs(tau - first) <= 1e-9 and tau <= d.emptying_bound
    world0, amb0 = stationary_world(0.5, 0.3, 0.7, 0.0)
    d0 = probe_stationary(amb0, 1.0)
    assert emptying_time(world0.observe(d0.left, 10.0), d0) == 0.0


@pytest.mark.parametrize("ua", [0.0, 0.1])
def test_stationary_reference_obstruction(ua):
    rep, o, _ = run_stationary(*stationary_world(0.5, 0.3, 0.7, ua))
    assert abs(rep.k1 - 0.5) <= 1e-12 and abs(rep.xi1 - 0.3) <= 1e-12 and abs(rep.xi2 - 0.7) <= 1e-12
    assert trace_mismatch(o, rep.coefficient) <= 1e-6


def test_generation_point_two_routes_agree():
    world, amb = stationary_world(0.5, 0.3, 0.7, 0.0)
    d = probe_stationary(amb, 1.0)
    o = world.observe(d.left, 20.0)
    ob = stationary_observables(o, d, emptying_time(o, d))
    fan = CenteredFan(F, 1.0, d.fan_center, F.umax, d.base)
    ode, _ = xi1_continuum(fan, ob.tau_a, 0.0, ob.w_prime, ob.w)
    closed = xi1_quadratic(F, 1.0, d.fan_center, ob.tau_a, 0.0, ob.w_prime, ob.w)
    assert abs(ode - closed) <= 1e-9


def test_chi_increases_along_the_bracket():
    world, amb = stationary_world(0.4, 0.25, 0.6, 0.0)
    d = probe_stationary(amb, 1.0)
    o = world.observe(d.left, 20.0)
    ob = stationary_observables(o, d, 0.0)
    fan = StepFan.from_trace(o, 0.0, d.fan_center, 0.0, ob.tau_a)
    path = backward_shock_path(fan, F, 1.0, ob.tau_a, 0.0, ob.v_a, ob.w_prime)
    hi = d.fan_center + path.trigger_speed * ob.tau_a
    xs = np.linspace(0.0, hi, 200)
    chi = np.array([x - path((x - d.fan_center) / path.trigger_speed) for x in xs])
    assert chi[0] < 0 < chi[-1] and np.all(np.diff(chi) > 0)


def test_tangent_route_converges_at_first_order():
    errs = []
    for delta in (2e-3, 1e-3, 5e-4):
        rep, _, _ = run_stationary(*stationary_world(0.5, 0.3, 0.7, 0.0, delta=delta), method="tangent")
        errs.append(max(abs(rep.k1 - 0.5), abs(rep.xi1 - 0.3), abs(rep.xi2 - 0.7)))
    assert all(1.6 <= a / b <= 2.4 for a, b in zip(errs, errs[1:]))


def test_no_obstruction_means_no_reflection():
    world = HiddenWorld(F, SpatialCoeff.constant(1.0), Profile.constant(0.0), 0.0, 1.0, 1e-3)
    amb = StationaryAmbient(F, 1.0, 0.0, 0.0, 0.0, 1.0)
    d = probe_stationary(amb, 1.0)
    with pytest.raises(HorizonTooShort, match="reflected"):
        reconstruct_stationary(world.observe(d.left, 20.0), d)


def test_downstream_queue_is_reported():
    k1 = 0.8
    ua = quad_roots(0.3 * k1 * 0.25)[1]
    world, amb = stationary_world(k1, 0.3, 0.7, ua)
    d = probe_stationary(amb, 1.0)
    with pytest.raises(Congested):
        reconstruct_stationary(world.observe(d.left, 60.0), d)


def test_width_resonance_is_an_error():
    with pytest.raises(InconsistentObservation):
        recover_width_tangent(F, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0)


def test_fast_probe_direct():
    world, amb = stationary_world(0.5, 0.3, 0.7, 0.1)
    rep = fast_probe_stationary(world, amb, 1.0, 30.0)
    slow, _, _ = run_stationary(world, amb, T=60.0)
    assert rep.protocol == "stationary-fast"
    assert max(abs(rep.k1 - 0.5), abs(rep.xi1 - 0.3), abs(rep.xi2 - 0.7)) <= 1e-9
    assert rep.observables["tau_a"] < slow.observables["tau_a"]


def test_fast_probe_restarts_on_a_jammed_window():
    ua = 0.1
    k1 = F.f(ua) / F.fmax
    obs = Obstruction(k1, 0.3, 0.7, 1.0, 0.0, 1.0)
    world = HiddenWorld(F, obs.coefficient(), stationary_tail(F, obs, ua, omega=0.5), 0.0, 1.0, 1e-3)
    rep = fast_probe_stationary(world, StationaryAmbient(F, 1.0, ua, ua, 0.0, 1.0), 1.0, 60.0)
    assert rep.protocol == "stationary-fast-restarted"
    assert max(abs(rep.k1 - k1), abs(rep.xi1 - 0.3), abs(rep.xi2 - 0.7)) <= 1e-9


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0, 1, 2]))
def test_stationary_round_trip(seed, kind):
    k1, x1, x2, ua = random_stationary_obstruction(np.random.default_rng(seed), min(kind, 1))
    if kind == 2:
        ua = 1.0 - ua  # the congested state with the same flux
    try:
        rep, o, _ = run_stationary(*stationary_world(k1, x1, x2, ua))
    except Congested:
        assert kind == 2
        return
    assert max(abs(rep.k1 - k1), abs(rep.xi1 - x1), abs(rep.xi2 - x2)) <= 1e-9
    assert trace_mismatch(o, rep.coefficient) <= 1e-6


# constant-data protocol


def reference_features(**over):
    base = dict(ubar=1 / 3, k_o=1.0, a=0.0, b=2.0, t_a=0.5, v_o=5 / 6, sigma_a=-1 / 6, t_b=0.66, sigma_b=0.5)
    return ConstantDataFeatures(**(base | over))


def test_reflective_formulas_on_stated_observations():
    rep = reconstruct_reflective(F, reference_features())
    assert abs(rep.k1 - 5 / 9) <= 1e-12 and abs(rep.xi1 - 1 / 12) <= 1e-12 and abs(rep.xi2 - 1.67) <= 1e-12


def test_shock_left_state_one_sixth_fails_the_flux_balance():
    # f(1/6)/f(1/3) = 5/8, not 5/9: that state cannot sit behind a plain shock leaving this obstruction
    feats = reference_features(v_1=1 / 6)
    assert abs(F.f(1 / 6) / F.f(1 / 3) - 5 / 8) <= 1e-15
    with pytest.raises(HorizonTooShort):
        reconstruct_reflective(F, feats)


def test_reflected_shock_must_move_left():
    with pytest.raises(InconsistentObservation):
        reconstruct_reflective(F, reference_features(sigma_a=0.0))


def test_reference_obstruction_from_simulated_traces():
    o = constant_world(5 / 9, 1 / 12, 1.67).observe_constant(1 / 3, 20.0)
    case, feats = classify_constant_case(o, 1 / 3, 1.0)
    assert case == REFLECTIVE and abs(feats.t_a - 0.5) <= 1e-12 and abs(feats.v_o - 5 / 6) <= 1e-12
    v1 = (1 - math.sqrt(41) / 9) / 2
    assert abs(feats.v_1 - v1) <= 1e-12
    rep = reconstruct_constant_data(o, 1 / 3)
    assert abs(rep.k1 - 5 / 9) <= 1e-12 and abs(rep.xi1 - 1 / 12) <= 1e-12 and abs(rep.xi2 - 1.67) <= 1e-12
    assert rep.observables["verified"] is True


def test_invisible_without_obstruction():
    o = constant_world(0.999999, 0.5, 0.5 + 1e-9).observe_constant(0.2, 1.0)
    case, _ = classify_constant_case(o, 0.2, 1.0)
    assert case == INVISIBLE
    with pytest.raises(HorizonTooShort):
        reconstruct_constant_data(o, 0.2)


def test_transmissive_case():
    o = constant_world(0.8, 0.5, 1.2).observe_constant(0.2, 20.0)
    assert classify_constant_case(o, 0.2, 1.0)[0] == TRANSMISSIVE
    rep = reconstruct_constant_data(o, 0.2)
    assert rep.unique and max(abs(rep.k1 - 0.8), abs(rep.xi1 - 0.5), abs(rep.xi2 - 1.2)) <= 1e-9


def test_fan_modified_shock_uses_the_transit_time():
    o = constant_world(0.5, 0.1, 0.3, b=4.0).observe_constant(1 / 3, 40.0)
    rep = reconstruct_constant_data(o, 1 / 3)
    assert rep.observables["verified"] is False
    assert max(abs(rep.k1 - 0.5), abs(rep.xi1 - 0.1), abs(rep.xi2 - 0.3)) <= 1e-9


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_constant_data_round_trip(seed):
    k1, x1, x2, ubar, b = random_constant_obstruction(np.random.default_rng(seed))
    o = constant_world(k1, x1, x2, b=b).observe_constant(ubar, 40.0)
    try:
        rep = reconstruct_constant_data(o, ubar)
    except HorizonTooShort:
        return  # the obstruction's waves cancel before reaching either edge
    # the traces are the contract; the triple is only pinned when it is unique
    assert rep.observables["trace_mismatch"] <= 1e-6
    if rep.unique:
        assert max(abs(rep.k1 - k1), abs(rep.xi1 - x1), abs(rep.xi2 - x2)) <= 1e-5
