import csv
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frontrecon.errors import ConfigError
from frontrecon.fluxlib import FluxCurve, Obstruction
from frontrecon.illposed import (
    SpanCoefficient,
    export_family,
    harmonic_value,
    indistinguishable,
    merge,
    probe_data,
    refracted_transit_time,
    shift,
    swap,
    transit_sum_exact,
    widen,
)
from frontrecon.recon_obstruction import HiddenWorld, StationaryAmbient, probe_stationary, reconstruct_stationary, \
    stationary_tail

F = FluxCurve.quadratic_flux()
TWO = SpanCoefficient(0.5, (0.5, 1.0), (0.4, 0.7), 1.0)
THREE = SpanCoefficient(0.3, (0.4, 0.6, 0.8), (0.3, 0.5, 0.8), 1.0)
WINDOW = (0.0, 3.0)


def span_value(c, x):
    i = int(np.searchsorted(c.breakpoints, x, side="right"))
    return c.k_o if i == 0 or i > len(c.ks) else c.ks[i - 1]


def test_widen_example():
    m = widen(SpanCoefficient(0.0, (0.5, 1.0), (0.25, 0.5), 1.0), 1.0)
    assert m.chis == (0.5, 2.0) and abs(m.ks[1] - 2 / 3) <= 1e-15
    assert widen(TWO, 0.0) is TWO


def test_widen_overflow():
    with pytest.raises(ConfigError):
        widen(TWO, 1.1, WINDOW)


def test_shift_example():
    m = shift(SpanCoefficient(0.0, (1.5, 1.0), (0.25, 0.5), 1.0), 1.0)
    assert m.chis == (0.5, 2.0) and abs(m.ks[1] - 1 / 3) <= 1e-15
    assert shift(TWO, 0.0) is TWO
    with pytest.raises(ConfigError):
        shift(TWO, 0.5)


def test_merge_examples():
    fam = merge(SpanCoefficient(0.0, (0.5, 1.0, 1.0), (0.25, 0.5, 0.99999999), 1.0))
    assert abs(fam.ell - 2 / 3) <= 1e-8
    assert abs(harmonic_value((1.0, 1.0), (0.5, 1.0)) - 2 / 3) <= 1e-15
    assert abs(harmonic_value((0.7, 0.7), (0.4, 0.4)) - 0.4) <= 1e-15
    with pytest.raises(ConfigError):
        merge(SpanCoefficient(0.0, (0.5, 1.0, 1.0), (0.5, 0.25, 0.8), 1.0))


def test_swap_examples():
    s = swap(THREE)
    assert s.chis == (0.4, 0.8, 0.6) and s.ks == (0.3, 0.8, 0.5) and s.end == THREE.end
    # equal middle values: the swap only relabels one span of constant value
    same = SpanCoefficient(0.3, (0.4, 0.6, 0.8), (0.3, 0.5, 0.5), 1.0)
    xs = np.linspace(0.0, 3.0, 301)
    for x in xs:
        assert span_value(swap(same), x) == span_value(same, x)


def test_transit_sums_exact_for_rationals():
    base = SpanCoefficient(0.0, (0.5, 1.0), (0.25, 0.5), 1.0)
    m = widen(base, 1.0)
    assert transit_sum_exact(m.chis, (m.ks[0], Fraction(2, 3))) == transit_sum_exact(base.chis, base.ks) + 1


def test_collapsed_coefficient_is_reconstructed():
    ellp = merge(THREE).collapsed
    obs = Obstruction(ellp.ks[0], ellp.xi_start, ellp.end, 1.0, *WINDOW)
    world = HiddenWorld(F, obs.coefficient(), stationary_tail(F, obs, 0.0), *WINDOW, 1e-3)
    d = probe_stationary(StationaryAmbient(F, 1.0, 0.0, 0.0, *WINDOW), 1.0)
    rep = reconstruct_stationary(world.observe(d.left, 40.0), d)
    assert abs(rep.k1 - ellp.ks[0]) <= 1e-12
    assert abs(rep.xi1 - ellp.xi_start) <= 1e-12 and abs(rep.xi2 - ellp.end) <= 1e-12


def test_same_coefficient_has_zero_deviation():
    init = probe_data(F, 0.0, 0.1)
    ok, cmp = indistinguishable(F, TWO.coefficient(), TWO.coefficient(), WINDOW, init, 20.0, 1e-3)
    assert ok and cmp.deviation == 0.0


def test_family_members_stay_close_and_the_control_does_not():
    init, d = probe_data(F, 0.0, 0.1), 1e-3
    pairs = [(TWO, widen(TWO, 0.5, WINDOW)), (TWO, shift(TWO, 0.2)), (THREE, merge(THREE).merged),
             (THREE, swap(THREE))]
    devs = [indistinguishable(F, A.coefficient(), B.coefficient(), WINDOW, init, 20.0, d)[1].deviation
            for A, B in pairs]
    assert all(v <= 5 * d for v in devs)
    control = SpanCoefficient(0.5, (0.5, 1.0), (0.44, 0.7), 1.0)
    _, c = indistinguishable(F, TWO.coefficient(), control.coefficient(), WINDOW, init, 20.0, d)
    assert c.deviation > max(devs)


def test_export(tmp_path):
    members = {"base": TWO, "wide": widen(TWO, 0.5)}
    paths = export_family(tmp_path, members)
    assert [p.name for p in paths] == ["base.csv", "wide.csv", "certificate.csv"]
    rows = list(csv.DictReader(open(tmp_path / "certificate.csv")))
    # the widened span takes 0.5 of length from the k_o background
    assert abs(float(rows[1]["transit_sum"]) - float(rows[0]["transit_sum"]) - 0.5) <= 1e-14


# generated members keep their transit sums and ranges


@given(st.floats(0.1, 1.0), st.floats(0.1, 1.0), st.floats(0.05, 0.5), st.floats(0.01, 0.4), st.floats(0.0, 2.0))
def test_widen_keeps_transit_sum(c1, c2, k1, gap, eps):
    k2 = k1 + gap
    base = SpanCoefficient(0.0, (c1, c2), (k1, k2), 1.0)
    m = widen(base, eps)
    extra = eps / base.k_o
    assert abs(m.transit_sum() - (base.transit_sum() + extra)) <= 1e-14 * max(1.0, m.transit_sum())
    assert k2 <= m.ks[1] < 1.0


@given(st.floats(0.1, 1.0), st.floats(0.1, 1.0), st.floats(0.05, 0.5), st.floats(0.01, 0.4), st.floats(0.0, 0.99))
def test_shift_keeps_transit_sum(c1, c2, k1, gap, frac):
    k2 = k1 + gap
    base = SpanCoefficient(0.0, (c1, c2), (k1, k2), 1.0)
    m = shift(base, frac * c1)
    assert abs(m.transit_sum() - base.transit_sum()) <= 1e-14 * max(1.0, base.transit_sum())
    assert abs(m.end - base.end) <= 1e-15
    assert k1 < m.ks[1] <= k2


@given(st.lists(st.floats(0.1, 1.0), min_size=3, max_size=3), st.lists(st.floats(0.05, 0.95), min_size=3,
                                                                       max_size=3, unique=True))
def test_merge_keeps_transit_sum(chis, ks):
    base = SpanCoefficient(0.0, tuple(chis), tuple(sorted(ks)), 1.0)
    fam = merge(base)
    for m in (fam.merged, fam.collapsed):
        assert abs(m.transit_sum() - base.transit_sum()) <= 1e-14 * max(1.0, base.transit_sum())
        assert abs(m.end - base.end) <= 1e-15
    assert base.ks[1] <= fam.ell <= base.ks[2]


def test_refracted_transit_times_agree_at_small_flux():
    # a small flux level crosses each span at about its own coefficient, so the transit times nearly agree
    q = 1e-6
    t0 = refracted_transit_time(F, TWO, q, 3.0)
    t1 = refracted_transit_time(F, widen(TWO, 0.5), q, 3.0)
    assert abs(t0 - t1) <= 1e-5 * t0
    assert np.isinf(refracted_transit_time(F, TWO, 0.2, 3.0))
