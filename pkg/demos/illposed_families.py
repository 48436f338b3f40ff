"""Different coefficients that a boundary observer cannot easily tell apart.

Widening, shifting, merging and swapping spans of a coefficient keep the sum of
length over value, which is the small-signal transit time across the window.
The boundary traces of each pair are compared against a control whose transit
time differs.
"""

from frontrecon.fluxlib import FluxCurve
from frontrecon.illposed import SpanCoefficient, indistinguishable, merge, probe_data, shift, swap, widen

f = FluxCurve.quadratic_flux()
window = (0.0, 3.0)
two = SpanCoefficient(0.5, (0.5, 1.0), (0.4, 0.7), 1.0)
three = SpanCoefficient(0.3, (0.4, 0.6, 0.8), (0.3, 0.5, 0.8), 1.0)
pairs = {"widen": (two, widen(two, 0.5, window)), "shift": (two, shift(two, 0.2)),
         "merge": (three, merge(three).merged), "swap": (three, swap(three))}
control = SpanCoefficient(0.5, (0.5, 1.0), (0.44, 0.7), 1.0)



def window_transit(c):
    # span sum plus the k_o background over the rest of the window
    return c.transit_sum() + (window[1] - window[0] - sum(c.chis)) / c.k_o


# %% transit sums over the whole window
for name, (a, b) in pairs.items():
    print(f"{name:>6}: window transit sums {window_transit(a):.12f} -> {window_transit(b):.12f}")

# %% trace deviations at two resolutions
init = probe_data(f, window[0], 0.1)
for delta in (1e-3, 5e-4):
    row = []
    for name, (a, b) in pairs.items():
        dev = indistinguishable(f, a.coefficient(), b.coefficient(), window, init, 20.0, delta)[1].deviation
        row.append(f"{name} {dev:.2e}")
    c = indistinguishable(f, two.coefficient(), control.coefficient(), window, init, 20.0, delta)[1].deviation
    print(f"delta {delta}: " + ", ".join(row) + f"; control {c:.2e}")
# the probe state refracts at every coefficient jump, so the residual gap comes from the probe
# amplitude and does not shrink with delta
