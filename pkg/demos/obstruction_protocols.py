"""Locate a single obstruction k = k1 on [xi1, xi2] from boundary traces only.

Two protocols are shown. The stationary protocol lets the window empty and then
sends in a designed probe whose returning shock carries k1 and the obstruction
edges. The constant-data protocol starts from a uniform state and reads the
reflected and transmitted waves at the window edges.
"""

from frontrecon.errors import Congested
from frontrecon.fluxlib import FluxCurve, Obstruction
from frontrecon.recon_obstruction import HiddenWorld, StationaryAmbient, probe_stationary, \
    reconstruct_constant_data, reconstruct_stationary, stationary_tail

f = FluxCurve.quadratic_flux()
obs = Obstruction(0.5, 0.3, 0.7, 1.0, 0.0, 1.0)

# %% stationary protocol: the chord route is exact, the tangent route is first order
world = HiddenWorld(f, obs.coefficient(), stationary_tail(f, obs, 0.0), 0.0, 1.0, 1e-3)
design = probe_stationary(StationaryAmbient(f, 1.0, 0.0, 0.0, 0.0, 1.0), 1.0)
o = world.observe(design.left, 40.0)
for method in ("discrete", "tangent"):
    rep = reconstruct_stationary(o, design, method)
    print(f"{method:>9}: k1 = {rep.k1:.12f}, xi1 = {rep.xi1:.12f}, xi2 = {rep.xi2:.12f}")

# %% a queue spilling back from beyond the window hides the obstruction
try:
    jammed = HiddenWorld(f, obs.coefficient(), stationary_tail(f, obs, 1.0), 0.0, 1.0, 1e-3)
    d = probe_stationary(StationaryAmbient(f, 1.0, 1.0, 1.0, 0.0, 1.0), 1.0)
    reconstruct_stationary(jammed.observe(d.left, 40.0), d)
except Congested as e:
    print("congested:", e)

# %% constant-data protocol on a wider window
wide = Obstruction(5 / 9, 1 / 12, 1.67, 1.0, 0.0, 2.0)
o = HiddenWorld(f, wide.coefficient(), None, 0.0, 2.0, 1e-3).observe_constant(1 / 3, 40.0)
rep = reconstruct_constant_data(o, 1 / 3)
print(f" constant: k1 = {rep.k1:.12f}, xi1 = {rep.xi1:.12f}, xi2 = {rep.xi2:.12f}, unique = {rep.unique}")
print(f"           trace mismatch {rep.observables['trace_mismatch']:.1e}")
