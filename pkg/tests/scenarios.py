"""Random scenario generators shared by the module tests and the acceptance run."""

from __future__ import annotations

import math

import numpy as np


def quad_roots(level):
    """Both states of u(1-u) at ``level`` by the textbook formula."""
    r = math.sqrt(max(0.25 - level, 0.0))
    return 0.5 - r, 0.5 + r


def random_two_k(rng):
    """Two-coefficient Riemann datum for u(1-u) covering every case family."""
    kl, kr = rng.uniform(0.2, 2.0, size=2)
    if rng.random() < 0.1:
        kr = kl
    ul, ur = rng.uniform(0.0, 1.0, size=2)
    if rng.random() < 0.1:
        ul = 0.5
    return float(kl), float(ul), float(kr), float(ur)


def random_staircase(rng, lo=0.0, hi=1.0, max_jumps=6, kmin=0.2, kmax=2.0):
    n = int(rng.integers(1, max_jumps + 1))
    while True:
        bps = np.sort(rng.uniform(lo + 0.05, hi - 0.05, size=n))
        if n == 1 or np.min(np.diff(bps)) > 0.05:
            break
    vals = [float(rng.uniform(kmin, kmax))]
    for _ in range(n):
        v = float(rng.uniform(kmin, kmax))
        while abs(v - vals[-1]) < 0.05:
            v = float(rng.uniform(kmin, kmax))
        vals.append(v)
    return tuple(float(b) for b in bps), tuple(vals)


def random_stationary_obstruction(rng, kind):
    """``(k1, xi1, xi2, u_a)`` on ``[0, 1]``; ``kind`` 0 empty ambient, 1 free-flow ambient."""
    k1 = float(rng.uniform(0.2, 0.9))
    x1 = float(rng.uniform(0.05, 0.5))
    x2 = float(rng.uniform(x1 + 0.1, 0.95))
    if kind == 0:
        ua = 0.0
    else:
        ua = quad_roots(rng.uniform(0.1, 0.9) * k1 * 0.25)[0]
    return k1, x1, x2, float(ua)


def random_constant_obstruction(rng):
    """``(k1, xi1, xi2, ubar, b)``: an obstruction inside ``[0, b]`` probed by constant free-flow data."""
    b = float(rng.choice([2.0, 3.0, 4.0]))
    k1 = float(rng.uniform(0.3, 0.9))
    x1 = float(rng.uniform(0.05, 0.4 * b))
    x2 = float(rng.uniform(x1 + 0.1, min(x1 + 0.4 * b, 0.95 * b)))
    ubar = float(rng.uniform(0.05, 0.45))
    return k1, x1, x2, ubar, b
