"""Deterministic analytic stand-in for the CFD maximum-pressure field.

    P(x) = P_atm + A * m / max(d, r0)^2 * S(x) * (1 + R(x))

S is 0.35 where the straight path from the charge is blocked by a footprint.
R = 0.5 * exp(-d_f / 0.5) on the charge-facing side of an obstacle, within its
x-extent, d_f being the perpendicular distance to that face (largest over
obstacles).  The constants fix a desk-scale ground truth in the 1e5..1e8 Pa
range; they are not a physics model.
"""
from __future__ import annotations

import numpy as np

from ..scene import GridSpec, Obstacle, Scenario

P_ATM = 101325.0
AMPLITUDE = 4.0e5  # Pa m^2 / kg
R0 = 0.3
SHADOW_FACTOR = 0.35
BOOST_PEAK = 0.5
BOOST_LENGTH = 0.5


def segment_hits_footprint(cx: float, cy: float, X, Y, ob: Obstacle) -> np.ndarray:
    """Whether the open segment (charge, point) meets the closed footprint.

    Liang-Barsky clipping of P(t) = C + t (X - C) against the rectangle.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    ddx, ddy = X - cx, Y - cy
    t0 = np.full(X.shape, -np.inf)
    t1 = np.full(X.shape, np.inf)
    ok = np.ones(X.shape, dtype=bool)
    for p, q in ((-ddx, cx - ob.x_min), (ddx, ob.x_max - cx),
                 (-ddy, cy - ob.y_min), (ddy, ob.y_max - cy)):
        par = p == 0.0
        ok &= ~(par & (q < 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(par, 0.0, q / np.where(par, 1.0, p))
        t0 = np.where(p < 0.0, np.maximum(t0, r), t0)
        t1 = np.where(p > 0.0, np.minimum(t1, r), t1)
    lo = np.maximum(t0, 0.0)
    hi = np.minimum(t1, 1.0)
    return ok & (t0 <= t1) & (lo <= hi) & (lo < 1.0) & (hi > 0.0)


def shadow_factor(s: Scenario, X, Y) -> np.ndarray:
    blocked = np.zeros(np.shape(X), dtype=bool)
    for ob in s.obstacles:
        blocked |= segment_hits_footprint(s.charge.x, s.charge.y, X, Y, ob)
    return np.where(blocked, SHADOW_FACTOR, 1.0)


def reflection_boost(s: Scenario, X, Y) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    boost = np.zeros(X.shape)
    cy = s.charge.y
    for ob in s.obstacles:
        in_x = (X >= ob.x_min) & (X <= ob.x_max)
        if cy < ob.y_min:
            side, d_f = in_x & (Y < ob.y_min), ob.y_min - Y
        elif cy > ob.y_max:
            side, d_f = in_x & (Y > ob.y_max), Y - ob.y_max
        else:
            continue
        b = np.where(side, BOOST_PEAK * np.exp(-np.abs(d_f) / BOOST_LENGTH), 0.0)
        boost = np.maximum(boost, b)
    return boost


def pressure_at(s: Scenario, X, Y) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    d = np.hypot(X - s.charge.x, Y - s.charge.y)
    dynamic = AMPLITUDE * s.charge.mass / np.maximum(d, R0) ** 2
    return P_ATM + dynamic * shadow_factor(s, X, Y) * (1.0 + reflection_boost(s, X, Y))


def oracle_pressure(s: Scenario, g: GridSpec) -> np.ndarray:
    """Maximum-pressure field (Pa) on the probe grid, shape (ny, nx)."""
    X, Y = g.mesh()
    return pressure_at(s, X, Y)
