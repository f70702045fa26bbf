"""Piecewise-linear smoothing of the quantile indicator function.

The estimating equations replace the indicator 1{v <= 0} with a ramp that
falls linearly from one to zero across a unit window.  Everything downstream
(solver, bandwidth selection) only needs the ramp, its derivative, and two
moment constants of the complementary ramp.
"""

from typing import NamedTuple

import numpy as np


def itilde(v):
    """Smoothed indicator: 1 below the window, 0 above, (1 - v)/2 across it.

    Accepts scalars or arrays; returns the same shape.
    """
    v = np.asarray(v, dtype=float)
    out = np.clip((1.0 - v) / 2.0, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def itilde_deriv(v):
    """Derivative of ``itilde``: -1/2 strictly inside (-1, 1), 0 elsewhere.

    The kinks at v = -1 and v = 1 are assigned derivative 0.
    """
    v = np.asarray(v, dtype=float)
    out = np.where(np.abs(v) < 1.0, -0.5, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


class SmoothingConstants(NamedTuple):
    one_minus_int_G2: float
    int_Gprime_v2_sq: float


def smoothing_constants() -> SmoothingConstants:
    """Moment constants of the complementary ramp G(v) = 1 - itilde(v).

    ``one_minus_int_G2`` is 1 - integral of G(v)^2 over [-1, 1] and equals
    exactly 1/3.  ``int_Gprime_v2_sq`` is the squared integral of
    G'(v) * v^2 over [-1, 1] and equals exactly 1/9.  Both are returned in
    closed form; the test suite checks them against numerical quadrature.
    """
    return SmoothingConstants(1.0 / 3.0, 1.0 / 9.0)
