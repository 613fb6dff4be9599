"""Compiled inner loop of the Euler-complementarity scheme.

One chunk call advances every replication through ``C`` time steps:
free Euler proposal ``w = z + increment`` followed by the unique
complementary projection ``z_new = w + R dL`` with ``z_new >= 0``,
``dL >= 0`` and ``z_new_i * dL_i = 0``.  The 2x2 linear-complementarity
problem is solved by explicit case analysis (no push / push face 1 /
push face 2 / push both); the case order is fixed and must match
:func:`stickytails.simulate.reflect_step` exactly so that the compiled
path and the reference path are bit-compatible.

Pushed components are written as exact zeros so complementarity holds
without round-off slack.  A negative multiplier in the push-both case
cannot occur for a reflection matrix with positive diagonal and positive
determinant; occurrences are counted and raised by the caller.
"""

from __future__ import annotations

import numba as nb
import numpy as np

__all__ = ["step_chunk"]


@nb.njit(cache=True, fastmath=False)
def step_chunk(z, lt, inc, r00, r01, r10, r11, det, pos, dl):  # pragma: no cover
    """Advance all replications by ``inc.shape[0]`` steps in place.

    Parameters
    ----------
    z : (R, 2) current positions, updated in place
    lt : (R, 2) cumulative local times, updated in place
    inc : (C, R, 2) drift-plus-noise increments of the free motion
    r00..r11, det : reflection matrix entries and determinant
    pos : (C, R, 2) output, post-step positions
    dl : (C, R, 2) output, per-step local-time increments

    Returns the number of steps where the push-both multiplier came out
    negative (always 0 for valid reflection matrices).
    """
    steps = inc.shape[0]
    n = z.shape[0]
    errors = 0
    for k in range(steps):
        for r in range(n):
            w0 = z[r, 0] + inc[k, r, 0]
            w1 = z[r, 1] + inc[k, r, 1]
            d0 = 0.0
            d1 = 0.0
            if w0 >= 0.0 and w1 >= 0.0:
                z0 = w0
                z1 = w1
            else:
                case = 0
                if w0 < 0.0:
                    c0 = -w0 / r00
                    if w1 + r10 * c0 >= 0.0:
                        d0 = c0
                        case = 1
                if case == 0 and w1 < 0.0:
                    c1 = -w1 / r11
                    if w0 + r01 * c1 >= 0.0:
                        d1 = c1
                        case = 2
                if case == 0:
                    d0 = (-w0 * r11 + w1 * r01) / det
                    d1 = (w0 * r10 - w1 * r00) / det
                    if d0 < 0.0 or d1 < 0.0:
                        errors += 1
                        if d0 < 0.0:
                            d0 = 0.0
                        if d1 < 0.0:
                            d1 = 0.0
                    case = 3
                if case == 1:
                    z0 = 0.0
                    z1 = w1 + r10 * d0
                elif case == 2:
                    z0 = w0 + r01 * d1
                    z1 = 0.0
                else:
                    z0 = 0.0
                    z1 = 0.0
            z[r, 0] = z0
            z[r, 1] = z1
            lt[r, 0] += d0
            lt[r, 1] += d1
            pos[k, r, 0] = z0
            pos[k, r, 1] = z1
            dl[k, r, 0] = d0
            dl[k, r, 1] = d1
    return errors
