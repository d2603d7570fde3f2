"""Closed-form distance and overlap tests between collision primitives.

Scalar kernels compiled with numba; they are called from the batched
collision loops in :mod:`graspmetric.world` and are usable directly from
Python with ``(3,)`` / ``(3, 3)`` float arrays.  Boxes are given as
(center, rotation, half extents), segments by their two end points.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_EPS = 1e-12


@njit(cache=True)
def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(cache=True)
def segment_segment_dist2(p0, p1, q0, q1):
    """Squared distance between segments [p0, p1] and [q0, q1]."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = _dot3(d1, d1)
    e = _dot3(d2, d2)
    f = _dot3(d2, r)
    if a <= _EPS and e <= _EPS:
        return _dot3(r, r)
    if a <= _EPS:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = _dot3(d1, r)
        if e <= _EPS:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = _dot3(d1, d2)
            denom = a * e - b * b
            if denom > _EPS * a * e:
                s = min(max((b * f - c * e) / denom, 0.0), 1.0)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    dx = r + s * d1 - t * d2
    return _dot3(dx, dx)


@njit(cache=True)
def point_box_dist2(p_local, half):
    """Squared distance from a point (in box coordinates) to a centred box."""
    s = 0.0
    for i in range(3):
        v = abs(p_local[i]) - half[i]
        if v > 0.0:
            s += v * v
    return s


@njit(cache=True)
def segment_box_dist2(p0, p1, center, rotation, half):
    """Exact squared distance between a segment and a solid oriented box.

    Along the segment the squared distance is a convex piecewise quadratic
    whose pieces change where the segment crosses a face plane; each piece is
    minimised in closed form.
    """
    a = rotation.T @ (p0 - center)
    d = rotation.T @ (p1 - center) - a
    brk = np.empty(8)
    brk[0] = 0.0
    brk[1] = 1.0
    for i in range(3):
        if abs(d[i]) > _EPS:
            brk[2 + 2 * i] = min(max((half[i] - a[i]) / d[i], 0.0), 1.0)
            brk[3 + 2 * i] = min(max((-half[i] - a[i]) / d[i], 0.0), 1.0)
        else:
            brk[2 + 2 * i] = 0.0
            brk[3 + 2 * i] = 0.0
    brk.sort()
    best = np.inf
    p = np.empty(3)
    for k in range(7):
        lo = brk[k]
        hi = brk[k + 1]
        if hi - lo < 0.0:
            continue
        mid = 0.5 * (lo + hi)
        A = 0.0
        B = 0.0
        for i in range(3):
            pm = a[i] + mid * d[i]
            if pm > half[i]:
                off = a[i] - half[i]
            elif pm < -half[i]:
                off = a[i] + half[i]
            else:
                continue
            A += d[i] * d[i]
            B += 2.0 * d[i] * off
        t = lo
        if A > _EPS:
            t = min(max(-B / (2.0 * A), lo), hi)
        for i in range(3):
            p[i] = a[i] + t * d[i]
        v = point_box_dist2(p, half)
        if v < best:
            best = v
    return best


@njit(cache=True)
def obb_overlap(c1, R1, h1, c2, R2, h2):
    """Separating-axis test for two solid oriented boxes."""
    Rm = R1.T @ R2
    t = R1.T @ (c2 - c1)
    absR = np.abs(Rm) + 1e-12
    for i in range(3):
        rb = absR[i, 0] * h2[0] + absR[i, 1] * h2[1] + absR[i, 2] * h2[2]
        if abs(t[i]) > h1[i] + rb:
            return False
    for j in range(3):
        ra = absR[0, j] * h1[0] + absR[1, j] * h1[1] + absR[2, j] * h1[2]
        tb = Rm[0, j] * t[0] + Rm[1, j] * t[1] + Rm[2, j] * t[2]
        if abs(tb) > ra + h2[j]:
            return False
    for i in range(3):
        i1 = (i + 1) % 3
        i2 = (i + 2) % 3
        for j in range(3):
            j1 = (j + 1) % 3
            j2 = (j + 2) % 3
            ra = h1[i1] * absR[i2, j] + h1[i2] * absR[i1, j]
            rb = h2[j1] * absR[i, j2] + h2[j2] * absR[i, j1]
            if abs(t[i2] * Rm[i1, j] - t[i1] * Rm[i2, j]) > ra + rb:
                return False
    return True


@njit(cache=True)
def box_extent_along(axis, center, rotation, half):
    """Projection interval (lo, hi) of a box onto a unit axis."""
    c = _dot3(axis, center)
    r = 0.0
    for i in range(3):
        r += abs(axis[0] * rotation[0, i] + axis[1] * rotation[1, i] + axis[2] * rotation[2, i]) * half[i]
    return c - r, c + r


@njit(cache=True)
def capsule_extent_along(axis, p0, p1, radius):
    a = _dot3(axis, p0)
    b = _dot3(axis, p1)
    return min(a, b) - radius, max(a, b) + radius
