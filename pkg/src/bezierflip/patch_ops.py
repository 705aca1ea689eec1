"""Split, merge and size control of cubic patches."""

import numpy as np

from .bezier import ClosedPiecewiseCurve, ShapeConfiguration, eval_patch
from .geom2d import point_set_diameter

# Bernstein rows at t = 1/3 and t = 2/3, times 27
_B13 = np.array([8.0, 12.0, 6.0, 1.0])
_B23 = np.array([1.0, 6.0, 12.0, 8.0])
_INNER = np.array([[12.0, 6.0], [6.0, 12.0]])


def split(cp):
    """De Casteljau subdivision at t = 1/2; the curve is unchanged."""
    p0, p1, p2, p3 = np.asarray(cp, dtype=float)
    m01, m12, m23 = (p0 + p1) / 2, (p1 + p2) / 2, (p2 + p3) / 2
    a, b = (m01 + m12) / 2, (m12 + m23) / 2
    f = (a + b) / 2
    return np.array([p0, m01, a, f]), np.array([f, b, m23, p3])


def merge(q, r, tol: float = 1e-9):
    """One cubic through q(0), q(2/3), r(1/3), r(1) at t = 0, 1/3, 2/3, 1."""
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.linalg.norm(q[3] - r[0]) > tol:
        raise ValueError("merge needs consecutive patches (q end != r start)")
    p0, p3 = q[0], r[3]
    a = eval_patch(q, 2.0 / 3.0)
    b = eval_patch(r, 1.0 / 3.0)
    rhs = np.array([27.0 * a - _B13[0] * p0 - _B13[3] * p3, 27.0 * b - _B23[0] * p0 - _B23[3] * p3])
    p1, p2 = np.linalg.solve(_INNER, rhs)
    return np.array([p0, p1, p2, p3])


def _diameters(patches):
    return np.array([point_set_diameter(p) for p in patches])


def enforce_size(c: ClosedPiecewiseCurve, s_min: float, s_max: float) -> ClosedPiecewiseCurve:
    """Split patches wider than ``s_max``, merge patches narrower than ``s_min``.

    Undersized patches are merged with their smaller neighbour (lower index on
    ties).  A curve never drops below two patches.
    """
    if not (0 < s_min < s_max) or s_max < 2 * s_min:
        raise ValueError("need 0 < s_min and s_max >= 2 s_min")
    patches = list(c.patches())
    changed = False
    cap = 10 * max(len(patches), 4)
    for _ in range(cap):
        diam = _diameters(patches)
        big = np.flatnonzero(diam > s_max)
        if big.size:
            out = []
            for i, p in enumerate(patches):
                out.extend(split(p) if diam[i] > s_max else [p])
            patches, changed = out, True
            continue
        small = np.flatnonzero(diam < s_min)
        n = len(patches)
        if small.size == 0 or n <= 2:
            break
        i = int(small[0])
        prev, nxt = (i - 1) % n, (i + 1) % n
        j = prev if (diam[prev], prev) <= (diam[nxt], nxt) else nxt
        if j == prev:
            merged = merge(patches[prev], patches[i])
        else:
            merged = merge(patches[i], patches[nxt])
        first = min(i, j)
        if {i, j} == {0, n - 1}:
            patches = [merged] + patches[1 : n - 1]
        else:
            patches = patches[:first] + [merged] + patches[first + 2 :]
        changed = True
    else:
        raise RuntimeError("patch size control did not terminate")
    if not changed:
        return c
    return ClosedPiecewiseCurve.from_patches(np.array(patches))


def enforce_size_shape(s: ShapeConfiguration, s_min: float, s_max: float) -> ShapeConfiguration:
    comps = tuple(enforce_size(c, s_min, s_max) for c in s.components)
    if all(a is b for a, b in zip(comps, s.components)):
        return s
    return ShapeConfiguration(comps)
