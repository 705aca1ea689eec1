"""Elementary planar geometry on ``(2,)`` / ``(n, 2)`` float arrays.

Points are plain numpy arrays (or anything ``np.asarray`` accepts).  The
segment predicates use the sign of a cross product, with values below
``COLLINEAR_EPS * scale**2`` treated as zero.
"""

from typing import NamedTuple, Sequence

import numpy as np

COLLINEAR_EPS = 1e-12


class Aabb(NamedTuple):
    min: np.ndarray
    max: np.ndarray


def _as_points(pts) -> np.ndarray:
    arr = np.asarray(pts, dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise ValueError("empty point set")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite coordinates")
    return arr


def aabb_of_points(pts) -> Aabb:
    arr = _as_points(pts)
    return Aabb(arr.min(axis=0), arr.max(axis=0))


def aabb_overlap(b1: Aabb, b2: Aabb) -> bool:
    """Closed-box overlap: touching edges or corners count."""
    return bool(
        b1.min[0] <= b2.max[0]
        and b2.min[0] <= b1.max[0]
        and b1.min[1] <= b2.max[1]
        and b2.min[1] <= b1.max[1]
    )


def _orient(ax, ay, bx, by, cx, cy):
    """Sign of the turn a -> b -> c (+1 ccw, -1 cw, 0 collinear). Broadcasts."""
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    scale = np.maximum(
        np.maximum(np.abs(bx - ax), np.abs(by - ay)),
        np.maximum(np.abs(cx - ax), np.abs(cy - ay)),
    )
    tol = COLLINEAR_EPS * scale * scale
    return np.where(det > tol, 1, np.where(det < -tol, -1, 0))


def _on_segment(ax, ay, bx, by, px, py):
    """For p collinear with a-b: is p inside the closed bounding box of a-b."""
    return (
        (np.minimum(ax, bx) <= px)
        & (px <= np.maximum(ax, bx))
        & (np.minimum(ay, by) <= py)
        & (py <= np.maximum(ay, by))
    )


def segments_intersect_many(a1, b1, a2, b2) -> np.ndarray:
    """Vectorised closed-segment intersection test.

    ``a1, b1, a2, b2`` are arrays of shape ``(..., 2)`` that broadcast together;
    returns a boolean array of the broadcast shape.
    """
    a1, b1, a2, b2 = (np.asarray(v, dtype=float) for v in (a1, b1, a2, b2))
    p1x, p1y = a1[..., 0], a1[..., 1]
    q1x, q1y = b1[..., 0], b1[..., 1]
    p2x, p2y = a2[..., 0], a2[..., 1]
    q2x, q2y = b2[..., 0], b2[..., 1]

    o1 = _orient(p1x, p1y, q1x, q1y, p2x, p2y)
    o2 = _orient(p1x, p1y, q1x, q1y, q2x, q2y)
    o3 = _orient(p2x, p2y, q2x, q2y, p1x, p1y)
    o4 = _orient(p2x, p2y, q2x, q2y, q1x, q1y)

    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    touch = (
        ((o1 == 0) & _on_segment(p1x, p1y, q1x, q1y, p2x, p2y))
        | ((o2 == 0) & _on_segment(p1x, p1y, q1x, q1y, q2x, q2y))
        | ((o3 == 0) & _on_segment(p2x, p2y, q2x, q2y, p1x, p1y))
        | ((o4 == 0) & _on_segment(p2x, p2y, q2x, q2y, q1x, q1y))
    )
    return proper | touch


def segments_intersect(s1, s2) -> bool:
    """True iff the closed segments ``s1 = (a, b)`` and ``s2`` share a point."""
    a1, b1 = np.asarray(s1, dtype=float)
    a2, b2 = np.asarray(s2, dtype=float)
    return bool(segments_intersect_many(a1, b1, a2, b2))


def point_set_diameter(pts) -> float:
    arr = _as_points(pts)
    diff = arr[:, None, :] - arr[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=-1)).max())


def _only_shared_terminal(a1, b1, a2, b2, end1, end2):
    """Mask of segment pairs whose intersection is just a shared polyline end.

    ``end1[i]`` is the terminal vertex of polyline 1 that segment ``i`` carries
    (NaN when the segment does not touch a terminal vertex), same for ``end2``.
    """
    shared = np.all(end1[:, None, :] == end2[None, :, :], axis=-1)
    if not shared.any():
        return shared
    # direction of each segment pointing away from its terminal vertex
    d1 = np.where(np.all(a1 == end1, axis=-1, keepdims=True), b1 - a1, a1 - b1)
    d2 = np.where(np.all(a2 == end2, axis=-1, keepdims=True), b2 - a2, a2 - b2)
    cross = d1[:, None, 0] * d2[None, :, 1] - d1[:, None, 1] * d2[None, :, 0]
    dot = d1[:, None, 0] * d2[None, :, 0] + d1[:, None, 1] * d2[None, :, 1]
    scale = np.linalg.norm(d1, axis=-1)[:, None] * np.linalg.norm(d2, axis=-1)[None, :]
    collinear_same_way = (np.abs(cross) <= COLLINEAR_EPS * scale) & (dot > 0)
    return shared & ~collinear_same_way


def polylines_intersect(p1, p2, skip_shared_endpoints: bool = False) -> bool:
    """Does any segment of polyline ``p1`` meet any segment of ``p2``?

    With ``skip_shared_endpoints`` a contact that consists only of a terminal
    vertex common to both polylines is ignored (adjacent Bezier patches).
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if len(p1) < 2 or len(p2) < 2:
        raise ValueError("polylines need at least two points")
    a1, b1 = p1[:-1], p1[1:]
    a2, b2 = p2[:-1], p2[1:]
    hits = segments_intersect_many(a1[:, None, :], b1[:, None, :], a2[None, :, :], b2[None, :, :])
    if skip_shared_endpoints and hits.any():
        end1 = np.full_like(a1, np.nan)
        end2 = np.full_like(a2, np.nan)
        end1[0], end2[0] = p1[0], p2[0]
        end1[-1], end2[-1] = p1[-1], p2[-1]
        # a single-segment polyline touches both ends; keep the one that is shared
        if len(a1) == 1 and not (np.all(p1[0] == p2[0]) or np.all(p1[0] == p2[-1])):
            end1[0] = p1[-1]
        if len(a2) == 1 and not (np.all(p2[0] == p1[0]) or np.all(p2[0] == p1[-1])):
            end2[0] = p2[-1]
        hits &= ~_only_shared_terminal(a1, b1, a2, b2, end1, end2)
    return bool(hits.any())


def signed_area(loop) -> float:
    """Shoelace area of a closed polyline given without its repeated first point."""
    loop = np.asarray(loop, dtype=float)
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def points_in_polygon(pts, loop) -> np.ndarray:
    """Even-odd point-in-polygon test, vectorised over ``pts``."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    loop = np.asarray(loop, dtype=float)
    x, y = pts[:, 0:1], pts[:, 1:2]
    xa, ya = loop[:, 0], loop[:, 1]
    xb, yb = np.roll(xa, -1), np.roll(ya, -1)
    straddle = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = xa + (y - ya) * (xb - xa) / (yb - ya)
    return (np.count_nonzero(straddle & (x < xcross), axis=1) % 2) == 1


def convex_hull_contains(hull_pts, p, tol: float = 1e-12) -> bool:
    """Is ``p`` inside the convex hull of ``hull_pts`` (small point sets)."""
    from scipy.spatial import ConvexHull, QhullError

    hull_pts = np.asarray(hull_pts, dtype=float)
    p = np.asarray(p, dtype=float)
    try:
        hull = ConvexHull(hull_pts)
    except QhullError:
        # degenerate (collinear) hull: check the segment spanned by the extremes
        span = hull_pts.max(axis=0) - hull_pts.min(axis=0)
        axis = int(np.argmax(span))
        order = np.argsort(hull_pts[:, axis])
        a, b = hull_pts[order[0]], hull_pts[order[-1]]
        ab = b - a
        if not np.any(ab):
            return bool(np.linalg.norm(p - a) <= tol)
        t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
        return bool(np.linalg.norm(a + t * ab - p) <= tol * max(1.0, np.linalg.norm(ab)))
    scale = max(1.0, float(np.abs(hull_pts).max()))
    return bool(np.all(hull.equations[:, :2] @ p + hull.equations[:, 2] <= tol * scale))
