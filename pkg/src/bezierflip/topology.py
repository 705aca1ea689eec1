"""Intersecting control polygon detection and the flip procedure.

Detection runs a broad phase on the axis-aligned boxes of every control
polygon and a narrow phase on the 3 x 3 segment pairs of each candidate.
The flip replaces the colliding polygons by two straight connector polygons,
either splitting one component into two or joining two components into one.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

from .bezier import ClosedPiecewiseCurve, ShapeConfiguration, bernstein_matrix
from .geom2d import polylines_intersect, segments_intersect_many

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    TWO = "two"
    THREE = "three"
    MERGE = "merge"


@dataclass(frozen=True)
class IntersectionEvent:
    """One collision situation.

    TWO: ``components == (c,)``, ``patches == (p, q)``.
    THREE: ``components == (c,)``, ``patches == (p, q, r)`` with ``r`` right
    after ``q``.
    MERGE: ``components == (a, b)``, ``patches[0]`` on ``a`` and the rest (one
    patch, or two consecutive ones) on ``b``.
    """

    kind: EventKind
    components: Tuple[int, ...]
    patches: Tuple[int, ...]


def connector(a, b) -> np.ndarray:
    """Straight control polygon from ``a`` to ``b`` with points at thirds."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    return np.array([a, a + d / 3.0, a + 2.0 * d / 3.0, b])


def flip_divide_two(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return connector(p[0], q[3]), connector(q[0], p[3])


def flip_divide_three(p, q, r):
    p, q, r = (np.asarray(v, dtype=float) for v in (p, q, r))
    return connector(p[0], r[3]), connector(q[0], p[3])


# ---------------------------------------------------------------- detection


def _patch_table(s: ShapeConfiguration):
    polys, owner = [], []
    for ci, c in enumerate(s.components):
        polys.append(c.patches())
        owner.extend((ci, i) for i in range(c.n_patches))
    return np.concatenate(polys), owner


def _adjacent(n: int, i: int, j: int) -> bool:
    return (i - j) % n in (1, n - 1)


def intersecting_pairs(s: ShapeConfiguration) -> List[Tuple[Tuple[int, int], Tuple[int, int]]]:
    """All pairs of intersecting control polygons, adjacent patches excluded.

    Pairs are returned as ``((comp, patch), (comp, patch))`` in scan order.
    """
    polys, owner = _patch_table(s)
    lo, hi = polys.min(axis=1), polys.max(axis=1)
    overlap = np.all(lo[:, None, :] <= hi[None, :, :], axis=-1) & np.all(lo[None, :, :] <= hi[:, None, :], axis=-1)
    overlap = np.triu(overlap, k=1)
    comp = np.array([o[0] for o in owner])
    idx = np.array([o[1] for o in owner])
    sizes = np.array([s.components[c].n_patches for c in comp])
    same = comp[:, None] == comp[None, :]
    diff = (idx[:, None] - idx[None, :]) % sizes[:, None]
    adjacent = same & ((diff == 1) | (diff == sizes[:, None] - 1))
    cand_i, cand_j = np.nonzero(overlap & ~adjacent)
    if cand_i.size == 0:
        return []
    a, b = polys[cand_i], polys[cand_j]
    # 3 segments each -> 3 x 3 tests per candidate
    hit = segments_intersect_many(
        a[:, :3, None, :], a[:, 1:, None, :], b[:, None, :3, :], b[:, None, 1:, :]
    ).reshape(len(cand_i), -1).any(axis=1)
    return [(owner[i], owner[j]) for i, j in zip(cand_i[hit], cand_j[hit])]


def _clusters(pairs):
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        parent[find(a)] = find(b)
    groups = {}
    for a, b in pairs:
        groups.setdefault(find(a), []).append((a, b))
    return list(groups.values())


def _classify(s: ShapeConfiguration, edges):
    nodes = sorted({n for e in edges for n in e})
    if len(edges) == 1:
        (a, b), = edges
        a, b = sorted((a, b))
        if a[0] == b[0]:
            return IntersectionEvent(EventKind.TWO, (a[0],), (a[1], b[1]))
        return IntersectionEvent(EventKind.MERGE, (a[0], b[0]), (a[1], b[1]))
    if len(edges) == 2 and len(nodes) == 3:
        degree = {n: sum(n in e for e in edges) for n in nodes}
        centre = next(n for n in nodes if degree[n] == 2)
        x, y = sorted(n for n in nodes if n != centre)
        if x[0] != y[0]:
            return None
        n = s.components[x[0]].n_patches
        if (y[1] - x[1]) % n == 1:
            q, r = x, y
        elif (x[1] - y[1]) % n == 1:
            q, r = y, x
        else:
            return None
        if centre[0] == q[0]:
            return IntersectionEvent(EventKind.THREE, (centre[0],), (centre[1], q[1], r[1]))
        return IntersectionEvent(EventKind.MERGE, (centre[0], q[0]), (centre[1], q[1], r[1]))
    return None


def _scan_key(e: IntersectionEvent):
    if e.kind is EventKind.MERGE:
        nodes = [(e.components[0], e.patches[0])] + [(e.components[1], p) for p in e.patches[1:]]
    else:
        nodes = [(e.components[0], p) for p in e.patches]
    return min(nodes)


def detect_events(s: ShapeConfiguration) -> List[IntersectionEvent]:
    """Classified collision situations; at most one is returned.

    Unclassifiable patterns give an empty list; several situations give the
    first one in scan order.  Both cases are logged as warnings.
    """
    pairs = intersecting_pairs(s)
    if not pairs:
        return []
    events = []
    for edges in _clusters(pairs):
        ev = _classify(s, edges)
        if ev is None:
            logger.warning("unclassifiable control polygon intersections: %s", edges)
            return []
        events.append(ev)
    events.sort(key=_scan_key)
    if len(events) > 1:
        logger.warning("%d intersection situations found, keeping the first", len(events))
    return events[:1]


# ---------------------------------------------------------------- flips


def _arc(patches, start: int, stop: int):
    """Patches ``start, start+1, ..., stop-1`` cyclically (empty if start == stop)."""
    n = len(patches)
    k = (stop - start) % n
    return [patches[(start + t) % n] for t in range(k)]


def apply_divide(s: ShapeConfiguration, e: IntersectionEvent) -> ShapeConfiguration:
    if e.kind not in (EventKind.TWO, EventKind.THREE):
        raise ValueError("apply_divide needs a TWO or THREE event")
    ci = e.components[0]
    patches = list(s.components[ci].patches())
    if e.kind is EventKind.TWO:
        i, j = e.patches
        last = j
        conn_pq, conn_qp = flip_divide_two(patches[i], patches[j])
    else:
        i, j, last = e.patches
        conn_pq, conn_qp = flip_divide_three(patches[i], patches[j], patches[last])
    # arc from the end of P to the start of Q, and from the end of Q (or R) to the start of P
    arc_pq = _arc(patches, i + 1, j)
    arc_qp = _arc(patches, last + 1, i)
    if len(arc_pq) < 1 or len(arc_qp) < 1:
        raise ValueError("flip would create degenerate component")
    first = ClosedPiecewiseCurve.from_patches(np.array(arc_qp + [conn_pq]))
    second = ClosedPiecewiseCurve.from_patches(np.array(arc_pq + [conn_qp]))
    comps = list(s.components)
    comps[ci : ci + 1] = [first, second]
    return ShapeConfiguration(tuple(comps))


def apply_merge_components(s: ShapeConfiguration, e: IntersectionEvent) -> ShapeConfiguration:
    """Join two components through the connectors of the colliding polygons.

    Component ``b`` is traversed backwards when its orientation differs from
    that of ``a``, so the joined loop is consistently oriented.
    """
    if e.kind is not EventKind.MERGE:
        raise ValueError("apply_merge_components needs a MERGE event")
    ca, cb = e.components
    comp_a, comp_b = s.components[ca], s.components[cb]
    i = e.patches[0]
    others = list(e.patches[1:])
    nb = comp_b.n_patches
    if comp_a.orientation() != comp_b.orientation():
        comp_b = comp_b.reversed()
        others = [nb - 1 - k for k in reversed(others)]
    pa = list(comp_a.patches())
    pb = list(comp_b.patches())
    q, last = others[0], others[-1]
    conn_pq = connector(pa[i][0], pb[last][3])
    conn_qp = connector(pb[q][0], pa[i][3])
    arc_a = _arc(pa, i + 1, i)
    arc_b = _arc(pb, last + 1, q)
    if len(arc_a) < 1 or len(arc_b) < 1:
        raise ValueError("merge would leave a component without kept patches")
    merged = ClosedPiecewiseCurve.from_patches(np.array(arc_a + [conn_pq] + arc_b + [conn_qp]))
    comps = list(s.components)
    comps[ca] = merged
    del comps[cb]
    return ShapeConfiguration(tuple(comps))


def apply_event(s: ShapeConfiguration, e: IntersectionEvent) -> ShapeConfiguration:
    if e.kind is EventKind.MERGE:
        return apply_merge_components(s, e)
    return apply_divide(s, e)


def format_flip_log(e: IntersectionEvent, accepted: bool, j_before: float, j_after: float) -> str:
    comps = ",".join(str(c) for c in e.components)
    patches = ",".join(str(p) for p in e.patches)
    return (
        f"FLIP kind={e.kind.value} comp={comps} patches={patches} "
        f"accepted={str(bool(accepted)).lower()} J_before={j_before:.6g} J_after={j_after:.6g}"
    )


# ---------------------------------------------------------------- self-intersection


def _patch_polylines(s: ShapeConfiguration, m: int):
    basis = bernstein_matrix(np.arange(m + 1) / m)
    lines, owner = [], []
    for ci, c in enumerate(s.components):
        for i, p in enumerate(c.patches()):
            lines.append(basis @ p)
            owner.append((ci, i))
    return lines, owner


def _polyline_self_intersects(line: np.ndarray) -> bool:
    a, b = line[:-1], line[1:]
    hits = segments_intersect_many(a[:, None, :], b[:, None, :], a[None, :, :], b[None, :, :])
    k = np.arange(len(a))
    far = np.abs(k[:, None] - k[None, :]) >= 2
    return bool(np.any(hits & far))


def colliding_patches(s: ShapeConfiguration, m: int = 50, first_only: bool = False) -> List[Tuple[int, int]]:
    """``(component, patch)`` tags of every patch whose sampled curve crosses itself or another."""
    if m < 3:
        raise ValueError("need at least 3 samples per patch")
    lines, owner = _patch_polylines(s, m)
    hit = []
    for k, line in enumerate(lines):
        if _polyline_self_intersects(line):
            hit.append(owner[k])
            if first_only:
                return hit
    lo = np.array([l.min(axis=0) for l in lines])
    hi = np.array([l.max(axis=0) for l in lines])
    overlap = np.all(lo[:, None, :] <= hi[None, :, :], axis=-1) & np.all(lo[None, :, :] <= hi[:, None, :], axis=-1)
    for a, b in zip(*np.nonzero(np.triu(overlap, k=1))):
        (ca, ia), (cb, ib) = owner[a], owner[b]
        adjacent = ca == cb and _adjacent(s.components[ca].n_patches, ia, ib)
        if polylines_intersect(lines[a], lines[b], skip_shared_endpoints=adjacent):
            hit += [owner[a], owner[b]]
            if first_only:
                return hit
    return sorted(set(hit))


def is_self_intersecting(s: ShapeConfiguration, m: int = 50) -> bool:
    """Do the sampled patch curves cross or touch anywhere but at shared junctions?"""
    return bool(colliding_patches(s, m, first_only=True))
