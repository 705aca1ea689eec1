"""Constrained Delaunay meshes of a disk with polygonal holes.

Backed by Shewchuk's Triangle (``triangle`` package).  Boundary segments are
never split, so every input boundary vertex keeps its index and the mesh
boundary is exactly the input polylines.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import triangle as tr
from scipy.spatial import cKDTree

from ..geom2d import points_in_polygon, segments_intersect_many, signed_area

MAX_POINTS = 1_000_000


@dataclass(eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    outer: np.ndarray
    inner: List[np.ndarray]
    inner_patch: Optional[List[np.ndarray]] = None
    inner_tau: Optional[List[np.ndarray]] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def boundary_nodes(self) -> np.ndarray:
        return np.concatenate([self.outer] + list(self.inner))

    def signed_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def circumradii(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        la = np.linalg.norm(b - c, axis=1)
        lb = np.linalg.norm(c - a, axis=1)
        lc = np.linalg.norm(a - b, axis=1)
        return la * lb * lc / (4.0 * np.abs(self.signed_areas()))

    def min_angles(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        out = np.full(len(v), np.pi)
        for k in range(3):
            e1 = v[:, (k + 1) % 3] - v[:, k]
            e2 = v[:, (k + 2) % 3] - v[:, k]
            cos = np.sum(e1 * e2, axis=1) / (np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
            out = np.minimum(out, np.arccos(np.clip(cos, -1.0, 1.0)))
        return np.degrees(out)

    def with_inner_moved(self, inner_points: List[np.ndarray]) -> "TriMesh":
        """Same connectivity with the inner boundary vertices relocated."""
        verts = self.vertices.copy()
        for idx, pts in zip(self.inner, inner_points):
            verts[idx] = pts
        return TriMesh(verts, self.triangles, self.outer, self.inner, self.inner_patch, self.inner_tau)


def _loop_segments(start: int, n: int) -> np.ndarray:
    idx = start + np.arange(n)
    return np.column_stack([idx, np.roll(idx, -1)])


def _hole_seed(loop: np.ndarray) -> np.ndarray:
    """A point strictly inside a simple polygon."""
    sign = 1.0 if signed_area(loop) > 0 else -1.0
    edges = np.roll(loop, -1, axis=0) - loop
    lengths = np.linalg.norm(edges, axis=1)
    for k in np.argsort(-lengths):
        if lengths[k] == 0:
            break
        mid = loop[k] + 0.5 * edges[k]
        inward = sign * np.array([-edges[k, 1], edges[k, 0]]) / lengths[k]
        for frac in (0.25, 0.1, 0.01):
            p = mid + frac * lengths[k] * inward
            if points_in_polygon(p, loop)[0]:
                return p
    raise ValueError("invalid domain: cannot find a point inside a hole")


def _loops_cross(loops: List[np.ndarray]) -> bool:
    starts = np.cumsum([0] + [len(l) for l in loops])
    a = np.concatenate(loops)
    b = np.concatenate([np.roll(l, -1, axis=0) for l in loops])
    loop_id = np.repeat(np.arange(len(loops)), [len(l) for l in loops])
    local = np.arange(len(a)) - starts[loop_id]
    size = np.array([len(l) for l in loops])[loop_id]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    chunk = 512
    for s in range(0, len(a), chunk):
        sl = slice(s, s + chunk)
        box = np.all(lo[sl, None, :] <= hi[None, :, :], axis=-1) & np.all(lo[None, :, :] <= hi[sl, None, :], axis=-1)
        same = loop_id[sl, None] == loop_id[None, :]
        d = (local[sl, None] - local[None, :]) % size[None, :]
        neighbour = same & ((d == 0) | (d == 1) | (d == size[None, :] - 1))
        cand = box & ~neighbour
        i, j = np.nonzero(cand)
        if i.size and segments_intersect_many(a[sl][i], b[sl][i], a[j], b[j]).any():
            return True
    return False


def hex_lattice(outer: np.ndarray, spacing: float) -> np.ndarray:
    """Hexagonal point lattice with the given spacing, clipped to ``outer``."""
    lo, hi = outer.min(axis=0), outer.max(axis=0)
    dy = spacing * np.sqrt(3) / 2
    rows = []
    for j in range(int(np.ceil((hi[1] - lo[1]) / dy)) + 1):
        x = np.arange(lo[0], hi[0] + spacing, spacing) + (0.5 * spacing if j % 2 else 0.0)
        rows.append(np.column_stack([x, np.full_like(x, lo[1] + j * dy)]))
    pts = np.concatenate(rows)
    return pts[points_in_polygon(pts, outer)]


def _seed_points(background: np.ndarray, loops: List[np.ndarray], inner: List[np.ndarray], clearance: float):
    d, _ = cKDTree(np.concatenate(loops)).query(background)
    keep = d > clearance
    for loop in inner:
        keep &= ~points_in_polygon(background, loop)
    return background[keep]


def _size_field(mesh, inner, h_max, near_h, band):
    if near_h is None or not inner or band <= 0:
        return h_max
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    dist, _ = cKDTree(np.concatenate(inner)).query(centroids)
    return np.where(dist < band, min(near_h, h_max), h_max)


def triangulate(
    outer,
    inner,
    h_max: float,
    min_angle: float = 20.0,
    check: bool = True,
    max_rounds: int = 30,
    background: Optional[np.ndarray] = None,
    near_h: Optional[float] = None,
    near_band: float = 0.0,
) -> TriMesh:
    """Quality mesh of the region between ``outer`` and the ``inner`` loops.

    Loops are ``(n, 2)`` arrays without a repeated closing point.  After the
    initial quality mesh, triangles with circumradius above ``h_max`` are
    refined until none remain; triangles resting on a boundary segment longer
    than ``2 h_max`` cannot meet the bound and are left as they are.

    ``background`` is an optional fixed point cloud (see ``hex_lattice``)
    inserted wherever it clears the boundaries by ``0.6 h_max``.  Meshes of
    nearby shapes then share their far-field triangles, which keeps objective
    values from jumping between remeshes.

    ``near_h`` tightens the circumradius bound to ``near_h`` for triangles
    whose centroid lies within ``near_band`` of an inner loop.
    """
    outer = np.asarray(outer, dtype=float)
    inner = [np.asarray(l, dtype=float) for l in inner]
    if h_max <= 0:
        raise ValueError("h_max must be positive")
    if check:
        for loop in inner:
            if not np.all(points_in_polygon(loop, outer)):
                raise ValueError("invalid domain: inner loop leaves the outer boundary")
        if _loops_cross([outer] + inner):
            raise ValueError("invalid domain: boundary loops intersect")
        for k, loop in enumerate(inner):
            for other in inner[k + 1 :]:
                if points_in_polygon(loop[:1], other)[0] or points_in_polygon(other[:1], loop)[0]:
                    raise ValueError("invalid domain: nested inner loops")

    loops = [outer] + inner
    starts = np.cumsum([0] + [len(l) for l in loops])
    seeds = [] if background is None else [_seed_points(background, loops, inner, 0.6 * h_max)]
    pslg = {
        "vertices": np.concatenate(loops + seeds),
        "segments": np.concatenate([_loop_segments(s, len(l)) for s, l in zip(starts, loops)]),
    }
    if inner:
        pslg["holes"] = np.array([_hole_seed(l) for l in inner])
    area = 1.2 * h_max**2
    out = tr.triangulate(pslg, f"pq{min_angle}a{area:.12g}YQ")

    prev_bad = None
    for _ in range(max_rounds):
        verts, tris = out["vertices"], out["triangles"]
        if len(verts) > MAX_POINTS:
            raise RuntimeError("mesh refinement exceeded the point budget")
        mesh = TriMesh(verts, tris, np.arange(len(outer)), [])
        radii = mesh.circumradii()
        bad = radii > _size_field(mesh, inner, h_max, near_h, near_band)
        n_bad = int(bad.sum())
        if n_bad == 0 or (prev_bad is not None and n_bad >= prev_bad):
            break
        prev_bad = n_bad
        areas = np.abs(mesh.signed_areas())
        limits = np.where(bad, 0.5 * areas, -1.0)
        out["triangle_max_area"] = limits[:, None]
        out = tr.triangulate(out, f"rpq{min_angle}aYQ")

    verts = out["vertices"]
    tris = out["triangles"].astype(np.int64)
    mesh = TriMesh(verts, tris, np.arange(len(outer)), [])
    flip = mesh.signed_areas() < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if np.any(verts[: starts[-1]] != pslg["vertices"][: starts[-1]]):
        raise RuntimeError("mesher moved an input boundary vertex")
    inner_idx = [np.arange(starts[k + 1], starts[k + 2]) for k in range(len(inner))]
    return TriMesh(verts, tris, np.arange(len(outer)), inner_idx)


def write_off(mesh: TriMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.triangles)} 0\n")
        for x, y in mesh.vertices:
            fh.write(f"{x!r} {y!r} 0\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
