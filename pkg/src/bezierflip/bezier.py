"""Cubic Bezier patches, closed piecewise curves and multi-component shapes.

A closed curve with ``N`` patches stores its ``3N`` distinct control points in
one ``(3N, 2)`` array: row ``3i`` is the junction where patch ``i`` starts,
rows ``3i+1`` and ``3i+2`` are its interior points, and patch ``i`` ends on
row ``3(i+1) mod 3N``.  Continuity and closure therefore hold by construction
and a moved junction is a single degree of freedom.
"""

import json
from dataclasses import dataclass, field
from math import comb
from typing import List, Sequence, Union

import numpy as np

from .geom2d import signed_area

DEGREE = 3


def bernstein(j: int, d: int, t):
    """Bernstein basis polynomial ``C(d, j) t^j (1 - t)^(d - j)``."""
    if not 0 <= j <= d:
        raise ValueError(f"bernstein index j={j} outside [0, {d}]")
    t = np.asarray(t, dtype=float)
    out = comb(d, j) * t**j * (1.0 - t) ** (d - j)
    return float(out) if out.ndim == 0 else out


def bernstein_matrix(t) -> np.ndarray:
    """Cubic Bernstein values, shape ``(len(t), 4)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = 1.0 - t
    return np.stack([s**3, 3 * t * s**2, 3 * t**2 * s, t**3], axis=-1)


def _check_param(t):
    t = np.asarray(t, dtype=float)
    if np.any((t < 0.0) | (t > 1.0)) or not np.all(np.isfinite(t)):
        raise ValueError("curve parameter must lie in [0, 1]")
    return t


def de_casteljau(cp, t):
    """Evaluate a Bezier curve of any degree at scalar ``t`` by repeated lerps."""
    b = np.array(cp, dtype=float)
    for r in range(1, len(b)):
        b[: len(b) - r] = (1.0 - t) * b[: len(b) - r] + t * b[1 : len(b) - r + 1]
    return b[0]


def eval_patch(cp, t):
    """Point(s) of the cubic patch ``cp`` (shape ``(4, 2)``) at ``t``.

    Scalar ``t`` goes through de Casteljau; an array of parameters is
    evaluated in one shot through the Bernstein matrix.
    """
    t = _check_param(t)
    cp = np.asarray(cp, dtype=float)
    if t.ndim == 0:
        return de_casteljau(cp, float(t))
    return bernstein_matrix(t) @ cp


@dataclass(frozen=True, eq=False)
class ClosedPiecewiseCurve:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] % 3 or pts.shape[0] < 6:
            raise ValueError("a closed curve needs 3N control points with N >= 2")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_patches(cls, patches) -> "ClosedPiecewiseCurve":
        """Build from an ``(N, 4, 2)`` patch list; shared ends must match exactly."""
        patches = np.asarray(patches, dtype=float)
        if patches.ndim != 3 or patches.shape[1:] != (4, 2) or len(patches) < 2:
            raise ValueError("expected at least two 4-point control polygons")
        nxt = np.roll(patches[:, 0], -1, axis=0)
        bad = np.flatnonzero(np.any(patches[:, 3] != nxt, axis=1))
        if bad.size:
            raise ValueError(f"continuity violated at junction {int(bad[0])}")
        return cls(patches[:, :3].reshape(-1, 2))

    @property
    def n_patches(self) -> int:
        return self.points.shape[0] // 3

    def patch(self, i: int) -> np.ndarray:
        n = self.points.shape[0]
        idx = [(3 * i + k) % n for k in range(4)]
        return self.points[idx]

    def patches(self) -> np.ndarray:
        n = self.n_patches
        idx = (3 * np.arange(n)[:, None] + np.arange(4)[None, :]) % (3 * n)
        return self.points[idx]

    def reversed(self) -> "ClosedPiecewiseCurve":
        """Same curve, opposite traversal (patch list and each patch reversed)."""
        return ClosedPiecewiseCurve.from_patches(self.patches()[::-1, ::-1])

    def polyline(self, m: int = 50) -> np.ndarray:
        """Closed polyline of ``m`` points per patch (first point not repeated)."""
        basis = bernstein_matrix(np.arange(m) / m)
        return np.einsum("mk,nkd->nmd", basis, self.patches()).reshape(-1, 2)

    def orientation(self, m: int = 16) -> int:
        area = signed_area(self.polyline(m))
        return int(np.sign(area))

    def __eq__(self, other):
        if not isinstance(other, ClosedPiecewiseCurve):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.all(self.points == other.points))


def eval_curve(c: ClosedPiecewiseCurve, t: float) -> np.ndarray:
    """Global parameterisation: patch ``i = min(floor(N t), N - 1)`` (0-based)."""
    t = float(_check_param(t))
    n = c.n_patches
    i = min(int(np.floor(n * t)), n - 1)
    return eval_patch(c.patch(i), n * t - i)


@dataclass(frozen=True, eq=False)
class ShapeConfiguration:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a shape needs at least one component")
        for c in comps:
            if not isinstance(c, ClosedPiecewiseCurve):
                raise TypeError("components must be ClosedPiecewiseCurve instances")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_patch_lists(cls, comps) -> "ShapeConfiguration":
        return cls(tuple(ClosedPiecewiseCurve.from_patches(p) for p in comps))

    def __len__(self):
        return len(self.components)

    def __eq__(self, other):
        if not isinstance(other, ShapeConfiguration):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self.components, other.components))

    @property
    def n_patches(self) -> int:
        return sum(c.n_patches for c in self.components)

    @property
    def n_control_points(self) -> int:
        return sum(c.points.shape[0] for c in self.components)

    def flat_points(self) -> np.ndarray:
        return np.concatenate([c.points for c in self.components])

    def with_flat_points(self, flat) -> "ShapeConfiguration":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_control_points, 2):
            raise ValueError("control point array has the wrong shape")
        out, start = [], 0
        for c in self.components:
            stop = start + c.points.shape[0]
            out.append(ClosedPiecewiseCurve(flat[start:stop]))
            start = stop
        return ShapeConfiguration(tuple(out))

    def orientations(self) -> List[int]:
        return [c.orientation() for c in self.components]

    def to_dict(self) -> dict:
        return {"components": [c.patches().tolist() for c in self.components]}

    def to_json(self, **kwargs) -> str:
        # float repr in json round-trips doubles exactly
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data) -> "ShapeConfiguration":
        return cls.from_patch_lists(data["components"])

    @classmethod
    def from_json(cls, text: str) -> "ShapeConfiguration":
        return cls.from_dict(json.loads(text))


@dataclass
class SampledBoundary:
    """Per-component closed polylines with patch tags and outward normals.

    ``normals`` point out of each component, i.e. into the PDE domain.
    """

    points: List[np.ndarray] = field(default_factory=list)
    patch_index: List[np.ndarray] = field(default_factory=list)
    tau: List[np.ndarray] = field(default_factory=list)
    normals: List[np.ndarray] = field(default_factory=list)
    m: int = 0

    def __len__(self):
        return len(self.points)


def polyline_normals(loop: np.ndarray) -> np.ndarray:
    """Vertex normals of a closed loop, pointing out of the enclosed region."""
    edges = np.roll(loop, -1, axis=0) - loop
    lengths = np.linalg.norm(edges, axis=1, keepdims=True)
    lengths[lengths == 0] = 1.0
    edge_n = np.column_stack([edges[:, 1], -edges[:, 0]]) / lengths
    if signed_area(loop) < 0:
        edge_n = -edge_n
    vn = edge_n + np.roll(edge_n, 1, axis=0)
    norm = np.linalg.norm(vn, axis=1, keepdims=True)
    # a cusp where both edge normals cancel: fall back to the incoming edge
    cusp = norm[:, 0] < 1e-14
    vn[cusp] = np.roll(edge_n, 1, axis=0)[cusp]
    norm[cusp] = 1.0
    return vn / norm


def sample_boundary(s: ShapeConfiguration, m: int = 50) -> SampledBoundary:
    if m < 3:
        raise ValueError("need at least 3 samples per patch")
    out = SampledBoundary(m=m)
    taus = np.arange(m) / m
    for c in s.components:
        loop = c.polyline(m)
        if not np.all(np.isfinite(loop)):
            raise ValueError("non-finite control points")
        n = c.n_patches
        out.points.append(loop)
        out.patch_index.append(np.repeat(np.arange(n), m))
        out.tau.append(np.tile(taus, n))
        out.normals.append(polyline_normals(loop))
    return out


@dataclass
class Diagnostics:
    issues: List[str]
    orientations: List[int]

    @property
    def ok(self) -> bool:
        return not self.issues


def validate(s: Union[ShapeConfiguration, Sequence]) -> Diagnostics:
    """Report continuity/closure breaks, non-finite values and orientations.

    Accepts a ``ShapeConfiguration`` or raw nested patch lists as found in the
    JSON shape format.
    """
    if isinstance(s, ShapeConfiguration):
        raw = [c.patches() for c in s.components]
    elif isinstance(s, dict):
        raw = [np.asarray(p, dtype=float) for p in s["components"]]
    else:
        raw = [np.asarray(p, dtype=float) for p in s]
    issues, orient = [], []
    for ci, patches in enumerate(raw):
        if patches.ndim != 3 or patches.shape[1:] != (4, 2):
            issues.append(f"component {ci}: malformed control polygons")
            orient.append(0)
            continue
        if len(patches) < 2:
            issues.append(f"component {ci}: fewer than two patches")
        if not np.all(np.isfinite(patches)):
            issues.append(f"component {ci}: non-finite coordinates")
        n = len(patches)
        for i in range(n - 1):
            if np.any(patches[i, 3] != patches[i + 1, 0]):
                issues.append(f"component {ci}: continuity violation at junction {i}")
        if np.any(patches[-1, 3] != patches[0, 0]):
            issues.append(f"component {ci}: closure violation")
        basis = bernstein_matrix(np.arange(16) / 16)
        loop = np.einsum("mk,nkd->nmd", basis, patches).reshape(-1, 2)
        orient.append(int(np.sign(signed_area(loop))) if np.all(np.isfinite(loop)) else 0)
    return Diagnostics(issues, orient)


def circle_curve(center=(0.0, 0.0), radius: float = 1.0, n_patches: int = 4, phase: float = 0.0) -> ClosedPiecewiseCurve:
    """Counterclockwise circle made of ``n_patches`` cubic arcs."""
    cx, cy = center
    step = 2 * np.pi / n_patches
    k = 4.0 / 3.0 * np.tan(step / 4.0)
    pts = []
    for i in range(n_patches):
        a = phase + i * step
        p0 = np.array([np.cos(a), np.sin(a)])
        tangent = np.array([-np.sin(a), np.cos(a)])
        b = a + step
        p3 = np.array([np.cos(b), np.sin(b)])
        tangent3 = np.array([-np.sin(b), np.cos(b)])
        pts += [p0, p0 + k * tangent, p3 - k * tangent3]
    return ClosedPiecewiseCurve(np.array([cx, cy]) + radius * np.array(pts))


def polygon_curve(corners) -> ClosedPiecewiseCurve:
    """Closed curve whose patches are the straight sides of a polygon."""
    corners = np.asarray(corners, dtype=float)
    nxt = np.roll(corners, -1, axis=0)
    pts = np.stack([corners, corners + (nxt - corners) / 3.0, corners + 2.0 * (nxt - corners) / 3.0], axis=1)
    return ClosedPiecewiseCurve(pts.reshape(-1, 2))


def fit_closed_curve(func, n_patches: int, n_fit: int = 400) -> ClosedPiecewiseCurve:
    """Least-squares fit of a periodic parametric curve ``func(theta) -> (n, 2)``.

    Junctions interpolate ``func`` at ``theta = 2 pi i / N``; interior points
    minimise the squared error over ``n_fit`` samples per patch.
    """
    tau = (np.arange(n_fit) + 0.5) / n_fit
    basis = bernstein_matrix(tau)
    pts = []
    for i in range(n_patches):
        th0 = 2 * np.pi * i / n_patches
        th1 = 2 * np.pi * (i + 1) / n_patches
        p0 = np.asarray(func(np.array([th0])), dtype=float)[0]
        p3 = np.asarray(func(np.array([th1])), dtype=float)[0]
        target = np.asarray(func(th0 + tau * (th1 - th0)), dtype=float)
        rhs = target - np.outer(basis[:, 0], p0) - np.outer(basis[:, 3], p3)
        inner, *_ = np.linalg.lstsq(basis[:, 1:3], rhs, rcond=None)
        pts += [p0, inner[0], inner[1]]
    return ClosedPiecewiseCurve(np.array(pts))
