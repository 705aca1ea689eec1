"""Shape-gradient descent on Bezier control points with topology flips.

The descent loop per iteration: size control, collision scan with a
flip attempt, state + adjoint solves, control-point gradient, backtracking
line search.  A flip is kept only if it lowers the objective below
``flip_tolerance`` times its current value.
"""

import logging
import math
from functools import lru_cache
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .bezier import SampledBoundary, ShapeConfiguration, bernstein_matrix, sample_boundary
from .geom2d import points_in_polygon
from .patch_ops import enforce_size_shape
from .pde import (
    BoundaryFlux,
    DomainSpec,
    TriMesh,
    boundary_flux,
    hex_lattice,
    objective,
    solve_adjoint,
    solve_dirichlet,
    solve_state,
    stiffness_vertex_derivative,
    triangulate,
)
from .topology import (
    EventKind,
    IntersectionEvent,
    apply_event,
    format_flip_log,
    intersecting_pairs,
    detect_events,
    colliding_patches,
    is_self_intersecting,
)

logger = logging.getLogger(__name__)

INF = math.inf


class SolverAbort(RuntimeError):
    """Raised when an iteration cannot proceed; ``shape`` is the last iterate."""

    def __init__(self, message, shape=None):
        super().__init__(message)
        self.shape = shape


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 200
    flip_tolerance: float = 1.1
    initial_step: float = 10.0
    armijo_factor: float = 1e-4
    shrink_factor: float = 0.5
    max_backtracks: int = 8
    freeze_rounds: int = 3
    h_max: float = 0.7
    samples_per_patch: int = 50
    s_min: float = 0.4
    s_max: float = 4.0
    enable_component_merge: bool = True
    stagnation_iterations: int = 5
    relative_tolerance: float = 1e-8
    seed: int = 0
    metric: str = "sobolev"
    smoothing_length: float = 1.0
    gradient: str = "discrete"
    lbfgs_memory: int = 0
    mesh_background: bool = True
    obstacle_h: Optional[float] = None
    obstacle_band: float = 0.0
    perimeter_weight: float = 0.0
    deform_mesh: bool = True
    domain: DomainSpec = field(default_factory=DomainSpec)

    def __post_init__(self):
        if self.flip_tolerance < 1:
            raise ValueError("flip_tolerance must be >= 1")
        if not 0 < self.shrink_factor < 1:
            raise ValueError("shrink_factor must lie in (0, 1)")
        if not 0 < self.armijo_factor < 1:
            raise ValueError("armijo_factor must lie in (0, 1)")
        if self.samples_per_patch < 3:
            raise ValueError("samples_per_patch must be >= 3")
        if min(self.max_iterations, self.max_backtracks, self.freeze_rounds, self.lbfgs_memory) < 0:
            raise ValueError("iteration counts must be non-negative")
        if self.metric not in ("euclidean", "sobolev"):
            raise ValueError("metric must be 'euclidean' or 'sobolev'")
        if self.obstacle_h is not None and not (0 < self.obstacle_h <= self.h_max and self.obstacle_band > 0):
            raise ValueError("obstacle_h must lie in (0, h_max] with a positive obstacle_band")
        if self.gradient not in ("discrete", "continuous"):
            raise ValueError("gradient must be 'discrete' or 'continuous'")
        if self.perimeter_weight < 0:
            raise ValueError("perimeter_weight must be non-negative")
        if self.smoothing_length < 0:
            raise ValueError("smoothing_length must be non-negative")

    @property
    def margin_d0(self) -> float:
        return self.domain.margin_d0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerConfig":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(data.get("domain"), dict):
            data["domain"] = DomainSpec(**data["domain"])
        return cls(**data)


@dataclass
class IterationRecord:
    k: int
    J: float
    alpha: float
    components: int
    flip_attempted: bool
    flip_accepted: bool
    control_points: int
    resized: bool = False
    remeshed: bool = False


@dataclass
class Evaluation:
    """Objective value and everything needed to differentiate it."""

    shape: ShapeConfiguration
    J: float
    f_b: Optional[BoundaryFlux] = None
    samples: Optional[SampledBoundary] = None
    mesh: Optional[TriMesh] = None
    u_flux: Optional[BoundaryFlux] = None
    _gradient: Optional[np.ndarray] = None
    deformed: bool = False
    perimeter_weight: float = 0.0

    @property
    def finite(self) -> bool:
        return math.isfinite(self.J)

    def inner_fluxes(self, values: np.ndarray) -> List[BoundaryFlux]:
        from .pde import FemSolution

        sol = FemSolution(self.mesh, values)
        return [boundary_flux(self.mesh, sol, k) for k in range(len(self.mesh.inner))]

    def gradient(self, kind: str = "discrete") -> np.ndarray:
        """dJ/d(control points); ``kind`` picks the discrete or the boundary-integral form."""
        if self._gradient is None or self._gradient[0] != kind:
            if not self.finite:
                raise ValueError("no gradient for an infeasible shape")
            u = self.mesh._cache["u"]
            w = solve_adjoint(self.mesh, self.u_flux, self.f_b).values
            if kind == "discrete":
                g = discrete_gradient(self.shape, self.mesh, u, w, self.samples)
            elif kind == "continuous":
                g = control_point_gradient(self.shape, self.inner_fluxes(u), self.inner_fluxes(w), self.samples)
            else:
                raise ValueError(f"unknown gradient kind {kind!r}")
            if self.perimeter_weight:
                g = g + self.perimeter_weight * perimeter_gradient(self.shape, self.samples)
            self._gradient = (kind, g)
        return self._gradient[1]


@dataclass
class OptimizerState:
    k: int = 0
    shape: Optional[ShapeConfiguration] = None
    history: List[IterationRecord] = field(default_factory=list)
    flip_log: List[str] = field(default_factory=list)


def control_point_gradient(
    s: ShapeConfiguration,
    u_flux_inner: List[BoundaryFlux],
    w_flux_inner: List[BoundaryFlux],
    samples: SampledBoundary,
) -> np.ndarray:
    """Gradient of J with respect to every distinct control point, ``(n, 2)``.

    A unit move of control point ``j`` of patch ``i`` moves the boundary by
    ``b_j(tau)`` on that patch.  The fluxes use the normal exterior to the
    meshed domain (pointing into the obstacle), which is ``-normals``.
    """
    if not (len(u_flux_inner) == len(w_flux_inner) == len(samples) == len(s)):
        raise ValueError("one flux per component is required")
    out = []
    for c, qu, qw, pts, patch, tau, nrm in zip(
        s.components, u_flux_inner, w_flux_inner, samples.points, samples.patch_index, samples.tau, samples.normals
    ):
        if not (len(qu.values) == len(qw.values) == len(pts)) or not np.allclose(qu.points, pts, atol=1e-9):
            raise ValueError("flux samples do not match the sampled boundary")
        # dJ = -int q_u q_w V.n_dom = int q_u q_w V.n_out
        density = (qu.weights * qu.values * qw.values)[:, None] * nrm
        out.append(_pull_back(c, density, patch, tau))
    return np.concatenate(out)


def _pull_back(c, density, patch, tau) -> np.ndarray:
    """Chain rule from boundary samples to the control points of ``c``."""
    basis = bernstein_matrix(tau)
    n_pts = c.points.shape[0]
    g = np.zeros((n_pts, 2))
    for j in range(4):
        np.add.at(g, (3 * patch + j) % n_pts, basis[:, j : j + 1] * density)
    return g


def perimeter(loop: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(loop, -1, axis=0) - loop, axis=1).sum())


def perimeter_gradient(s: ShapeConfiguration, samples: SampledBoundary) -> np.ndarray:
    """Derivative of the total sampled perimeter with respect to the control points."""
    out = []
    for c, pts, patch, tau in zip(s.components, samples.points, samples.patch_index, samples.tau):
        edges = np.roll(pts, -1, axis=0) - pts
        t = edges / np.linalg.norm(edges, axis=1)[:, None]
        out.append(_pull_back(c, np.roll(t, 1, axis=0) - t, patch, tau))
    return np.concatenate(out)


def discrete_gradient(s: ShapeConfiguration, mesh: TriMesh, u: np.ndarray, w: np.ndarray, samples: SampledBoundary) -> np.ndarray:
    """Exact derivative of the discrete J when only the obstacle nodes move.

    The outer flux is ``(K u) / weights`` and the adjoint ``w`` carries
    ``2 (q - f_b)`` on the outer loop, so ``dJ = w . dK u``.
    """
    per_vertex = stiffness_vertex_derivative(mesh, u, w)
    return np.concatenate(
        [
            _pull_back(c, per_vertex[idx], patch, tau)
            for c, idx, patch, tau in zip(s.components, mesh.inner, samples.patch_index, samples.tau)
        ]
    )


def boundary_gram(s: ShapeConfiguration, samples: SampledBoundary, length: float) -> List[np.ndarray]:
    """Per-component Gram matrices ``M + length**2 K`` of the control-point basis.

    ``M`` is the L2 inner product of the induced boundary velocities and
    ``K`` the L2 product of their arc-length derivatives, both by lumped
    quadrature on the sampled polyline.
    """
    out = []
    for c, pts, patch, tau in zip(s.components, samples.points, samples.patch_index, samples.tau):
        n_pts = c.points.shape[0]
        basis = bernstein_matrix(tau)
        B = np.zeros((len(pts), n_pts))
        rows = np.arange(len(pts))
        for j in range(4):
            np.add.at(B, (rows, (3 * patch + j) % n_pts), basis[:, j])
        edges = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        w = 0.5 * (edges + np.roll(edges, 1))
        D = (np.roll(B, -1, axis=0) - B) / edges[:, None]
        out.append(B.T @ (w[:, None] * B) + length**2 * D.T @ (edges[:, None] * D))
    return out


def descent_direction(s: ShapeConfiguration, grad: np.ndarray, samples: SampledBoundary, cfg: "OptimizerConfig") -> np.ndarray:
    """Steepest-descent direction of J for the configured control-point metric.

    ``"euclidean"`` returns ``grad`` itself.  ``"sobolev"`` returns the
    control-point field whose boundary velocity represents the derivative in
    the H1 inner product along the boundary, which keeps junctions and corners
    from dominating the step.
    """
    if cfg.metric == "euclidean":
        return grad
    out, start = [], 0
    for c, G in zip(s.components, boundary_gram(s, samples, cfg.smoothing_length)):
        n = c.points.shape[0]
        out.append(np.linalg.solve(G, grad[start : start + n]))
        start += n
    return np.concatenate(out)


class QuasiNewton:
    """Limited-memory BFGS on top of the descent metric.

    The metric's own direction plays the role of the initial inverse
    Hessian, so with no stored pairs this is plain steepest descent in that
    metric.  Pairs are dropped whenever the patch layout changes.
    """

    def __init__(self, memory: int):
        self.memory = memory
        self.pairs = []
        self._last = None

    def reset(self):
        self.pairs.clear()
        self._last = None

    def direction(self, s: ShapeConfiguration, grad: np.ndarray, samples: SampledBoundary, cfg) -> np.ndarray:
        precond = lambda v: descent_direction(s, v, samples, cfg)
        layout = tuple(c.n_patches for c in s.components)
        x = s.flat_points()
        if self._last is not None and self._last[2] == layout:
            sk, yk = x - self._last[0], grad - self._last[1]
            sy = float(np.sum(sk * yk))
            if sy > 1e-10 * np.sqrt(np.sum(sk**2) * np.sum(yk**2)):
                self.pairs = (self.pairs + [(sk, yk, 1.0 / sy)])[-self.memory :]
        elif self._last is not None:
            self.pairs.clear()
        self._last = (x, grad, layout)
        if not self.pairs:
            return precond(grad)
        q = grad.copy()
        coeffs = []
        for sk, yk, rho in reversed(self.pairs):
            a = rho * np.sum(sk * q)
            q -= a * yk
            coeffs.append(a)
        sk, yk, rho = self.pairs[-1]
        hy = precond(yk)
        r = (np.sum(sk * yk) / np.sum(yk * hy)) * precond(q)
        for (sk, yk, rho), a in zip(self.pairs, reversed(coeffs)):
            r += sk * (a - rho * np.sum(yk * r))
        if np.sum(grad * r) <= 0:
            self.reset()
            self._last = (x, grad, layout)
            return precond(grad)
        return r


def within_margin(samples: SampledBoundary, domain: DomainSpec) -> bool:
    limit = domain.outer_radius - domain.margin_d0
    return all(np.all(np.linalg.norm(p, axis=1) <= limit) for p in samples.points)


def _nested(loops: List[np.ndarray]) -> bool:
    for a in range(len(loops)):
        for b in range(len(loops)):
            if a != b and points_in_polygon(loops[a][:1], loops[b])[0]:
                return True
    return False


@lru_cache(maxsize=8)
def _background(domain: DomainSpec, h_max: float) -> np.ndarray:
    pts = hex_lattice(domain.outer_polygon(), h_max)
    pts.setflags(write=False)
    return pts


def evaluate(s: ShapeConfiguration, f_b: BoundaryFlux, cfg: OptimizerConfig) -> Evaluation:
    """Objective of ``s``; ``J = inf`` for self-intersecting or nested shapes."""
    if is_self_intersecting(s, cfg.samples_per_patch):
        return Evaluation(s, INF)
    samples = sample_boundary(s, cfg.samples_per_patch)
    if _nested(samples.points):
        return Evaluation(s, INF)
    outer = cfg.domain.outer_polygon()
    bg = _background(cfg.domain, cfg.h_max) if cfg.mesh_background else None
    mesh = triangulate(
        outer, samples.points, cfg.h_max, check=False, background=bg, near_h=cfg.obstacle_h, near_band=cfg.obstacle_band
    )
    mesh.inner_patch = samples.patch_index
    mesh.inner_tau = samples.tau
    return _evaluate_on_mesh(s, mesh, samples, f_b, cfg)


def _evaluate_on_mesh(s, mesh, samples, f_b, cfg) -> Evaluation:
    u = solve_state(mesh, cfg.domain)
    mesh._cache["u"] = u.values
    q = boundary_flux(mesh, u, "outer")
    J = objective(q, f_b)
    if cfg.perimeter_weight:
        J += cfg.perimeter_weight * sum(perimeter(p) for p in samples.points)
    return Evaluation(s, J, f_b, samples, mesh, q, perimeter_weight=cfg.perimeter_weight)


def evaluate_on_fixed_mesh(base: Evaluation, s: ShapeConfiguration, cfg: OptimizerConfig) -> Evaluation:
    """Objective of ``s`` on ``base``'s mesh with only the obstacle nodes moved.

    ``s`` must have the same patch layout as ``base.shape``.  Used for finite
    difference checks, where remeshing noise would swamp small perturbations.
    """
    samples = sample_boundary(s, cfg.samples_per_patch)
    mesh = base.mesh.with_inner_moved(samples.points)
    return _evaluate_on_mesh(s, mesh, samples, base.f_b, cfg)


MIN_ANGLE_RATIO = 0.5


def evaluate_deformed(base: Evaluation, s: ShapeConfiguration, cfg: OptimizerConfig) -> Evaluation:
    """Objective of ``s`` on ``base``'s mesh, deformed to fit ``s``.

    The obstacle displacement is extended harmonically into the domain, so
    nearby shapes are compared on one mesh topology and ``J`` varies smoothly
    with the step.  Falls back to a fresh mesh when a triangle would fold or
    its smallest angle would shrink below ``MIN_ANGLE_RATIO`` times the angle
    it had when ``base``'s mesh was generated.
    """
    mesh = base.mesh
    if mesh is None or s.n_control_points != base.shape.n_control_points or len(s) != len(base.shape):
        return evaluate(s, base.f_b, cfg)
    if is_self_intersecting(s, cfg.samples_per_patch):
        return Evaluation(s, INF)
    samples = sample_boundary(s, cfg.samples_per_patch)
    if _nested(samples.points):
        return Evaluation(s, INF)
    inner = np.concatenate(mesh.inner)
    new_inner = np.concatenate(samples.points)
    disp = np.zeros((len(mesh.boundary_nodes()), 2))
    disp[len(mesh.outer) :] = new_inner - mesh.vertices[inner]
    verts = mesh.vertices + np.column_stack([solve_dirichlet(mesh, disp[:, k]).values for k in range(2)])
    verts[inner] = new_inner
    moved = TriMesh(verts, mesh.triangles, mesh.outer, mesh.inner, samples.patch_index, samples.tau)
    reference = mesh._cache.setdefault("angles0", mesh.min_angles())
    if np.any(moved.signed_areas() <= 0) or np.any(moved.min_angles() < MIN_ANGLE_RATIO * reference):
        return evaluate(s, base.f_b, cfg)
    moved._cache["angles0"] = reference
    ev = _evaluate_on_mesh(s, moved, samples, base.f_b, cfg)
    ev.deformed = True
    return ev


@dataclass
class LineSearchResult:
    alpha: float
    shape: ShapeConfiguration
    evaluation: Optional[Evaluation]
    J: float
    trials: int
    contact: Optional[Tuple[float, ShapeConfiguration]] = None


def _first_contact(s, base, d, lo, hi, steps=30):
    """Smallest step in ``(lo, hi]`` at which control polygons collide."""
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if intersecting_pairs(s.with_flat_points(base - mid * d)):
            hi = mid
        else:
            lo = mid
    return hi


def line_search(
    s: ShapeConfiguration,
    grad: np.ndarray,
    J0: float,
    f_b: BoundaryFlux,
    cfg: OptimizerConfig,
    evaluator: Callable = None,
    direction: np.ndarray = None,
    find_contact: bool = False,
    base: Evaluation = None,
    unit_step: bool = False,
) -> LineSearchResult:
    """Backtracking Armijo search along ``-direction`` (default ``-grad``).

    The first trial moves the fastest control point by
    ``initial_step * s_max / 100``; sufficient decrease is measured with the
    slope ``grad . direction``.  Trials leaving the margin or producing a
    self-intersecting shape count as rejections.  ``alpha == 0`` means no
    acceptable step was found.

    With ``find_contact``, a failed search whose trials made control polygons
    collide also reports ``contact``: the step (found by bisection) at which
    the first collision occurs and the shape there.

    Given ``base`` (the evaluation of ``s``) and ``cfg.deform_mesh``, trials
    reuse its mesh through ``evaluate_deformed``.  With ``unit_step`` the
    first trial is ``alpha = 1`` unless that exceeds the move cap.
    """
    if evaluator is None:
        if base is not None and cfg.deform_mesh:
            evaluator = lambda shape: evaluate_deformed(base, shape, cfg)
        else:
            evaluator = lambda shape: evaluate(shape, f_b, cfg)
    grad = np.asarray(grad, dtype=float)
    d = grad if direction is None else np.asarray(direction, dtype=float)
    dmax = float(np.max(np.linalg.norm(d, axis=1))) if d.size else 0.0
    g2 = float(np.sum(grad * d))
    if not (dmax > 0 and g2 > 0):
        return LineSearchResult(0.0, s, None, J0, 0)
    x0 = s.flat_points()
    trials = 0
    colliding = []
    first = True
    for _ in range(cfg.freeze_rounds + 1):
        alpha = cfg.initial_step * cfg.s_max * 1e-2 / dmax
        if unit_step:
            alpha = min(alpha, 1.0)
        for _ in range(cfg.max_backtracks + 1):
            trials += 1
            cand = s.with_flat_points(x0 - alpha * d)
            samples = sample_boundary(cand, cfg.samples_per_patch)
            if within_margin(samples, cfg.domain):
                ev = evaluator(cand)
                if ev.finite and ev.J <= J0 - cfg.armijo_factor * alpha * g2:
                    return LineSearchResult(alpha, cand, ev, ev.J, trials)
                if find_contact and first:
                    colliding.append((alpha, bool(intersecting_pairs(cand))))
            alpha *= cfg.shrink_factor
        first = False
        # even the shortest trial crosses itself: hold the crossing patches
        # still and search again along what is left of the direction
        hit = colliding_patches(cand, cfg.samples_per_patch)
        rows = _patch_rows(s, hit)
        if not hit or not np.any(d[rows]):
            break
        d = d.copy()
        d[rows] = 0.0
        dmax = float(np.max(np.linalg.norm(d, axis=1)))
        g2 = float(np.sum(grad * d))
        if not (dmax > 0 and g2 > 0):
            break
        logger.debug("line search: freezing %d patches", len(hit))
    contact = None
    if find_contact and any(c for _, c in colliding) and not intersecting_pairs(s):
        hi = min(a for a, c in colliding if c)
        lo = max([a for a, c in colliding if not c and a < hi], default=0.0)
        d0 = grad if direction is None else np.asarray(direction, dtype=float)
        a_c = _first_contact(s, x0, d0, lo, hi)
        contact = (a_c, s.with_flat_points(x0 - a_c * d0))
    return LineSearchResult(0.0, s, None, J0, trials, contact)


def _patch_rows(s: ShapeConfiguration, tags) -> np.ndarray:
    """Flat control-point rows of the tagged ``(component, patch)`` pairs."""
    offsets = np.cumsum([0] + [3 * c.n_patches for c in s.components])
    rows = [offsets[ci] + (3 * i + k) % (3 * s.components[ci].n_patches) for ci, i in tags for k in range(4)]
    return np.unique(np.asarray(rows, dtype=int))


def topology_ok(before: ShapeConfiguration, after: ShapeConfiguration, e: IntersectionEvent) -> bool:
    """Post-flip checks: no colliding control polygons, orientation preserved."""
    if intersecting_pairs(after):
        return False
    if e.kind is EventKind.MERGE:
        return True
    want = before.components[e.components[0]].orientation()
    ci = e.components[0]
    return all(after.components[k].orientation() == want for k in (ci, ci + 1))


def _attempt_flip(s: ShapeConfiguration, J_s: float, f_b, cfg):
    """Scan ``s`` and try its first event; returns (event, flipped evaluation) or None."""
    events = detect_events(s)
    if not events:
        return None
    e = events[0]
    if e.kind is EventKind.MERGE and not cfg.enable_component_merge:
        return None
    try:
        flipped = apply_event(s, e)
    except ValueError as exc:
        logger.info("flip skipped: %s", exc)
        return None
    fev = evaluate(flipped, f_b, cfg) if topology_ok(s, flipped, e) else Evaluation(flipped, INF)
    return e, fev


def _contact_flip_ok(contact: ShapeConfiguration, J_cur: float, f_b, cfg) -> Optional[Tuple]:
    """Whether the next iteration would accept a flip at ``contact`` without raising J.

    Replays that iteration's size control and scan; returns
    (resized contact, its evaluation) when the flip would be accepted with
    ``J(flipped) < flip_tolerance * min(J(contact), J_cur)``.
    """
    resized = enforce_size_shape(contact, cfg.s_min, cfg.s_max)
    ev = evaluate(resized, f_b, cfg)
    tried = _attempt_flip(resized, ev.J, f_b, cfg)
    if tried is None:
        return None
    if tried[1].J < cfg.flip_tolerance * min(ev.J, J_cur):
        return resized, ev
    return None


def run_algorithm_A(
    initial: ShapeConfiguration,
    f_b: BoundaryFlux,
    cfg: OptimizerConfig,
    callback: Callable = None,
) -> OptimizerState:
    """Run the descent loop; ``callback(state, shape, record)`` after each iteration."""
    state = OptimizerState(shape=initial)
    s = initial
    try:
        cur = evaluate(s, f_b, cfg)
    except (RuntimeError, ValueError) as exc:
        raise SolverAbort(f"initial shape: {exc}", s) from exc
    J_init = cur.J
    stalled = 0
    pending = None  # (shape, evaluation) to fall back to if a contact step is not flipped
    qn = QuasiNewton(cfg.lbfgs_memory) if cfg.lbfgs_memory else None
    for k in range(cfg.max_iterations):
        state.k = k
        try:
            s, cur, stalled, pending, stop = _iteration(k, s, cur, stalled, pending, state, f_b, cfg, callback, qn)
        except SolverAbort:
            raise
        except (RuntimeError, ValueError) as exc:
            raise SolverAbort(f"iteration {k}: {exc}", s) from exc
        if stop or cur.J <= cfg.relative_tolerance * J_init:
            break
    if pending is not None:
        state.shape = pending[0]
    return state


def _iteration(k, s, cur, stalled, pending, state, f_b, cfg, callback, qn):
    resized_shape = enforce_size_shape(s, cfg.s_min, cfg.s_max)
    resized = resized_shape is not s
    if resized:
        rev = evaluate(resized_shape, f_b, cfg)
        if rev.finite or not cur.finite:
            s, cur = resized_shape, rev
        else:
            # a merge that makes the curve cross itself is put off
            resized = False

    attempted = accepted = False
    tried = _attempt_flip(s, cur.J, f_b, cfg)
    if tried is not None:
        e, fev = tried
        attempted = True
        accepted = fev.J < cfg.flip_tolerance * cur.J
        line = format_flip_log(e, accepted, cur.J, fev.J)
        state.flip_log.append(line)
        logger.info(line)
        if accepted:
            s, cur = fev.shape, fev

    retry_contact = True
    if pending is not None:
        if not accepted:
            # safety net: the replayed flip did not happen, undo the contact step
            s, cur = pending
            resized = False
            retry_contact = False
            stalled += 1
        pending = None

    if not cur.finite:
        raise SolverAbort(f"iteration {k}: current shape is infeasible (self-intersecting or nested)", s)

    remeshed = False
    while True:
        grad = cur.gradient(cfg.gradient)
        if qn is None:
            direction = descent_direction(s, grad, cur.samples, cfg)
        else:
            direction = qn.direction(s, grad, cur.samples, cfg)
        ls = line_search(
            s, grad, cur.J, f_b, cfg, direction=direction, find_contact=retry_contact, base=cur, unit_step=qn is not None
        )
        if ls.alpha > 0 or (not cur.deformed and (qn is None or not qn.pairs)):
            break
        if qn is not None and qn.pairs and not cur.deformed:
            # the curvature memory led nowhere: retry along the plain metric direction
            qn.reset()
            continue
        # the moved mesh may have drifted too far from a fresh one; start over
        cur = evaluate(s, f_b, cfg)
        remeshed = True
        if qn is not None:
            qn.reset()
        if not cur.finite:
            raise SolverAbort(f"iteration {k}: current shape is infeasible after remeshing", s)
    rec = IterationRecord(k, cur.J, ls.alpha, len(s), attempted, accepted, s.n_control_points, resized, remeshed)
    state.history.append(rec)
    shape_k = s

    contact = None
    if ls.alpha > 0:
        s, cur = ls.shape, ls.evaluation
        stalled = 0
    elif ls.contact is not None and (contact := _contact_flip_ok(ls.contact[1], cur.J, f_b, cfg)):
        # move to the first contact of two control polygons; the next scan flips it
        pending = (s, cur)
        rec.alpha = ls.contact[0]
        s, cur = contact
    else:
        stalled += 1
    state.shape = s
    if callback is not None:
        callback(state, shape_k, rec)
    return s, cur, stalled, pending, stalled >= cfg.stagnation_iterations
