"""P1 finite elements for the Laplace problems and boundary flux recovery.

All problems here are pure Dirichlet problems on the same mesh: the state
(``g`` outside, 0 on the obstacle) and the adjoint (flux mismatch outside, 0 on
the obstacle).  They share one factorisation of the interior stiffness block.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import TriMesh


@dataclass(frozen=True)
class DomainSpec:
    outer_radius: float = 10.0
    outer_samples: int = 50
    dirichlet_g: float = 100.0
    margin_d0: float = 1.0

    def __post_init__(self):
        if self.outer_radius <= 0 or self.margin_d0 <= 0 or self.outer_samples < 8:
            raise ValueError("invalid domain specification")

    def outer_polygon(self, samples: int = None) -> np.ndarray:
        n = samples or self.outer_samples
        t = 2 * np.pi * np.arange(n) / n
        return self.outer_radius * np.column_stack([np.cos(t), np.sin(t)])


@dataclass
class FemSolution:
    mesh: TriMesh
    values: np.ndarray


@dataclass
class BoundaryFlux:
    """Normal derivative samples on a boundary loop.

    ``weights`` are the lumped boundary measures (half the two adjacent edge
    lengths); they sum to the loop perimeter.
    """

    points: np.ndarray
    values: np.ndarray
    weights: np.ndarray


def stiffness(mesh: TriMesh) -> sp.csr_matrix:
    if "K" in mesh._cache:
        return mesh._cache["K"]
    v = mesh.vertices[mesh.triangles]
    # barycentric gradients: grad(lambda_k) = rot(edge opposite k) / (2 area)
    e = np.stack([v[:, 2] - v[:, 1], v[:, 0] - v[:, 2], v[:, 1] - v[:, 0]], axis=1)
    area = 0.5 * (e[:, 2, 0] * (-e[:, 1, 1]) - e[:, 2, 1] * (-e[:, 1, 0]))
    if np.any(area <= 0):
        raise ValueError("mesh has non-positive triangles")
    local = np.einsum("tid,tjd->tij", e, e) / (4.0 * area)[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    mesh._cache["K"] = K
    return K


def stiffness_vertex_derivative(mesh: TriMesh, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Derivative of ``w @ K @ u`` with respect to every vertex position, ``(n, 2)``.

    On one triangle ``w K u = A grad(w).grad(u)``; moving vertex ``i`` with
    velocity ``V = phi_i e`` changes it by
    ``A [div V gw.gu - gw.(grad V + grad V^T) gu]``.
    """
    v = mesh.vertices[mesh.triangles]
    e = np.stack([v[:, 2] - v[:, 1], v[:, 0] - v[:, 2], v[:, 1] - v[:, 0]], axis=1)
    area = 0.5 * (e[:, 2, 0] * (-e[:, 1, 1]) - e[:, 2, 1] * (-e[:, 1, 0]))
    grad_phi = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area)[:, None, None]
    gu = np.einsum("ti,tid->td", u[mesh.triangles], grad_phi)
    gw = np.einsum("ti,tid->td", w[mesh.triangles], grad_phi)
    wu = np.sum(gw * gu, axis=1)
    local = (
        grad_phi * wu[:, None, None]
        - gw[:, None, :] * np.einsum("tid,td->ti", grad_phi, gu)[..., None]
        - gu[:, None, :] * np.einsum("tid,td->ti", grad_phi, gw)[..., None]
    ) * area[:, None, None]
    out = np.zeros((mesh.n_vertices, 2))
    np.add.at(out, mesh.triangles.ravel(), local.reshape(-1, 2))
    return out


def _interior_solver(mesh: TriMesh):
    if "lu" not in mesh._cache:
        K = stiffness(mesh)
        bnd = mesh.boundary_nodes()
        interior = np.setdiff1d(np.arange(mesh.n_vertices), bnd)
        if interior.size == 0:
            raise ValueError("singular system: mesh has no interior nodes")
        K = K.tocsc()
        mesh._cache["interior"] = interior
        mesh._cache["K_IB"] = K[interior][:, bnd]
        mesh._cache["lu"] = splu(K[interior][:, interior].tocsc())
    return mesh._cache["lu"], mesh._cache["interior"], mesh._cache["K_IB"]


def solve_dirichlet(mesh: TriMesh, boundary_values: np.ndarray) -> FemSolution:
    """Harmonic P1 field with prescribed values on ``mesh.boundary_nodes()``."""
    lu, interior, K_IB = _interior_solver(mesh)
    bnd = mesh.boundary_nodes()
    u = np.zeros(mesh.n_vertices)
    u[bnd] = boundary_values
    u[interior] = lu.solve(-(K_IB @ np.asarray(boundary_values, dtype=float)))
    return FemSolution(mesh, u)


def solve_state(mesh: TriMesh, spec: DomainSpec, g: float = None) -> FemSolution:
    g = spec.dirichlet_g if g is None else g
    vals = np.zeros(len(mesh.boundary_nodes()))
    vals[: len(mesh.outer)] = g
    return solve_dirichlet(mesh, vals)


def _same_points(a: BoundaryFlux, b: BoundaryFlux) -> bool:
    return a.points.shape == b.points.shape and np.allclose(a.points, b.points, rtol=0, atol=1e-9)


def solve_adjoint(mesh: TriMesh, state_flux: BoundaryFlux, f_b: BoundaryFlux) -> FemSolution:
    if not _same_points(state_flux, f_b) or len(state_flux.values) != len(mesh.outer):
        raise ValueError("state flux and measurement live on different boundary samplings")
    vals = np.zeros(len(mesh.boundary_nodes()))
    vals[: len(mesh.outer)] = 2.0 * (state_flux.values - f_b.values)
    return solve_dirichlet(mesh, vals)


def lumped_weights(loop: np.ndarray) -> np.ndarray:
    edges = np.linalg.norm(np.roll(loop, -1, axis=0) - loop, axis=1)
    return 0.5 * (edges + np.roll(edges, 1))


def boundary_flux(mesh: TriMesh, sol: FemSolution, which: Union[str, int] = "outer") -> BoundaryFlux:
    """Variational normal derivative on a boundary loop.

    ``which`` is ``"outer"`` or the index of an inner loop.  The normal is
    exterior to the meshed domain on every loop, so on an obstacle it points
    into the obstacle.
    """
    nodes = mesh.outer if which == "outer" else mesh.inner[int(which)]
    residual = stiffness(mesh)[nodes] @ sol.values
    pts = mesh.vertices[nodes]
    w = lumped_weights(pts)
    return BoundaryFlux(pts.copy(), residual / w, w)


def objective(state_flux: BoundaryFlux, f_b: BoundaryFlux) -> float:
    """Lumped quadrature of the squared flux mismatch on the outer boundary."""
    if not _same_points(state_flux, f_b):
        raise ValueError("state flux and measurement live on different boundary samplings")
    return float(np.sum(state_flux.weights * (state_flux.values - f_b.values) ** 2))
