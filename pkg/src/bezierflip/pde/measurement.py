"""Synthetic boundary data from a known obstacle."""

from typing import List, Sequence, Union

import numpy as np

from ..bezier import ShapeConfiguration
from .fem import BoundaryFlux, DomainSpec, boundary_flux, lumped_weights, solve_state
from .mesh import triangulate


def _target_loops(target, m: int) -> List[np.ndarray]:
    if isinstance(target, ShapeConfiguration):
        return [c.polyline(m) for c in target.components]
    return [np.asarray(l, dtype=float) for l in target]


def resample_periodic(src_points: np.ndarray, src_values: np.ndarray, dst_points: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation in arc length along a closed loop.

    Both samplings lie on the same closed curve; the destination points are
    located by their polar angle, which is proportional to arc length on the
    circular outer boundary.
    """
    ang_src = np.mod(np.arctan2(src_points[:, 1], src_points[:, 0]), 2 * np.pi)
    order = np.argsort(ang_src)
    ang_src, vals = ang_src[order], np.asarray(src_values)[order]
    ang_dst = np.mod(np.arctan2(dst_points[:, 1], dst_points[:, 0]), 2 * np.pi)
    return np.interp(ang_dst, ang_src, vals, period=2 * np.pi)


def synthesize_measurement(
    target: Union[ShapeConfiguration, Sequence[np.ndarray]],
    spec: DomainSpec,
    h_max: float = 0.7,
    m: int = 50,
) -> BoundaryFlux:
    """Outer flux of the exact obstacle, computed on a finer, different mesh.

    The data mesh uses twice the outer boundary samples, twice the obstacle
    samples and half ``h_max``; the flux is then resampled onto the outer
    polygon used for reconstruction.  ``target`` is a shape or a list of
    closed polylines (analytic curves sampled finely).
    """
    loops = _target_loops(target, 2 * m)
    radius_limit = spec.outer_radius - spec.margin_d0
    for loop in loops:
        if np.any(np.linalg.norm(loop, axis=1) > radius_limit):
            raise ValueError("target violates the boundary margin")
    fine_outer = spec.outer_polygon(2 * spec.outer_samples)
    mesh = triangulate(fine_outer, loops, 0.5 * h_max)
    u = solve_state(mesh, spec)
    fine = boundary_flux(mesh, u, "outer")
    coarse = spec.outer_polygon()
    return BoundaryFlux(coarse, resample_periodic(fine.points, fine.values, coarse), lumped_weights(coarse))
