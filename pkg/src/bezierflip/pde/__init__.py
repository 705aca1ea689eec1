"""Meshing, P1 solves and flux recovery for the obstacle problem."""

from .fem import (
    BoundaryFlux,
    DomainSpec,
    FemSolution,
    boundary_flux,
    lumped_weights,
    objective,
    solve_adjoint,
    solve_dirichlet,
    solve_state,
    stiffness,
    stiffness_vertex_derivative,
)
from .measurement import resample_periodic, synthesize_measurement
from .mesh import TriMesh, hex_lattice, triangulate, write_off
