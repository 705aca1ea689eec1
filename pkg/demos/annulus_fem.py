"""The P1 solver on an annulus, where the answer is known in closed form."""

import numpy as np

from bezierflip.pde import DomainSpec, boundary_flux, solve_state, triangulate

R, r0, g = 10.0, 6.0, 100.0
exact = g / (R * np.log(R / r0))
print(f"exact outer flux: {exact:.4f}")


def ring(radius, n):
    t = 2 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(t), np.sin(t)])


prev = None
for h in (1.0, 0.5, 0.25):
    mesh = triangulate(ring(R, int(np.ceil(2 * np.pi * R / h))), [ring(r0, int(np.ceil(2 * np.pi * r0 / h)))[::-1]], h)
    u = solve_state(mesh, DomainSpec())
    q = boundary_flux(mesh, u, "outer")
    inner = boundary_flux(mesh, u, 0)
    err = np.abs(q.values - exact).max() / exact
    balance = q.values @ q.weights + inner.values @ inner.weights
    gain = "" if prev is None else f", error ratio {prev / err:.2f}"
    print(f"h={h:<5} {len(mesh.triangles):6d} triangles  flux error {100 * err:.2f}%  net flux {balance:+.1e}{gain}")
    prev = err
