"""Adjoint gradient against finite differences, on a frozen mesh."""

import numpy as np

from bezierflip.optimizer import OptimizerConfig, evaluate, evaluate_on_fixed_mesh
from bezierflip.pde import synthesize_measurement
from bezierflip.scenarios import get_scenario

cfg = OptimizerConfig()
sc = get_scenario("trefoil")
f_b = synthesize_measurement(sc.target(), cfg.domain, h_max=cfg.h_max)
s = sc.initial()
base = evaluate(s, f_b, cfg)
print(f"J at the initial circle: {base.J:.2f} on {base.mesh.n_vertices} vertices")

rng = np.random.default_rng(0)
x0 = s.flat_points()
for kind in ("discrete", "continuous"):
    g = base.gradient(kind)
    errs = []
    for _ in range(5):
        v = rng.normal(size=g.shape)
        v /= np.linalg.norm(v)
        d = 1e-3
        fd = (evaluate_on_fixed_mesh(base, s.with_flat_points(x0 + d * v), cfg).J
              - evaluate_on_fixed_mesh(base, s.with_flat_points(x0 - d * v), cfg).J) / (2 * d)
        errs.append(abs(fd - g.ravel() @ v.ravel()) / abs(fd))
    print(f"{kind:>10} gradient: relative errors", np.round(errs, 4).tolist())
