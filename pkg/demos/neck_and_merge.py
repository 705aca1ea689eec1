"""A flip across a real neck is rolled back; two blobs that should be one are joined."""

from bezierflip.optimizer import OptimizerConfig, run_algorithm_A
from bezierflip.pde import synthesize_measurement
from bezierflip.scenarios import get_scenario

for name in ("thin-shape", "merge-start"):
    sc = get_scenario(name)
    cfg = OptimizerConfig.from_dict(dict(sc.overrides))
    f_b = synthesize_measurement(sc.target(), cfg.domain, h_max=cfg.h_max)
    state = run_algorithm_A(sc.initial(), f_b, cfg)
    print(f"{name}: {len(state.history)} iterations, J {state.history[0].J:.4g} -> {state.history[-1].J:.4g},",
          f"{len(state.shape)} component(s) at the end")
    for line in state.flip_log[:3]:
        print("   ", line)
