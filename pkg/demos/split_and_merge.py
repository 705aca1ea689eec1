"""Cutting a cubic in half and gluing it back together."""

import numpy as np

from bezierflip.bezier import circle_curve, eval_patch
from bezierflip.geom2d import point_set_diameter
from bezierflip.patch_ops import enforce_size, merge, split

cp = np.array([(0, 0), (2, 5), (6, 4), (7, 1)], float)
left, right = split(cp)
print("left half :", left.round(4).tolist())
print("right half:", right.round(4).tolist())

# the two halves trace the original curve exactly
t = np.linspace(0, 1, 11)
err = np.abs(np.vstack([eval_patch(left, t), eval_patch(right, t)]) - eval_patch(cp, np.concatenate([t / 2, (1 + t) / 2]))).max()
print(f"largest deviation of the halves from the original: {err:.1e}")

# merging two halves of one cubic recovers it
print("merge(split(cp)) == cp:", np.allclose(merge(left, right), cp))

# merging two unrelated neighbours is only an approximation through four points
q = np.array([(0, 0), (1, 3), (4, 4), (6, 2)], float)
r = np.array([(6, 2), (8, 0), (10, 5), (12, 3)], float)
print("merged neighbours:", merge(q, r).round(4).tolist())

# size control keeps every patch diameter inside [s_min, s_max]
big = circle_curve(radius=7.0, n_patches=4)
fixed = enforce_size(big, 0.4, 4.0)
print(f"radius-7 circle: {big.n_patches} patches -> {fixed.n_patches},",
      "diameters", np.round([point_set_diameter(p) for p in fixed.patches()], 2).tolist())
