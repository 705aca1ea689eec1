"""Detecting crossing control polygons and flipping them into connectors."""

import numpy as np

from bezierflip.bezier import ClosedPiecewiseCurve, ShapeConfiguration, circle_curve
from bezierflip.topology import apply_event, detect_events, format_flip_log

# An 8-patch circle with patch 1 on top and patch 5 at the bottom.  Pulling
# their inner control points towards each other pinches a waist; once the
# control polygons cross, a flip is proposed, even though the curves
# themselves still keep apart.
def peanut(pull):
    pts = circle_curve(radius=3.0, n_patches=8, phase=np.pi / 8).points.copy()
    pts[[4, 5], 1] = pull
    pts[[16, 17], 1] = -pull
    return ShapeConfiguration((ClosedPiecewiseCurve(pts),))

for pull in (1.5, 0.5, -0.5):
    events = detect_events(peanut(pull))
    print(f"inner control points at y = {pull:+.1f} (top), {-pull:+.1f} (bottom): {events or 'no events'}")

s = peanut(-0.5)
e = detect_events(s)[0]
divided = apply_event(s, e)
print("after the flip:", len(divided), "components with", [c.n_patches for c in divided.components], "patches")

# pushing two circles together gives a merge event instead
pair = ShapeConfiguration((circle_curve((-1, 0), 1.1, 4, phase=np.pi / 4), circle_curve((1, 0), 1.1, 4, phase=np.pi / 4)))
(m,) = detect_events(pair)
joined = apply_event(pair, m)
print("two circles:", m.kind.value, "->", len(joined), "component with", joined.components[0].n_patches, "patches")
print(format_flip_log(m, True, 1.0, 0.5))
