"""Built-in reconstruction experiments.

Targets are analytic curves sampled finely and only ever turned into
boundary data; the optimizer never sees their geometry.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from .bezier import ClosedPiecewiseCurve, ShapeConfiguration, circle_curve

TARGET_SAMPLES = 400


@dataclass
class Scenario:
    name: str
    description: str
    target: Callable[[], List[np.ndarray]]
    initial: Callable[[], ShapeConfiguration]
    overrides: Dict = field(default_factory=dict)


def _param_loop(fx, fy, n=TARGET_SAMPLES):
    th = 2 * np.pi * np.arange(n) / n
    return np.column_stack([fx(th), fy(th)])


def circle_loop(center, radius, n=TARGET_SAMPLES):
    cx, cy = center
    return _param_loop(lambda t: cx + radius * np.cos(t), lambda t: cy + radius * np.sin(t), n)


def square_loop(side=10.0, n_per_side=TARGET_SAMPLES // 4):
    h = side / 2
    corners = np.array([[h, -h], [h, h], [-h, h], [-h, -h]])
    t = np.arange(n_per_side)[:, None] / n_per_side
    return np.concatenate([a + t * (b - a) for a, b in zip(corners, np.roll(corners, -1, axis=0))])


def trefoil_loop(n=TARGET_SAMPLES):
    r = lambda t: 2.8 * (1.6 + np.cos(3 * t))
    return _param_loop(lambda t: r(t) * np.cos(t), lambda t: r(t) * np.sin(t), n)


# thin-shape geometry: two disks joined by a narrow neck
DUMBBELL_CENTRE = 4.0
DUMBBELL_RADIUS = 2.0
DUMBBELL_HEIGHT = 4.0
DUMBBELL_NECK = 0.35


def dumbbell_loop(c=DUMBBELL_CENTRE, radius=DUMBBELL_RADIUS, w=DUMBBELL_NECK, n=TARGET_SAMPLES, y0=DUMBBELL_HEIGHT):
    alpha = np.arcsin(w / radius)
    x_neck = c - radius * np.cos(alpha)
    n_arc = int(0.4 * n)
    n_seg = n // 2 - n_arc
    th = np.linspace(-np.pi + alpha, np.pi - alpha, n_arc, endpoint=False)
    right = np.column_stack([c + radius * np.cos(th), radius * np.sin(th)])
    s = np.linspace(0, 1, n_seg, endpoint=False)[:, None]
    top = np.array([x_neck, w]) + s * np.array([-2 * x_neck, 0.0])
    th = np.linspace(alpha, 2 * np.pi - alpha, n_arc, endpoint=False)
    left = np.column_stack([-c + radius * np.cos(th), radius * np.sin(th)])
    bottom = np.array([-x_neck, -w]) + s * np.array([2 * x_neck, 0.0])
    return np.concatenate([right, top, left, bottom]) + [0.0, y0]


def _arc_patches(centre, radius, a0, a1, n):
    pts = []
    step = (a1 - a0) / n
    k = 4.0 / 3.0 * np.tan(step / 4.0)
    for i in range(n):
        a, b = a0 + i * step, a0 + (i + 1) * step
        p0 = centre + radius * np.array([np.cos(a), np.sin(a)])
        p3 = centre + radius * np.array([np.cos(b), np.sin(b)])
        t0 = radius * np.array([-np.sin(a), np.cos(a)])
        t3 = radius * np.array([-np.sin(b), np.cos(b)])
        pts.append([p0, p0 + k * t0, p3 - k * t3, p3])
    return pts


def pinched_dumbbell(c=DUMBBELL_CENTRE, radius=DUMBBELL_RADIUS, w=DUMBBELL_NECK, pinch=0.08, y0=DUMBBELL_HEIGHT) -> ShapeConfiguration:
    """Dumbbell whose neck patches bow inwards so their control polygons cross.

    The neck curves stay apart (closest gap about ``w/4 - 3 pinch/2`` below zero
    is avoided by the choice of ``pinch``), only the polygons intersect.
    """
    alpha = np.arcsin(w / radius)
    x_neck = c - radius * np.cos(alpha)
    right = _arc_patches(np.array([c, 0.0]), radius, -np.pi + alpha, np.pi - alpha, 4)
    left = _arc_patches(np.array([-c, 0.0]), radius, alpha, 2 * np.pi - alpha, 4)
    top = [[x_neck, w], [x_neck / 3, -pinch], [-x_neck / 3, -pinch], [-x_neck, w]]
    bottom = [[-x_neck, -w], [-x_neck / 3, pinch], [x_neck / 3, pinch], [x_neck, -w]]
    patches = np.array(right + [top] + left + [bottom], dtype=float)
    # arc ends are recomputed trigonometrically; snap junctions to be shared exactly
    for i in range(len(patches)):
        patches[i, 3] = patches[(i + 1) % len(patches), 0]
    patches[..., 1] += y0
    return ShapeConfiguration((ClosedPiecewiseCurve.from_patches(patches),))


def _one(curve):
    return lambda: ShapeConfiguration((curve(),))


def builtin_scenarios() -> List[Scenario]:
    return [
        Scenario(
            "circle",
            "circle of radius 6 at the origin, 4 patches",
            lambda: [circle_loop((0, 0), 6.0)],
            _one(lambda: circle_curve((0, 0), 3.0, 4)),
        ),
        Scenario(
            "ellipse",
            "ellipse (8 cos t, 5 sin t), 4 patches",
            lambda: [_param_loop(lambda t: 8 * np.cos(t), lambda t: 5 * np.sin(t))],
            _one(lambda: circle_curve((0, 0), 3.0, 4)),
        ),
        Scenario(
            "square",
            "square of side 10 centred at the origin, 4 patches",
            lambda: [square_loop(10.0)],
            _one(lambda: circle_curve((0, 0), 3.0, 4, phase=-np.pi / 4)),
        ),
        Scenario(
            "trefoil",
            "non-convex r = 2.8 (1.6 + cos 3t), 6 patches",
            lambda: [trefoil_loop()],
            _one(lambda: circle_curve((0, 0), 3.0, 6)),
        ),
        Scenario(
            "two-circles",
            "two circles of radius 2 at (-4,-4) and (4,4) from one centred 4-patch circle",
            lambda: [circle_loop((-4, -4), 2.0), circle_loop((4, 4), 2.0)],
            _one(lambda: circle_curve((0, 0), 2.5, 4)),
            {"smoothing_length": 2.0, "lbfgs_memory": 8, "perimeter_weight": 1.0, "max_backtracks": 16, "max_iterations": 1500},
        ),
        Scenario(
            "thin-shape",
            "one component with a thin neck; the neck flip must be cancelled",
            lambda: [dumbbell_loop()],
            pinched_dumbbell,
            {"max_iterations": 40, "s_max": 5.0},
        ),
        Scenario(
            "merge-start",
            "ellipse (4 cos t, 6 + 2.5 sin t) from a two-component start",
            lambda: [_param_loop(lambda t: 4 * np.cos(t), lambda t: 6 + 2.5 * np.sin(t))],
            lambda: ShapeConfiguration((circle_curve((-2.0, 6.0), 1.9, 4, phase=np.pi / 4), circle_curve((2.0, 6.0), 1.9, 4, phase=np.pi / 4))),
        ),
    ]


def get_scenario(name: str) -> Scenario:
    for sc in builtin_scenarios():
        if sc.name == name:
            return sc
    raise KeyError(f"unknown scenario {name!r}")
