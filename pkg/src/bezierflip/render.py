"""SVG snapshots of a reconstruction: domain, target and current shape."""

from typing import Sequence, Union

import numpy as np

from .bezier import ShapeConfiguration
from .pde import DomainSpec

SIZE = 480


def _loops(shape, m):
    if isinstance(shape, ShapeConfiguration):
        return [c.polyline(m) for c in shape.components]
    return [np.asarray(l, dtype=float) for l in shape]


def _path(loop, tf) -> str:
    pts = tf(loop)
    head = f"M{pts[0, 0]:.3f},{pts[0, 1]:.3f}"
    body = " ".join(f"L{x:.3f},{y:.3f}" for x, y in pts[1:])
    return f"{head} {body} Z"


def render_svg(
    s: ShapeConfiguration,
    target: Union[ShapeConfiguration, Sequence[np.ndarray], None],
    domain: DomainSpec,
    path,
    samples_per_patch: int = 20,
) -> None:
    """Write an SVG with the outer circle, the target and ``s`` with its control points.

    Output depends only on the inputs, so identical calls give identical files.
    """
    R = domain.outer_radius
    scale = (SIZE / 2 - 10) / R

    def tf(p):
        p = np.atleast_2d(p)
        return np.column_stack([SIZE / 2 + scale * p[:, 0], SIZE / 2 - scale * p[:, 1]])

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        '<g id="domain" fill="none" stroke="black" stroke-width="1">',
        f'<circle cx="{SIZE / 2:.3f}" cy="{SIZE / 2:.3f}" r="{scale * R:.3f}"/>',
        "</g>",
        '<g id="target" fill="none" stroke="green" stroke-width="1.5">',
    ]
    if target is not None:
        lines += [f'<path d="{_path(l, tf)}"/>' for l in _loops(target, samples_per_patch)]
    lines += ["</g>", '<g id="shape" fill="none" stroke="blue" stroke-width="1.5">']
    lines += [f'<path d="{_path(c.polyline(samples_per_patch), tf)}"/>' for c in s.components]
    lines += ["</g>", '<g id="control" fill="red" stroke="none">']
    for c in s.components:
        lines += [f'<circle cx="{x:.3f}" cy="{y:.3f}" r="2"/>' for x, y in tf(c.points)]
    lines += ["</g>", "</svg>", ""]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines))
