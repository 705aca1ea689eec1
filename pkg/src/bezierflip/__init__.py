"""Topology-changing shape reconstruction with piecewise cubic Bezier curves."""

from .bezier import ClosedPiecewiseCurve, ShapeConfiguration, circle_curve, polygon_curve, sample_boundary, validate
from .optimizer import OptimizerConfig, SolverAbort, evaluate, run_algorithm_A
from .patch_ops import enforce_size, merge, split
from .pde import DomainSpec, synthesize_measurement
from .topology import EventKind, IntersectionEvent, apply_event, detect_events

__version__ = "0.1.0"

__all__ = [
    "ClosedPiecewiseCurve",
    "DomainSpec",
    "EventKind",
    "IntersectionEvent",
    "OptimizerConfig",
    "ShapeConfiguration",
    "SolverAbort",
    "apply_event",
    "circle_curve",
    "detect_events",
    "enforce_size",
    "evaluate",
    "merge",
    "polygon_curve",
    "run_algorithm_A",
    "sample_boundary",
    "split",
    "synthesize_measurement",
    "validate",
]
