import math

import numpy as np
import pytest

from bezierflip.bezier import ClosedPiecewiseCurve, ShapeConfiguration, circle_curve, polygon_curve, sample_boundary
from bezierflip.optimizer import (
    Evaluation,
    OptimizerConfig,
    SolverAbort,
    _first_contact,
    boundary_gram,
    control_point_gradient,
    descent_direction,
    evaluate,
    evaluate_on_fixed_mesh,
    line_search,
    run_algorithm_A,
    topology_ok,
    within_margin,
)
from bezierflip.pde import BoundaryFlux, DomainSpec, synthesize_measurement
from bezierflip.topology import EventKind, apply_event, detect_events, intersecting_pairs
from figures import two_polygon_curve

CFG = OptimizerConfig()


def analytic_circle(r, center=(0.0, 0.0), n=400):
    t = 2 * np.pi * np.arange(n) / n
    return np.asarray(center) + r * np.column_stack([np.cos(t), np.sin(t)])


@pytest.fixture(scope="module")
def fb_offset():
    return synthesize_measurement([analytic_circle(2.5, (1.5, -1.0))], CFG.domain, h_max=CFG.h_max)


@pytest.fixture(scope="module")
def fb_circle6():
    return synthesize_measurement([analytic_circle(6.0)], CFG.domain, h_max=CFG.h_max)


def test_config_validation():
    for bad in [
        {"flip_tolerance": 0.9},
        {"shrink_factor": 1.0},
        {"armijo_factor": 0.0},
        {"samples_per_patch": 2},
        {"metric": "newton"},
        {"smoothing_length": -1},
    ]:
        with pytest.raises(ValueError):
            OptimizerConfig(**bad)
    with pytest.raises(ValueError, match="unknown"):
        OptimizerConfig.from_dict({"bogus": 1})


def test_config_dict_round_trip():
    cfg = OptimizerConfig(h_max=0.5, domain=DomainSpec(margin_d0=0.8))
    again = OptimizerConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert again.margin_d0 == 0.8


def test_gradient_vanishes_without_adjoint(fb_offset):
    s = ShapeConfiguration((circle_curve(radius=3),))
    ev = evaluate(s, fb_offset, CFG)
    u = ev.inner_fluxes(ev.mesh._cache["u"])
    zero = [BoundaryFlux(q.points, np.zeros_like(q.values), q.weights) for q in u]
    g = control_point_gradient(s, u, zero, ev.samples)
    assert not np.any(g)
    with pytest.raises(ValueError):
        control_point_gradient(s, u, zero[:0], ev.samples)


def test_concentric_gradient_has_small_resultant(fb_circle6):
    s = ShapeConfiguration((circle_curve(radius=4, n_patches=4),))
    g = evaluate(s, fb_circle6, CFG).gradient()
    largest = np.linalg.norm(g, axis=1).max()
    assert np.linalg.norm(g.sum(axis=0)) < 0.05 * largest
    # the obstacle is too small: J drops when it grows, so -grad points outward
    outward = np.sum(-g * s.flat_points(), axis=1)
    assert np.all(outward[::3] > 0)


def _random_smooth_shape(rng):
    center = rng.uniform(-1.5, 1.5, 2)
    c = circle_curve(center, rng.uniform(2, 3.5), int(rng.integers(4, 7)), phase=rng.uniform(0, 2 * np.pi))
    return ShapeConfiguration((ClosedPiecewiseCurve(c.points + rng.normal(scale=0.1, size=c.points.shape)),))


def test_directional_derivative_matches_finite_differences(fb_offset):
    rng = np.random.default_rng(4)
    delta = 1e-3
    for _ in range(5):
        s = _random_smooth_shape(rng)
        base = evaluate(s, fb_offset, CFG)
        g = base.gradient()
        v = rng.normal(size=g.shape)
        v /= np.linalg.norm(v)
        plus = evaluate_on_fixed_mesh(base, s.with_flat_points(s.flat_points() + delta * v), CFG).J
        minus = evaluate_on_fixed_mesh(base, s.with_flat_points(s.flat_points() - delta * v), CFG).J
        fd = (plus - minus) / (2 * delta)
        assert fd == pytest.approx(np.sum(g * v), rel=0.1)


def test_exact_target_beats_initial_guess(fb_circle6):
    exact = evaluate(ShapeConfiguration((circle_curve(radius=6),)), fb_circle6, CFG).J
    guess = evaluate(ShapeConfiguration((circle_curve(radius=4),)), fb_circle6, CFG).J
    assert exact < 1e-2 * guess


def test_self_intersecting_shape_is_infinite(fb_offset):
    bowtie = ShapeConfiguration((polygon_curve([(0, 0), (2, 2), (2, 0), (0, 2)]),))
    ev = evaluate(bowtie, fb_offset, CFG)
    assert ev.J == math.inf and not ev.finite
    with pytest.raises(ValueError):
        ev.gradient()


def test_nested_components_are_infinite(fb_offset):
    s = ShapeConfiguration((circle_curve(radius=3), circle_curve(radius=1)))
    assert evaluate(s, fb_offset, CFG).J == math.inf


@pytest.mark.parametrize("metric", ["euclidean", "sobolev"])
def test_small_step_along_descent_direction_decreases_J(fb_offset, metric):
    cfg = OptimizerConfig(metric=metric)
    s = _random_smooth_shape(np.random.default_rng(9))
    base = evaluate(s, fb_offset, cfg)
    g = base.gradient()
    d = descent_direction(s, g, base.samples, cfg)
    assert np.sum(g * d) > 0
    step = 1e-2 / np.linalg.norm(d, axis=1).max()
    moved = evaluate_on_fixed_mesh(base, s.with_flat_points(s.flat_points() - step * d), cfg)
    assert moved.J < base.J


def test_euclidean_metric_returns_gradient():
    s = ShapeConfiguration((circle_curve(radius=3),))
    g = np.random.default_rng(0).normal(size=(12, 2))
    assert descent_direction(s, g, sample_boundary(s, 10), OptimizerConfig(metric="euclidean")) is g


def test_boundary_gram_is_spd():
    s = ShapeConfiguration((circle_curve(radius=3, n_patches=5),))
    for G in boundary_gram(s, sample_boundary(s, 20), 1.5):
        assert np.allclose(G, G.T)
        assert np.linalg.eigvalsh(G).min() > 0


def _quadratic_flow(s, target):
    x = s.flat_points() - target
    return lambda shape: Evaluation(shape, float(np.sum((shape.flat_points() - target) ** 2))), 2 * x


def test_line_search_quadratic_toy():
    s = ShapeConfiguration((circle_curve(radius=3),))
    rng = np.random.default_rng(1)
    target = s.flat_points() + rng.uniform(-0.05, 0.05, size=s.flat_points().shape)
    evaluator, grad = _quadratic_flow(s, target)
    J0 = evaluator(s).J
    cfg = OptimizerConfig(initial_step=30.0, max_backtracks=20)
    res = line_search(s, grad, J0, None, cfg, evaluator=evaluator)
    # exact minimiser along -grad is alpha = 1/2
    assert 0.5 <= res.alpha < 0.5 / cfg.shrink_factor
    assert res.J < J0
    assert res.trials > 1


def test_line_search_rejects_steps_past_margin():
    r = 8.95
    s = ShapeConfiguration((circle_curve(radius=r),))
    cfg = OptimizerConfig(max_backtracks=2)
    grad = -s.flat_points()  # descent would push every point outward
    always_better = lambda shape: Evaluation(shape, 0.0)
    res = line_search(s, grad, 1.0, None, cfg, evaluator=always_better)
    assert res.alpha == 0 and res.shape is s and res.J == 1.0
    assert res.trials == cfg.max_backtracks + 1


def test_line_search_zero_gradient():
    s = ShapeConfiguration((circle_curve(radius=3),))
    res = line_search(s, np.zeros((12, 2)), 5.0, None, CFG, evaluator=lambda x: pytest.fail("no trial expected"))
    assert res.alpha == 0 and res.trials == 0


def test_first_contact_bisection():
    a, b = circle_curve((-3, 0), 1), circle_curve((3, 0), 1)
    s = ShapeConfiguration((a, b))
    base = s.flat_points()
    d = np.vstack([np.tile([-1.0, 0], (12, 1)), np.tile([1.0, 0], (12, 1))])  # -d brings them together
    hit = _first_contact(s, base, d, 0.0, 3.0)
    touching = s.with_flat_points(base - hit * d)
    assert intersecting_pairs(touching)
    assert not intersecting_pairs(s.with_flat_points(base - (hit - 1e-6) * d))
    # polygons bulge past the unit circle, so contact happens before the curves meet
    assert 1.9 < 2 * (3 - hit) < 2.3


def test_topology_ok_rejects_colliding_result():
    s = two_polygon_curve()
    e = detect_events(s)[0]
    flipped = apply_event(s, e)
    assert topology_ok(s, flipped, e)
    # an event whose result still has colliding polygons fails the post-flip check
    crossing = ShapeConfiguration(flipped.components + (circle_curve((0, 0), 3, 4),))
    assert not topology_ok(s, crossing, e)


def test_within_margin():
    spec = DomainSpec(margin_d0=1.0)
    inside = sample_boundary(ShapeConfiguration((circle_curve(radius=8.5),)), 10)
    outside = sample_boundary(ShapeConfiguration((circle_curve(radius=9.2),)), 10)
    assert within_margin(inside, spec) and not within_margin(outside, spec)


@pytest.fixture(scope="module")
def short_run(fb_offset):
    cfg = OptimizerConfig(max_iterations=15)
    seen = []
    state = run_algorithm_A(
        ShapeConfiguration((circle_curve(radius=3),)), fb_offset, cfg, lambda st, shape, rec: seen.append((shape, rec))
    )
    return cfg, state, seen


def test_run_records_every_iteration(short_run):
    cfg, state, seen = short_run
    assert len(state.history) == len(seen) <= cfg.max_iterations
    assert [r.k for r in state.history] == list(range(len(state.history)))
    assert state.history[-1].J < 0.5 * state.history[0].J


def test_run_monotone_between_flips(short_run):
    _, state, _ = short_run
    h = state.history
    for a, b in zip(h, h[1:]):
        # resizing and remeshing both restart the comparison
        if a.alpha > 0 and not (b.flip_accepted or b.resized or b.remeshed):
            assert b.J < a.J


def test_run_respects_margin_and_components(short_run):
    cfg, state, seen = short_run
    prev = None
    for shape, rec in seen:
        assert within_margin(sample_boundary(shape, cfg.samples_per_patch), cfg.domain)
        assert rec.components == len(shape)
        if prev is not None and rec.components != prev:
            assert rec.flip_accepted
        prev = rec.components


def test_target_equal_to_initial_stays_put():
    # already optimal up to discretization: only floor-level gains remain
    cfg = OptimizerConfig(max_iterations=10)
    c = circle_curve((1.0, -0.5), 2.5, 4)
    f_b = synthesize_measurement(ShapeConfiguration((c,)), cfg.domain, h_max=cfg.h_max)
    state = run_algorithm_A(ShapeConfiguration((c,)), f_b, cfg)
    J = [r.J for r in state.history]
    wrong = evaluate(ShapeConfiguration((circle_curve((1.0, -0.5), 2.0, 4),)), f_b, cfg).J
    assert max(J) < 0.02 * wrong
    assert J[-1] > 0.9 * J[0]
    assert np.abs(state.shape.flat_points() - c.points).max() < 0.05 * 2.5


def test_solver_abort_carries_shape():
    s = ShapeConfiguration((circle_curve(radius=3),))
    pts = DomainSpec().outer_polygon()[::-1].copy()  # wrong ordering of the data points
    bad = BoundaryFlux(pts, np.ones(len(pts)), np.ones(len(pts)))
    with pytest.raises(SolverAbort) as info:
        run_algorithm_A(s, bad, OptimizerConfig(max_iterations=2))
    assert info.value.shape is not None


def test_flip_acceptance_rule_in_records(fb_offset):
    # a pinched start whose control polygons already cross
    from bezierflip.scenarios import pinched_dumbbell

    s = pinched_dumbbell()
    events = detect_events(s)
    assert events and events[0].kind in (EventKind.TWO, EventKind.THREE)
    cfg = OptimizerConfig(max_iterations=1, s_max=5.0)
    state = run_algorithm_A(s, fb_offset, cfg)
    rec = state.history[0]
    assert rec.flip_attempted
    line = state.flip_log[0]
    j_before = float(line.split("J_before=")[1].split()[0])
    j_after = float(line.split("J_after=")[1])
    assert rec.flip_accepted == (j_after < cfg.flip_tolerance * j_before)
