import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bezierflip.geom2d import (
    Aabb,
    aabb_of_points,
    aabb_overlap,
    point_set_diameter,
    points_in_polygon,
    polylines_intersect,
    segments_intersect,
    signed_area,
)

coord = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
point = st.tuples(coord, coord)
segment = st.tuples(point, point)


def test_aabb_single_point():
    box = aabb_of_points([(1, 2)])
    assert tuple(box.min) == (1, 2) and tuple(box.max) == (1, 2)


def test_aabb_figure_patch():
    box = aabb_of_points([(0, 4), (0, 3), (1, 2), (2, 3)])
    assert tuple(box.min) == (0, 2) and tuple(box.max) == (2, 4)


def test_aabb_matches_second_scan():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(100, 2))
    box = aabb_of_points(pts)
    lo = [min(p[k] for p in pts) for k in range(2)]
    hi = [max(p[k] for p in pts) for k in range(2)]
    assert np.array_equal(box.min, lo) and np.array_equal(box.max, hi)


def test_aabb_empty_raises():
    with pytest.raises(ValueError, match="empty point set"):
        aabb_of_points([])


def test_aabb_overlap_cases():
    a = Aabb(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    assert aabb_overlap(a, Aabb(np.array([1.0, 1.0]), np.array([2.0, 2.0])))
    assert not aabb_overlap(a, Aabb(np.array([2.0, 0.0]), np.array([3.0, 1.0])))


def test_aabb_overlap_against_grid_sampling():
    # every combination of interval endpoints on a small integer grid
    grid = np.linspace(0, 4, 81)
    X, Y = np.meshgrid(grid, grid)
    cloud = np.column_stack([X.ravel(), Y.ravel()])
    vals = [0, 1, 2, 3]
    intervals = [(a, b) for a in vals for b in vals if a <= b]
    for (ax, bx), (ay, by) in itertools.product(intervals[:6], intervals[4:]):
        b1 = Aabb(np.array([ax, ay], float), np.array([bx, by], float))
        b2 = Aabb(np.array([1.0, 1.0]), np.array([2.0, 3.0]))
        inside = lambda b: np.all((cloud >= b.min) & (cloud <= b.max), axis=1)
        assert aabb_overlap(b1, b2) == bool(np.any(inside(b1) & inside(b2)))


@given(st.lists(point, min_size=1, max_size=20), point, st.randoms())
@settings(max_examples=100)
def test_aabb_permutation_invariant_and_monotone(pts, extra, rnd):
    box = aabb_of_points(pts)
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    box2 = aabb_of_points(shuffled)
    assert np.array_equal(box.min, box2.min) and np.array_equal(box.max, box2.max)
    bigger = aabb_of_points(pts + [extra])
    assert np.all(bigger.min <= box.min) and np.all(bigger.max >= box.max)


@pytest.mark.parametrize(
    "s1,s2,expected",
    [
        (((0, 0), (1, 1)), ((0, 1), (1, 0)), True),
        (((0, 0), (1, 0)), ((0, 1), (1, 1)), False),
        (((-0.7, 3), (0.3, 1)), ((0.2, -1), (0.2, 1.3)), True),
        (((0, 0), (2, 0)), ((1, 0), (3, 0)), True),  # collinear overlap
        (((0, 0), (1, 0)), ((1, 0), (1, 5)), True),  # shared endpoint
        (((0, 0), (1, 0)), ((2, 0), (3, 0)), False),  # collinear, disjoint
        (((1, 1), (1, 1)), ((0, 0), (2, 2)), True),  # degenerate point on segment
        (((1, 2), (1, 2)), ((0, 0), (2, 2)), False),
    ],
)
def test_segments_intersect_examples(s1, s2, expected):
    assert segments_intersect(s1, s2) == expected


def _sampled_distance(s1, s2, n=100):
    t = np.linspace(0, 1, n)
    a = np.asarray(s1[0]) + t[:, None] * (np.asarray(s1[1]) - np.asarray(s1[0]))
    b = np.asarray(s2[0]) + t[:, None] * (np.asarray(s2[1]) - np.asarray(s2[0]))
    return np.min(np.linalg.norm(a[:, None] - b[None], axis=-1))


def _exact_distance(s1, s2):
    # distance between closed segments: zero if they cross, else min endpoint-to-segment
    def pt_seg(p, a, b):
        p, a, b = map(np.asarray, (p, a, b))
        d = b - a
        L = d @ d
        t = 0.0 if L == 0 else np.clip((p - a) @ d / L, 0, 1)
        return np.linalg.norm(p - (a + t * d))

    return min(pt_seg(s1[0], *s2), pt_seg(s1[1], *s2), pt_seg(s2[0], *s1), pt_seg(s2[1], *s1))


def test_segments_intersect_sampling_oracle():
    rng = np.random.default_rng(7)
    disagreements = 0
    for _ in range(1000):
        s1 = rng.uniform(-1, 1, size=(2, 2))
        s2 = rng.uniform(-1, 1, size=(2, 2))
        got = segments_intersect(s1, s2)
        sampled = _sampled_distance(s1, s2)
        if got:
            # crossing segments get arbitrarily close in a dense sampling
            assert sampled < 0.05
        else:
            if _exact_distance(s1, s2) < 1e-9:
                continue  # tangency band
            disagreements += sampled < 1e-9
    assert disagreements == 0


@given(segment, segment)
@settings(max_examples=200)
def test_segments_intersect_symmetric(s1, s2):
    r = segments_intersect(s1, s2)
    assert segments_intersect(s2, s1) == r
    assert segments_intersect(s1[::-1], s2) == r
    assert segments_intersect(s1, s2[::-1]) == r


def test_diameter_examples():
    assert point_set_diameter([(0, 0)]) == 0
    assert point_set_diameter([(0, 0), (3, 4)]) == 5
    with pytest.raises(ValueError):
        point_set_diameter([])


@given(st.lists(point, min_size=1, max_size=6))
@settings(max_examples=100)
def test_diameter_brute_force(pts):
    best = max((np.hypot(a[0] - b[0], a[1] - b[1]) for a in pts for b in pts), default=0.0)
    assert point_set_diameter(pts) == pytest.approx(best, rel=0, abs=1e-12)


def test_polylines_intersect_examples():
    sq1 = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]
    sq2 = [(3, 0), (4, 0), (4, 1), (3, 1), (3, 0)]
    assert not polylines_intersect(sq1, sq2)
    l1 = [(0, 0), (2, 0), (2, 2)]
    l2 = [(1, -1), (1, 1), (3, 1)]
    assert polylines_intersect(l1, l2)


def test_polylines_shared_endpoint_skip():
    t = np.linspace(0, 1, 20)
    a = np.column_stack([t, t**2])
    b = np.column_stack([1 + t, 1 - 0.5 * t])  # starts where a ends, different direction
    assert polylines_intersect(a, b)
    assert not polylines_intersect(a, b, skip_shared_endpoints=True)


def test_signed_area_and_point_in_polygon():
    sq = np.array([(0, 0), (2, 0), (2, 2), (0, 2)], float)
    assert signed_area(sq) == pytest.approx(4.0)
    assert signed_area(sq[::-1]) == pytest.approx(-4.0)
    inside = points_in_polygon(np.array([(1, 1), (3, 1), (-0.5, 0.5)]), sq)
    assert list(inside) == [True, False, False]
