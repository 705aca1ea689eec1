import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bezierflip.bezier import ClosedPiecewiseCurve, circle_curve, eval_patch, polygon_curve
from bezierflip.geom2d import point_set_diameter
from bezierflip.patch_ops import enforce_size, merge, split

FIG_CP = np.array([(0, 0), (2, 5), (6, 4), (7, 1)], float)
control_polygons = arrays(np.float64, (4, 2), elements=st.floats(-20, 20, allow_nan=False))


def test_split_figure_nodes():
    q, r = split(FIG_CP)
    assert np.allclose(q, [(0, 0), (1, 2.5), (2.5, 3.5), (3.875, 3.5)], atol=1e-15)
    assert np.allclose(r, [(3.875, 3.5), (5.25, 3.5), (6.5, 2.5), (7, 1)], atol=1e-15)
    assert np.array_equal(q[3], r[0])


def test_split_degenerate():
    q, r = split(np.zeros((4, 2)))
    assert not q.any() and not r.any()


def test_split_reproduces_curve_on_random_patches():
    rng = np.random.default_rng(2)
    s = np.linspace(0, 1, 101)
    for _ in range(100):
        cp = rng.uniform(-5, 5, (4, 2))
        q, r = split(cp)
        left = eval_patch(q, np.clip(2 * s[s <= 0.5], 0, 1))
        right = eval_patch(r, np.clip(2 * s[s > 0.5] - 1, 0, 1))
        err = np.abs(np.vstack([left, right]) - eval_patch(cp, s)).max()
        assert err < 1e-12


@given(control_polygons)
@settings(max_examples=100)
def test_split_hausdorff(cp):
    q, r = split(cp)
    t = np.linspace(0, 1, 201)
    # every half sample lies on the original at the matching parameter, and
    # every original sample is hit by one half: a pointwise Hausdorff bound
    dense = eval_patch(cp, np.concatenate([t / 2, (1 + t) / 2]))
    halves = np.vstack([eval_patch(q, t), eval_patch(r, t)])
    scale = 1 + np.abs(cp).max()
    assert np.linalg.norm(dense - halves, axis=1).max() < 1e-10 * scale


def test_merge_figure_nodes():
    q = np.array([(0, 0), (1, 3), (4, 4), (6, 2)], float)
    r = np.array([(6, 2), (8, 0), (10, 5), (12, 3)], float)
    p = merge(q, r)
    assert np.allclose(p[0], (0, 0)) and np.allclose(p[3], (12, 3))
    assert np.allclose(p[1], (10 / 3, 7.389), atol=1e-3)
    assert np.allclose(p[2], (25 / 3, -1.611), atol=1e-3)
    # interpolation conditions
    assert np.allclose(eval_patch(p, 1 / 3), eval_patch(q, 2 / 3), atol=1e-12)
    assert np.allclose(eval_patch(p, 2 / 3), eval_patch(r, 1 / 3), atol=1e-12)


@given(control_polygons)
@settings(max_examples=100)
def test_merge_inverts_split(cp):
    assert np.allclose(merge(*split(cp)), cp, atol=1e-10 * (1 + np.abs(cp).max()), rtol=0)


def test_merge_collinear_stays_on_line():
    d = np.array([2.0, 1.0])
    q = np.array([0, 0.5, 1.5, 2.0])[:, None] * d
    r = np.array([2.0, 2.2, 3.4, 4.0])[:, None] * d
    p = merge(q, r)
    cross = p[:, 0] * d[1] - p[:, 1] * d[0]
    assert np.abs(cross).max() < 1e-12


def test_merge_rejects_non_consecutive():
    with pytest.raises(ValueError):
        merge(FIG_CP, FIG_CP + 1)


def test_enforce_size_noop_returns_same_object():
    c = circle_curve(radius=3)
    assert enforce_size(c, 0.4, 6.0) is c


def test_enforce_size_splits_straight_patch():
    s_max = 4.0
    c = polygon_curve([(0, 0), (8, 0), (8, 1), (0, 1)])
    out = enforce_size(c, 0.4, s_max)
    diam = [point_set_diameter(p) for p in out.patches()]
    # both long sides are halved, the short sides stay
    assert out.n_patches == 6
    assert sorted(diam) == pytest.approx([1.0, 1.0, 4.0, 4.0, 4.0, 4.0])
    assert np.allclose(out.patches()[0], [(0, 0), (4 / 3, 0), (8 / 3, 0), (4, 0)])


def test_enforce_size_merges_tiny_patch():
    corners = [(0, 0), (2, 0), (2, 0.1), (2, 2), (0, 2)]
    c = polygon_curve(corners)
    out = enforce_size(c, 0.2, 4.0)
    assert out.n_patches == c.n_patches - 1
    juncs = out.points[::3]
    for keep in [(0, 0), (2, 2), (0, 2)]:
        assert np.any(np.all(np.isclose(juncs, keep), axis=1))


def test_enforce_size_two_patch_floor():
    c = ClosedPiecewiseCurve(np.array([(0, 0), (0.01, 0.01), (0.02, 0), (0.03, 0), (0.02, -0.01), (0.01, 0)]))
    out = enforce_size(c, 0.4, 4.0)
    assert out.n_patches == 2


def test_enforce_size_bad_band():
    c = circle_curve()
    for band in [(0, 1), (1, 0.5), (1, 1.5)]:
        with pytest.raises(ValueError):
            enforce_size(c, *band)


@given(st.integers(2, 10), st.floats(0.3, 12), st.floats(0, 6.28), st.integers(0, 2**31 - 1))
@settings(max_examples=100, deadline=None)
def test_enforce_size_band_and_continuity(n, radius, phase, seed):
    rng = np.random.default_rng(seed)
    pts = circle_curve(radius=radius, n_patches=n, phase=phase).points
    c = ClosedPiecewiseCurve(pts + rng.normal(scale=0.05 * radius, size=pts.shape))
    s_min, s_max = 0.4, 4.0
    out = enforce_size(c, s_min, s_max)
    patches = out.patches()
    nxt = np.roll(patches[:, 0], -1, axis=0)
    assert np.array_equal(patches[:, 3], nxt)
    diam = np.array([point_set_diameter(p) for p in patches])
    eps = 1e-9
    assert np.all(diam <= s_max * (1 + eps))
    if out.n_patches > 2:
        assert np.all(diam >= s_min * (1 - eps))
