import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfl.errors import DiscretizationError, SpecError
from gfl.geometry import (
    AnisoRect,
    MetricBall,
    ball_points,
    build_dyadic_cubes,
    count_separated_tuples,
    covering_number,
    delta_matrix,
    separated_tuples,
    tuples_array,
    within,
)


@pytest.mark.parametrize("alpha", [(0.5,), (0.5, 0.5), (0.25, 0.9), (0.3, 0.6, 0.8)])
def test_ball_rectangle_sandwich(alpha):
    a = np.array(alpha)
    k = len(a)
    rng = np.random.default_rng(11)
    c = np.full(k, 1.5)
    for r in (0.05, 0.3):
        ball = MetricBall(c, r, a)
        rect = AnisoRect(c, r, a)
        small = AnisoRect(c, r / k, a)
        pts = c + rng.uniform(-1, 1, (10_000, k)) * rect.half_widths
        assert np.all(rect.contains(pts[ball.contains(pts)]))
        assert np.all(ball.contains(pts[small.contains(pts)]))


def test_separated_pairs_example():
    pts = np.array([[0.0], [0.6], [1.2]])
    assert list(separated_tuples(pts, [0.5], 2, 1.0)) == [(0, 2)]
    assert count_separated_tuples(pts, [0.5], 2, 1.0) == 1
    arr, sub = tuples_array(pts, [0.5], 2, 1.0)
    assert arr.tolist() == [[0, 2]] and not sub


def test_separated_none_and_errors():
    pts = np.array([[0.0], [0.1]])
    assert count_separated_tuples(pts, [1.0], 2, 1.0) == 0
    assert tuples_array(pts, [1.0], 2, 1.0)[0].shape == (0, 2)
    with pytest.raises(SpecError):
        list(separated_tuples(pts, [1.0], 1, 1.0))


def test_triples_brute_force():
    rng = np.random.default_rng(2)
    pts = rng.uniform(0, 1, (12, 2))
    alpha = [0.5, 0.7]
    dm = delta_matrix(pts, pts, alpha)
    n = 1.6
    brute = [
        (i, j, l)
        for i in range(12)
        for j in range(i + 1, 12)
        for l in range(j + 1, 12)
        if min(dm[i, j], dm[i, l], dm[j, l]) >= 1 / n
    ]
    assert list(separated_tuples(pts, alpha, 3, n)) == brute
    assert tuples_array(pts, alpha, 3, n)[0].tolist() == [list(t) for t in brute]


def test_subsample_deterministic():
    pts = np.linspace(0, 4, 30)[:, None]
    a = list(separated_tuples(pts, [1.0], 2, 2.0, max_tuples=20, seed=4))
    b = list(separated_tuples(pts, [1.0], 2, 2.0, max_tuples=20, seed=4))
    assert a == b and len(a) == 20
    arr, sub = tuples_array(pts, [1.0], 2, 2.0, max_tuples=20, seed=4)
    assert sub and len(arr) == 20
    full = set(separated_tuples(pts, [1.0], 2, 2.0))
    assert set(a) <= full


def test_covering_extremes():
    pts = np.random.default_rng(0).uniform(1, 2, (200, 2))
    alpha = [0.5, 0.5]
    diam = delta_matrix(pts, pts, alpha).max()
    assert covering_number(pts, alpha, diam) == 1
    assert covering_number(pts, alpha, 1e-9) == len(pts)
    with pytest.raises(SpecError):
        covering_number(pts, alpha, 0.0)


def test_covering_of_ball_bounded():
    alpha = np.array([0.5, 0.5])
    c, r = np.array([1.5, 1.5]), 0.2
    pts = ball_points(c, r, alpha, per_axis=41)
    assert np.all(within(pts, c, r * (1 + 1e-12), alpha))
    # Balls of radius r/2 around a 4x4 lattice of centres cover S(c, r).
    assert covering_number(pts, alpha, r / 2) <= 64


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_covering_monotone(e1, e2):
    pts = np.random.default_rng(5).uniform(0, 1, (150, 2))
    lo, hi = sorted((e1, e2))
    assert covering_number(pts, [0.5, 0.8], hi) <= covering_number(pts, [0.5, 0.8], lo)


def test_ball_points_centre_and_domain():
    pts = ball_points([1.0], 0.25, [0.5], domain=[(1.0, 2.0)], min_pts=10)
    assert len(pts) >= 10
    assert pts.min() == 1.0 and np.any(pts[:, 0] == 1.0)
    assert pts.max() <= 1.0 + 0.25**2 + 1e-15


def test_dyadic_validation():
    with pytest.raises(SpecError):
        build_dyadic_cubes([(1, 2)], [0.5], 0)
    with pytest.raises(SpecError):
        build_dyadic_cubes([(1, 2)], [0.5], 21)
    with pytest.raises(SpecError):
        build_dyadic_cubes([(1, 2)], [0.5, 0.5], 3)
    with pytest.raises(DiscretizationError):
        build_dyadic_cubes([(1, 2)] * 3, [0.5] * 3, 12)


def test_dyadic_nesting_and_locate():
    tree = build_dyadic_cubes([(1, 2), (0, 1)], [0.5, 0.25], 4)
    rng = np.random.default_rng(0)
    pts = rng.uniform([1, 0], [2, 1], (500, 2))
    for q in range(2, 5):
        child = tree.locate(q, pts)
        assert np.array_equal(tree.parent(q, child), tree.locate(q - 1, pts))
        lo, hi = tree.bounds(q, child)
        assert np.all((pts >= lo) & (pts <= hi))
    assert tree.locate(1, [[3.0, 0.5]])[0] == -1
    assert tree.locate(1, [[2.0, 1.0]])[0] == tree.level(1).size - 1
    assert 0 < tree.c1 <= tree.c2
    with pytest.raises(SpecError):
        tree.parent(1, [0])


def test_dyadic_csv(tmp_path):
    tree = build_dyadic_cubes([(1, 2)], [0.5], 3)
    path = tmp_path / "d.csv"
    rows = tree.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "q,l,parent,x0,c1,c2"
    assert len(lines) == rows + 1 == sum(lv.size for lv in tree.levels) + 1
    with pytest.raises(DiscretizationError):
        tree.to_csv(path, max_rows=2)
