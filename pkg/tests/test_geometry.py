import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from curlfree.errors import GeometryError
from curlfree.geometry import (
    Annulus, Ball, Box, Cover, StarDomain, Union, build_cover, find_chain, hull_distance,
    lens_ball, ray_ball_interval, support_hull_test,
)


# ---------------------------------------------------------------- rays

def test_ray_misses_beyond_r_one():
    assert ray_ball_interval([2.0, 0.0], [0.0, 0.0], Ball([0, 0], 1)) is None


def test_ray_interval_clipped_at_one():
    lo, hi = ray_ball_interval([0.5, 0.0], [-0.5, 0.0], Ball([0, 0], 1))
    assert lo == 1.0
    assert abs(hi - 1.5) < 1e-15


def test_ray_zero_direction():
    with pytest.raises(GeometryError, match="zero ray direction"):
        ray_ball_interval([1.0, 2.0], [1.0, 2.0], Ball([0, 0], 1))


def test_ray_interval_matches_dense_scan_in_3d():
    rng = np.random.default_rng(7)
    r = 1.0 + 1e-4 * np.arange(990_001)
    checked = 0
    while checked < 8:
        y = rng.uniform(-2, 2, 3)
        x = y + rng.uniform(-0.3, 0.3, 3)
        ball = Ball(rng.uniform(-3, 3, 3), rng.uniform(0.5, 2.0))
        pts = y + r[:, None] * (x - y)
        inside = ball.contains(pts)
        got = ray_ball_interval(x, y, ball)
        if got is None:
            assert not inside.any()
            continue
        assert inside.any()
        lo, hi = got
        assert abs(r[inside][0] - lo) <= 1e-4
        assert abs(r[inside][-1] - hi) <= 1e-4
        checked += 1


def test_ray_interval_invariant_random_instances():
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(1000):
        n = rng.integers(2, 4)
        ball = Ball(rng.uniform(-1, 1, n), rng.uniform(0.2, 1.5))
        y = rng.uniform(-2, 2, n)
        x = rng.uniform(-2, 2, n)
        got = ray_ball_interval(x, y, ball)
        d = x - y
        if got is None:
            continue
        hits += 1
        lo, hi = got
        assert lo >= 1.0
        assert ball.contains(y + 0.5 * (lo + hi) * d)
        assert not ball.contains(y + (hi + 1e-3) * d)
        assert lo == 1.0 or not ball.contains(y + (lo - 1e-3) * d)
    assert hits > 100


# ---------------------------------------------------------------- domains

def test_star_domain_requires_contained_star_ball():
    with pytest.raises(GeometryError, match="star ball"):
        StarDomain(Ball([0, 0], 1), Ball([0.8, 0], 0.5))


def test_star_domain_segments_stay_inside(rng):
    dom = StarDomain(Box([0, 0], [2, 1]), Ball([1, 0.5], 0.3))
    assert dom.star_violations(rng, 1000) == 0


def test_annulus_membership():
    ann = Annulus([0, 0], 0.5, 1.5)
    assert ann.contains(np.array([1.0, 0.0]))
    assert not ann.contains(np.array([0.1, 0.0]))
    assert not ann.contains(np.array([2.0, 0.0]))


# ---------------------------------------------------------------- covers

def test_cover_of_disc_contains_samples(rng):
    disc = Ball([0, 0], 1)
    cover = build_cover(disc, 0.4)
    pts = disc.sample(rng, 10_000)
    assert cover.contains(pts).all()
    assert cover.ordering_ok()
    assert cover.is_connected()


def test_cover_with_domain_radius_is_single_ball():
    cover = build_cover(Ball([1, 2], 0.7), 0.7)
    assert len(cover) == 1


def test_cover_of_l_shape_is_connected(rng):
    ell = Union((Box([0, 0], [2, 1]), Box([0, 0], [1, 2])))
    cover = build_cover(ell, 0.3)
    # BFS oracle on the adjacency graph
    seen, todo = {0}, [0]
    while todo:
        for j in cover.adjacency[todo.pop()]:
            if j not in seen:
                seen.add(j)
                todo.append(j)
    assert len(seen) == len(cover)
    assert cover.contains(ell.sample(rng, 2000)).all()


def test_cover_too_thin():
    with pytest.raises(GeometryError, match="no admissible ball placement"):
        build_cover(Box([0, 0], [1, 0.1]), 0.4)


@given(st.floats(0.15, 0.5), st.floats(0.0, 1.5))
def test_cover_ordering_invariant(radius, extra):
    cover = build_cover(Box([0, 0], [2 * radius + extra, 1.0]), radius)
    for m in range(1, len(cover)):
        assert any(cover.balls[m].overlaps(cover.balls[j], cover.margin) for j in range(m))


# ---------------------------------------------------------------- chains

def _line_cover(count):
    return Cover(tuple(Ball([1.5 * k, 0.0], 1.0) for k in range(count)))


def test_chain_trivial_and_pair():
    cover = _line_cover(2)
    assert find_chain(cover, 0, 0).indices == (0,)
    assert find_chain(cover, 0, 1).indices == (0, 1)


def test_chain_on_line_cover_matches_exhaustive_search():
    cover = _line_cover(5)
    best = None
    for length in range(1, 6):
        for mid in itertools.permutations(range(1, 4), length - 2 if length > 2 else 0):
            cand = (0,) + mid + (4,)
            if all(b in cover.adjacency[a] for a, b in zip(cand, cand[1:])):
                best = best or cand
    assert find_chain(cover, 0, 4).indices == best == (0, 1, 2, 3, 4)


def test_chain_consecutive_overlap():
    cover = build_cover(Ball([0, 0], 1), 0.35)
    chain = find_chain(cover, 0, len(cover) - 1)
    for i, j in chain.pairs():
        assert cover.balls[i].overlaps(cover.balls[j], cover.margin)


def test_chain_disconnected():
    cover = Cover((Ball([0, 0], 1), Ball([5, 0], 1)))
    with pytest.raises(GeometryError, match="no chain exists"):
        find_chain(cover, 0, 1)


def test_lens_ball_inside_both():
    a, b = Ball([0, 0], 1), Ball([1.5, 0.2], 0.8)
    lens = lens_ball(a, b)
    assert a.contains_ball(lens) and b.contains_ball(lens)


# ---------------------------------------------------------------- hull

def test_hull_contains_both_supports():
    phi, rho = Ball([0.5, 0.0], 0.2), Ball([-0.5, 0.0], 0.1)
    assert support_hull_test(np.array([0.55, 0.05]), phi, rho)
    assert support_hull_test(np.array([-0.5, 0.05]), phi, rho)
    assert support_hull_test(np.array([0.0, 0.0]), phi, rho)


def test_hull_far_point_against_sampling(rng):
    phi, rho = Ball([0.5, 0.0], 0.2), Ball([-0.5, 0.0], 0.1)
    x = np.array([0.0, 0.6])
    assert not support_hull_test(x, phi, rho)
    lam = rng.uniform(0, 1, 200_000)[:, None]
    # the nearest hull points combine boundary points of both balls
    z1 = phi.center + phi.radius * _unit(rng, 200_000)
    z2 = rho.center + rho.radius * _unit(rng, 200_000)
    hull = lam * z1 + (1 - lam) * z2
    gap = np.min(np.linalg.norm(hull - x, axis=1))
    assert gap > 0.1
    d = hull_distance(x, phi, rho)[0]
    assert d <= gap + 1e-12
    assert gap - d < 5e-3


def _unit(rng, count):
    a = rng.uniform(0, 2 * np.pi, (count, 1))
    return np.concatenate([np.cos(a), np.sin(a)], axis=1)


def test_hull_box_support():
    box, rho = Box([0.2, 0.2], [0.4, 0.5]), Ball([-0.5, -0.5], 0.1)
    assert support_hull_test(np.array([-0.1, -0.1]), box, rho)
    assert not support_hull_test(np.array([0.4, -0.4]), box, rho)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 0.4), st.floats(0.1, 1.0))
def test_hull_monotone_under_shrinking(px, py, r, shrink):
    rho = Ball([-0.6, 0.0], 0.15)
    big = Ball([0.4, 0.1], r)
    small = Ball([0.4, 0.1], r * shrink)
    pts = np.random.default_rng(int(1e6 * (px + 2))).uniform(-1.2, 1.2, (64, 2))
    inside_small = support_hull_test(pts, small, rho)
    inside_big = support_hull_test(pts, big, rho)
    assert not np.any(inside_small & ~inside_big)
