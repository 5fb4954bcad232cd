import numpy as np
import pytest
from hypothesis import given, strategies as st

from curlfree.errors import ConvergenceError
from curlfree.sobolev_checks import (
    DivFreeTestSet, GridSpace, PipelineRefusal, adjointness_check, polar_membership,
    solve_potential_l2, weak_poincare_pipeline,
)

SPACE = GridSpace.unit(32)
X = SPACE.nodes()
F0 = np.sin(2 * X[..., 0]) * np.cos(3 * X[..., 1]) + X[..., 0] ** 2
ROT = np.stack([-X[..., 1], X[..., 0]], axis=-1)


@pytest.fixture(scope="module")
def tests_2d():
    return DivFreeTestSet.random(SPACE, count=50, seed=0)


def test_adjointness_32():
    assert adjointness_check(SPACE, trials=100) <= 1e-12


def test_adjointness_zero_field():
    u = np.zeros(SPACE.shape + (2,))
    f = np.random.default_rng(0).standard_normal(SPACE.shape)
    assert SPACE.inner(SPACE.div(u), f) + SPACE.inner(u, SPACE.grad(f)) == 0


def test_adjointness_3d():
    assert adjointness_check(GridSpace.unit(9, 3), trials=20) <= 1e-13


def test_grad_matrix_matches_grad():
    f = np.random.default_rng(1).standard_normal(SPACE.shape)
    flat = SPACE.grad_matrix() @ f.reshape(-1)
    np.testing.assert_allclose(flat, np.moveaxis(SPACE.grad(f), -1, 0).reshape(-1), atol=1e-12)


@pytest.mark.parametrize("space", [SPACE, GridSpace.unit(10, 3)])
def test_test_fields_exactly_divergence_free(space):
    tests = DivFreeTestSet.random(space, count=20, seed=3)
    assert tests.max_divergence() == 0.0
    margin = space.interior_mask(2)
    for u in tests:
        assert np.all(u[~margin] == 0)


def test_gradient_is_polar(tests_2d):
    ok, worst = polar_membership(SPACE, SPACE.grad(F0), tests_2d, 1e-10)
    assert ok and worst <= 1e-12


def test_rotation_is_not_polar(tests_2d):
    ok, worst = polar_membership(SPACE, ROT, tests_2d, 1e-10)
    assert not ok
    # summation by parts: <g, curl psi> = scale h^3 sum psi curl_h g (the
    # stream differences carry no 1/h), and curl_h g = 2 for the rotation
    best = 0.0
    for u, (psi, _, scale) in zip(tests_2d, tests_2d.streams):
        explicit = 2 * scale * SPACE.h ** 3 * psi.sum()
        assert SPACE.inner(ROT, u) == pytest.approx(explicit, rel=1e-12)
        best = max(best, abs(explicit) / SPACE.norm(u))
    assert worst == pytest.approx(best, rel=1e-12)
    assert worst > 1e-3


def test_zero_is_polar(tests_2d):
    assert polar_membership(SPACE, np.zeros(SPACE.shape + (2,)), tests_2d) == (True, 0.0)


def test_polar_needs_tests():
    with pytest.raises(ValueError):
        polar_membership(SPACE, ROT, [])


def test_recover_known_potential():
    sol = solve_potential_l2(SPACE, SPACE.grad(F0))
    ref = F0 - F0.mean()
    assert np.linalg.norm(sol.f - ref) / np.linalg.norm(ref) <= 1e-8


def test_zero_data():
    sol = solve_potential_l2(SPACE, np.zeros(SPACE.shape + (2,)))
    assert np.all(sol.f == 0) and sol.residual == 0.0


def test_rotation_residual_is_curl_part():
    sol = solve_potential_l2(SPACE, ROT)
    fit = SPACE.grad(sol.f)
    # least squares: the misfit is orthogonal to the range of grad
    assert abs(SPACE.inner(ROT - fit, fit)) <= 1e-9 * SPACE.norm(ROT) ** 2
    curl_part = SPACE.norm(ROT - fit) / SPACE.norm(ROT)
    assert sol.residual == pytest.approx(curl_part, rel=1e-12)
    assert sol.residual > 0.5


def test_non_convergence():
    with pytest.raises(ConvergenceError):
        solve_potential_l2(SPACE, ROT, maxiter=2)


@given(st.integers(0, 2 ** 32 - 1))
def test_mean_removed(seed):
    g = np.random.default_rng(seed).standard_normal(GridSpace.unit(12).shape + (2,))
    space = GridSpace.unit(12)
    f = solve_potential_l2(space, g).f
    assert abs(f.mean()) <= 1e-13 * max(np.linalg.norm(f), 1e-300)


@given(st.integers(0, 2 ** 32 - 1))
def test_curl_free_implies_polar(seed):
    space = GridSpace.unit(12)
    f = np.random.default_rng(seed).standard_normal(space.shape)
    g = space.grad(f)
    assert np.max(np.abs(space.curl(g))) <= 1e-8
    tests = DivFreeTestSet.random(space, count=10, seed=seed)
    scale = max(1.0, space.norm(g))
    assert polar_membership(space, g, tests, 1e-10 * scale)[0]


def test_pipeline_stages(tests_2d):
    res = weak_poincare_pipeline(SPACE, SPACE.grad(F0), tests_2d)
    assert [s[0] for s in res.stages] == ["curl", "polar", "potential"]
    ref = F0 - F0.mean()
    assert np.linalg.norm(res.f - ref) / np.linalg.norm(ref) <= 1e-8


def test_pipeline_rejects_rotation_at_curl(tests_2d):
    with pytest.raises(PipelineRefusal) as err:
        weak_poincare_pipeline(SPACE, ROT, tests_2d)
    assert err.value.stage == "curl"
    assert err.value.residual == pytest.approx(2.0, abs=1e-9)


def test_pipeline_zero(tests_2d):
    res = weak_poincare_pipeline(SPACE, np.zeros(SPACE.shape + (2,)), tests_2d)
    assert np.all(res.f == 0)


def test_restriction_heredity():
    # potentials on two overlapping subgrids and on the union agree up to
    # constants on the overlap
    space = GridSpace.unit(33)
    x = space.nodes()
    f = np.cos(3 * x[..., 0] + x[..., 1]) + x[..., 1] ** 3
    full = solve_potential_l2(space, space.grad(f)).f
    left = GridSpace((20, 33), space.h)
    right = GridSpace((20, 33), space.h, (13 * space.h, 0.0))
    fl = solve_potential_l2(left, left.grad(f[:20])).f
    fr = solve_potential_l2(right, right.grad(f[13:])).f
    overlap = slice(13, 20)
    d1 = full[overlap] - fl[13:20]
    d2 = full[overlap] - fr[:7]
    assert np.std(d1) <= 1e-9 and np.std(d2) <= 1e-9
