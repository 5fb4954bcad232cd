import numpy as np
import pytest

from curlfree.errors import DomainError, GeometryError, PreconditionError
from curlfree.fieldspec import CallableField, FiniteDiffScheme, GridField, divergence
from curlfree.geometry import Ball, Box, Cover, StarDomain, find_chain
from curlfree.mollify import Mollifier
from curlfree.potential import (
    chain_divergence_transport, compact_support_potential, glue_potentials, local_potential,
    rough_local_potential,
)

DISC = StarDomain(Ball([0, 0], 1), Ball([0, 0], 0.5))
RHO = Mollifier(Ball([0, 0], 0.3))


def vec(func):
    return lambda x: np.stack(func(np.asarray(x, dtype=float)), axis=-1)


GRAD_X1X2 = vec(lambda x: [x[..., 1], x[..., 0]])
ZERO = lambda x: np.zeros(np.shape(x))


# ---------------------------------------------------------------- one chart

def test_local_potential_of_product():
    F = local_potential(DISC, RHO, GRAD_X1X2)
    assert F.residual <= 1e-6
    x = DISC.sample(np.random.default_rng(0), 50) * 0.9
    d = F(x) - x[:, 0] * x[:, 1]
    assert np.std(d) <= 1e-10


def test_local_potential_zero_and_constant():
    x = DISC.sample(np.random.default_rng(1), 20) * 0.9
    assert np.all(local_potential(DISC, RHO, ZERO)(x) == 0)
    c = np.array([2.0, -0.5])
    F = local_potential(DISC, RHO, lambda p: np.broadcast_to(c, np.shape(p)))
    np.testing.assert_allclose(F(x), x @ c, atol=1e-13)


def test_local_potential_refuses_rotation():
    with pytest.raises(PreconditionError) as err:
        local_potential(DISC, RHO, vec(lambda x: [-x[..., 1], x[..., 0]]))
    assert err.value.residual == pytest.approx(2.0, abs=1e-6)


def test_rho_independence_up_to_constant():
    v = vec(lambda x: [np.cos(x[..., 0]) * x[..., 1], np.sin(x[..., 0]) + 2 * x[..., 1]])
    other = Mollifier(Ball([0.1, -0.15], 0.2))
    F1 = local_potential(DISC, RHO, v)
    F2 = local_potential(DISC, other, v)
    x = DISC.sample(np.random.default_rng(2), 64) * 0.9
    d = F1(x) - F2(x)
    assert np.std(d) <= 1e-6
    assert abs(np.mean(d)) > 1e-3


# ---------------------------------------------------------------- gluing

def _two_balls():
    return Cover((Ball([0, 0], 0.6), Ball([0.7, 0.1], 0.5)))


def test_glue_linear_field():
    res = glue_potentials(_two_balls(), lambda x: np.broadcast_to([1.0, 0.0], np.shape(x)))
    assert res.overlap_consistency <= 1e-8
    assert res.consistent
    x = np.array([[0.0, 0.1], [0.9, 0.1], [-0.3, 0.2]])
    d = res(x) - x[:, 0]
    assert np.ptp(d) <= 1e-8


def test_glue_gauge_shift():
    v = GRAD_X1X2
    a = glue_potentials(_two_balls(), v)
    b = glue_potentials(_two_balls(), v, c1=2.5)
    x = np.array([[0.0, 0.1], [0.9, 0.1], [-0.3, 0.2], [0.5, 0.3]])
    np.testing.assert_allclose(b(x) - a(x), 2.5, rtol=0, atol=1e-14)
    np.testing.assert_array_equal(a.shifted(1.0).constants, a.constants + 1.0)


def test_glue_gradient_matches_chart_level():
    v = vec(lambda x: [np.cos(x[..., 0]) * np.cos(x[..., 1]), -np.sin(x[..., 0]) * np.sin(x[..., 1])])
    cover = _two_balls()
    scheme = FiniteDiffScheme(1e-4 * 0.5, 4)
    res = glue_potentials(cover, v, scheme=scheme)
    chart = max(local_potential(StarDomain(b, b), Mollifier(Ball(b.center, 0.5 * b.radius)), v,
                                scheme=scheme).residual
                for b in cover.balls)
    assert res.grad_residual <= 10 * chart


def test_glue_point_outside_cover():
    res = glue_potentials(_two_balls(), GRAD_X1X2)
    with pytest.raises(DomainError):
        res(np.array([[3.0, 0.0]]))


def test_glue_validation():
    with pytest.raises(ValueError, match="overlap sample count"):
        glue_potentials(_two_balls(), GRAD_X1X2, overlap_samples=10)
    bad = Cover((Ball([0, 0], 0.5), Ball([3, 0], 0.5), Ball([1.5, 0], 1.2)))
    with pytest.raises(GeometryError, match="ordering"):
        glue_potentials(bad, GRAD_X1X2)


def test_glue_refuses_curl():
    with pytest.raises(PreconditionError):
        glue_potentials(_two_balls(), vec(lambda x: [-x[..., 1], x[..., 0]]))


# ---------------------------------------------------------------- chains

def _line(count, step=1.2):
    return Cover(tuple(Ball([step * k, 0.0], 1.0) for k in range(count)))


def test_chain_of_length_one_is_zero():
    cover = _line(2)
    phi = chain_divergence_transport(cover, find_chain(cover, 0, 0))
    assert np.all(phi(np.random.default_rng(3).uniform(-0.5, 0.5, (10, 2))) == 0)


def test_two_ball_chain_divergence():
    cover = _line(2)
    rhos = [Mollifier(Ball(b.center, 0.5)) for b in cover.balls]
    phi = chain_divergence_transport(cover, find_chain(cover, 0, 1), rhos)
    rng = np.random.default_rng(4)
    x = rng.uniform([-0.8, -0.8], [2.0, 0.8], (60, 2))
    x = x[cover.contains(x)][:30]
    err = divergence(phi, x, FiniteDiffScheme(1e-3, 4)) - (rhos[0](x) - rhos[1](x))
    assert np.max(np.abs(err)) <= 1e-4


def test_chain_support_inside_union():
    cover = _line(4)
    phi = chain_divergence_transport(cover, find_chain(cover, 0, 3))
    rng = np.random.default_rng(5)
    x = rng.uniform([-2, -2], [6, 2], (4000, 2))
    x = x[~cover.contains(x)][:200]
    assert np.max(np.abs(phi(x))) <= 1e-10


def test_chain_lens_too_small():
    cover = Cover((Ball([0, 0], 1.0), Ball([1.99, 0], 1.0)))
    with pytest.raises(GeometryError, match="too small"):
        chain_divergence_transport(cover, find_chain(cover, 0, 1))


# ---------------------------------------------------------------- compact support

def test_compact_zero_field():
    cp = compact_support_potential(CallableField(ZERO, 2, components=2, support=Ball([0, 0], 0.5)),
                                   Box([-1.5, -1.5], [1.5, 1.5]), radius=0.5)
    x = np.random.default_rng(6).uniform(-1.4, 1.4, (20, 2))
    assert np.all(cp(x) == 0)


def test_compact_rejects_one_dimension():
    G = CallableField(ZERO, 1, components=1, support=Box([-0.1], [0.1]))
    with pytest.raises(ValueError, match="requires n ≥ 2"):
        compact_support_potential(G, Box([-1.0], [1.0]))


def test_compact_margin():
    G = CallableField(ZERO, 2, components=2, support=Ball([0, 0], 0.5))
    with pytest.raises(GeometryError, match="margin"):
        compact_support_potential(G, Box([-1, -1], [1, 1]), radius=0.5)


# ---------------------------------------------------------------- rough data

def _grid(func, m=64):
    return GridField.sample(func, [-1, -1], 2 / (m - 1), (m, m))


def test_rough_zero_field():
    g = _grid(lambda x: np.zeros(x.shape))
    rp = rough_local_potential(DISC, RHO, g, (1.5, 1.1), (4, 16))
    assert rp.residuals == [0.0, 0.0]
    x = DISC.sample(np.random.default_rng(7), 10) * 0.9
    assert np.all(rp(x) == 0)


def test_rough_tent_residual_decreases():
    # gradient of the C^0 tent max(0, 0.5 - |x1|)
    g = _grid(lambda x: np.stack([-np.sign(x[..., 0]) * (np.abs(x[..., 0]) < 0.5),
                                  np.zeros(x.shape[:-1])], axis=-1), m=129)
    rp = rough_local_potential(DISC, RHO, g, (1.2, 1.1, 1.05), (8, 16, 32), curl_tol=1e-2)
    r = rp.residuals
    assert r[0] > r[1] > r[2]


def test_rough_schedule_validation():
    g = _grid(lambda x: np.zeros(x.shape))
    with pytest.raises(ValueError, match="empty"):
        rough_local_potential(DISC, RHO, g, (), ())
    with pytest.raises(ValueError, match="differ in length"):
        rough_local_potential(DISC, RHO, g, (1.5, 1.2), (4,))
    with pytest.raises(ValueError, match="decrease"):
        rough_local_potential(DISC, RHO, g, (1.2, 1.5), (4, 8))
    with pytest.raises(ValueError, match="increase"):
        rough_local_potential(DISC, RHO, g, (1.5, 1.2), (8, 4))


def test_rough_margin_violation():
    g = GridField.sample(lambda x: np.zeros(x.shape), [-1, -1], 2 / 31, (32, 32))
    with pytest.raises(DomainError, match="margin"):
        rough_local_potential(DISC, RHO, g, (1.01,), (4,))
