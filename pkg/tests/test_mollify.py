import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from curlfree.fieldspec import CallableField, GridField
from curlfree.geometry import Ball, Box
from curlfree.homotopy import ConstantHomotopy, Path, StraightLineHomotopy, homotopy_image
from curlfree.mollify import (
    Mollifier, alpha, delta_sequence, make_bump, mollify_field, mollify_homotopy, scale_field,
)


# ---------------------------------------------------------------- bumps

def test_one_dimensional_normalization():
    raw, _ = integrate.quad(lambda x: math.exp(-1 / (1 - x * x)), -1, 1, epsabs=1e-14)
    assert raw == pytest.approx(0.443994, abs=1e-6)
    m = make_bump(Ball([0.0], 1.0))
    assert m.normalization == pytest.approx(1 / raw, rel=1e-12)
    assert m.normalization == pytest.approx(2.2523, abs=1e-4)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_unit_mass(n):
    m = make_bump(Ball(np.full(n, 0.3), 0.7))
    # independent radial integral with adaptive quadrature
    sphere = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    radial, _ = integrate.quad(lambda r: math.exp(-1 / (1 - (r / 0.7) ** 2)) * r ** (n - 1), 0, 0.7,
                               epsabs=1e-15, epsrel=1e-13)
    assert abs(m.normalization * sphere * radial - 1) <= 1e-8


def test_unit_mass_tensor_rule():
    m = make_bump(Ball([0.1, -0.2], 0.4))
    assert abs(m.mass(order=200) - 1) <= 1e-8


@given(st.floats(0.01, 10.0), st.floats(-5, 5))
def test_support_and_centre_value(radius, shift):
    m = make_bump(Ball([shift, -shift], radius))
    e1 = np.array([1.0, 0.0])
    assert m(m.center + 1.0001 * radius * e1) == 0.0
    assert m(m.center + radius * e1) == 0.0
    assert m(m.center) == m.normalization * math.exp(-1)
    assert np.all(m(Ball(m.center, 2 * radius).sample(np.random.default_rng(0), 200)) >= 0)


def test_smooth_across_boundary():
    m = make_bump(Ball([0.0, 0.0], 1.0))
    h = 1e-3
    r = np.linspace(0.9, 1.1, 401)
    pts = np.stack([r, np.zeros_like(r)], axis=-1)
    e = np.array([h, 0.0])
    d1 = (m(pts + e) - m(pts - e)) / (2 * h)
    d2 = (m(pts + e) - 2 * m(pts) + m(pts - e)) / h ** 2
    assert np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))
    # no jump across the support boundary
    near = np.abs(r - 1) <= 0.005
    assert np.max(np.abs(d1[near])) <= 1e-6
    assert np.max(np.abs(d2[near])) <= 1e-6
    np.testing.assert_allclose(m.gradient(pts)[:, 0], d1, atol=1e-4)


def test_delta_sequence():
    for k in (1, 4, 16):
        d = delta_sequence(k)
        assert d.radius == 1 / k
        assert abs(d.mass(order=200) - 1) <= 1e-8
    with pytest.raises(ValueError):
        delta_sequence(0)


def test_rule_is_probability_measure():
    nodes, w = make_bump(Ball([0, 0, 0], 0.5)).rule(12)
    assert np.all(w > 0)
    assert abs(w.sum() - 1) <= 1e-14


def test_alpha():
    s = np.array([-0.25, 0.25, 0.5, 0.75, 1.25])
    np.testing.assert_array_equal(alpha(s), [0, 0, 0.5, 1, 1])


# ---------------------------------------------------------------- scaling

def test_scale_identity_field():
    g = CallableField(lambda x: x, 2, components=2)
    x = np.array([0.4, -1.0])
    np.testing.assert_allclose(scale_field(g, 2.0)(x), x / 2)


def test_scale_constant_field():
    g = CallableField(lambda x: np.full(x.shape, 3.0), 2, components=2)
    np.testing.assert_array_equal(scale_field(g, 1.7)(np.ones((5, 2))), 3.0)


def test_scale_grid_field(rng):
    g = GridField(rng.standard_normal((21, 21)), [-1, -1], 0.1)
    s = scale_field(g, 1.25)
    pts = rng.uniform(-1.25, 1.25, (1000, 2))
    np.testing.assert_array_equal(s(pts), g(pts / 1.25))
    assert np.allclose(s.domain.hi, 1.25)


def test_scale_rejects_small_factor():
    with pytest.raises(ValueError, match="scale must exceed 1"):
        scale_field(lambda x: x, 1.0)


# ---------------------------------------------------------------- mollified fields

def test_mollify_reproduces_affine(rng):
    A = rng.standard_normal((2, 2))
    b = rng.standard_normal(2)
    g = CallableField(lambda x: x @ A.T + b, 2, components=2)
    pts = rng.uniform(-1, 1, (30, 2))
    np.testing.assert_allclose(mollify_field(g, 4, pts), g(pts), atol=1e-10)


def test_mollify_zero():
    g = CallableField(lambda x: np.zeros(x.shape[:-1]), 2)
    assert np.all(mollify_field(g, 8, np.zeros((3, 2))) == 0)


def test_mollify_steep_profile_converges():
    g = CallableField(lambda x: np.tanh(40 * x[..., 0]), 2)
    pts = np.stack([np.linspace(-0.5, 0.5, 41), np.zeros(41)], axis=-1)
    errs = [np.max(np.abs(mollify_field(g, l, pts, order=24) - g(pts))) for l in (2, 8, 32, 128)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_mollify_margin():
    g = GridField(np.zeros((11, 11)), [0, 0], 0.1)
    with pytest.raises(Exception, match="mollification radius exceeds margin"):
        mollify_field(g, 4, np.array([[0.1, 0.5]]))


# ---------------------------------------------------------------- homotopies

def _quarter(sign):
    # quarter circles from (1, 0) to (0, 1) bulging in or out
    def f(u):
        a = 0.5 * math.pi * u
        r = 1 + sign * 0.2 * np.sin(math.pi * u)
        return np.stack([r * np.cos(a), r * np.sin(a)], axis=-1) * 0.7

    def df(u):
        a = 0.5 * math.pi * u
        r = 1 + sign * 0.2 * np.sin(math.pi * u)
        dr = sign * 0.2 * math.pi * np.cos(math.pi * u)
        return 0.7 * np.stack([dr * np.cos(a) - r * 0.5 * math.pi * np.sin(a),
                               dr * np.sin(a) + r * 0.5 * math.pi * np.cos(a)], axis=-1)

    return Path.from_function(f, df)


def test_mollify_homotopy_rejects_small_k():
    with pytest.raises(ValueError):
        mollify_homotopy(ConstantHomotopy(Path.segment([0, 0], [1, 0])), 3)


def test_constant_homotopy_stays_constant():
    p = Path.segment([0.3, 0.3], [0.3, 0.3])
    h = mollify_homotopy(ConstantHomotopy(p), 8)
    img = homotopy_image(h, 16)
    assert np.all(img == np.array([0.3, 0.3]))


def test_t_independent_homotopy():
    p = _quarter(1)
    h = mollify_homotopy(ConstantHomotopy(p), 8)
    s = np.linspace(0, 1, 17)
    rows = [h(s, np.full_like(s, t)) for t in (0.0, 0.3, 1.0)]
    np.testing.assert_allclose(rows[0], rows[1], atol=1e-14)
    np.testing.assert_allclose(rows[0], rows[2], atol=1e-14)


def test_endpoints_pinned_exactly():
    h = mollify_homotopy(StraightLineHomotopy(_quarter(1), _quarter(-1)), 8)
    t = np.linspace(0, 1, 65)
    assert np.max(np.abs(h(np.zeros_like(t), t) - h.start)) == 0
    assert np.max(np.abs(h(np.ones_like(t), t) - h.end)) == 0


def test_smoothed_image_approaches_original():
    base = StraightLineHomotopy(_quarter(1), _quarter(-1))
    orig = homotopy_image(base, 64).reshape(-1, 2)
    dists = []
    for k in (4, 8, 16, 32):
        img = homotopy_image(mollify_homotopy(base, k), 64).reshape(-1, 2)
        d = np.linalg.norm(img[:, None] - orig[None], axis=-1)
        dists.append(max(d.min(1).max(), d.min(0).max()))
    assert all(a > b for a, b in zip(dists, dists[1:]))
    assert dists[-1] < 0.02


def test_smoothed_image_eventually_inside():
    base = StraightLineHomotopy(_quarter(1), _quarter(-1))
    disc = Ball([0, 0], 0.85)
    inside = [np.all(disc.contains(homotopy_image(mollify_homotopy(base, k), 64)))
              for k in (4, 8, 16, 32, 64)]
    assert inside[-1]
    assert inside == sorted(inside)
