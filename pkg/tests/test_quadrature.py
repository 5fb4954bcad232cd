import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from curlfree.quadrature import (
    QuadratureRule, anchored_mean, composite_rule, gauss_legendre, gl_intervals, sphere_rule,
    tensor_rule,
)


@pytest.mark.parametrize("order", [8, 24, 32, 64])
def test_tensor_weights_sum_to_volume(order):
    lo, hi = np.array([-1.0, 0.5, 2.0]), np.array([2.0, 0.75, 5.0])
    _, w = tensor_rule(lo, hi, order)
    vol = np.prod(hi - lo)
    assert np.all(w > 0)
    assert abs(w.sum() - vol) / vol <= 1e-12


def test_gauss_legendre_exact_to_degree():
    x, w = gauss_legendre(10)
    for k in range(20):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(w @ x ** k - exact) < 1e-13


def test_gl_intervals_empty_interval_has_zero_weight():
    s, w = gl_intervals(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 8)
    assert np.all(w[1] == 0)
    assert abs(w[0].sum() - 1.0) < 1e-14


def test_composite_rule_integrates_kinked_function():
    x, w = composite_rule(0.0, 1.0, 8, 4)
    assert abs(w @ np.abs(x - 0.5) - 0.25) < 1e-14


@given(st.integers(2, 3), st.floats(0.05, 1.5))
def test_sphere_rule_cone_area(n, half):
    axis = np.array([[0.0] * (n - 1) + [1.0]])
    dirs, w = sphere_rule(n, 48, axis, np.array([half]))
    if n == 2:
        exact = 2 * half
    else:
        exact = 2 * math.pi * (1 - math.cos(half))
    assert abs(w.sum() - exact) < 1e-10
    assert np.allclose(np.linalg.norm(dirs, axis=-1), 1.0)
    assert np.all(dirs @ axis[0] >= math.cos(half) - 1e-12)


@pytest.mark.parametrize("n,area", [(2, 2 * math.pi), (3, 4 * math.pi)])
def test_full_sphere_rule_is_axis_independent(n, area):
    axes = np.eye(n)[:2]
    dirs, w = sphere_rule(n, 32, axes, np.array([np.nan, np.nan]))
    assert np.allclose(w.sum(axis=1), area)
    np.testing.assert_array_equal(dirs[0], dirs[1])


def test_quadrature_rule_validation_and_offset():
    with pytest.raises(ValueError):
        QuadratureRule(4, 32)
    q = QuadratureRule().offset(7)
    assert (q.outer, q.inner, q.angular) == (31, 39, 135)


def test_anchored_mean_exact_for_constant_values():
    vals = np.full((5, 2), 0.1)
    w = np.random.default_rng(0).uniform(0.1, 1.0, 5)
    np.testing.assert_array_equal(anchored_mean(vals, w, axis=0), [0.1, 0.1])
