"""Gauss-Legendre building blocks shared by the integral operators."""

from dataclasses import dataclass
from functools import lru_cache
import itertools

import numpy as np


@lru_cache(maxsize=None)
def _leggauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order):
    """Nodes and weights of the ``order``-point rule on [-1, 1]."""
    if order < 1:
        raise ValueError("quadrature order must be positive")
    return _leggauss(int(order))


def gl_intervals(a, b, order):
    """Map the Gauss-Legendre rule onto many intervals at once.

    ``a`` and ``b`` broadcast against each other; the result has one extra
    trailing axis of length ``order``. Empty intervals (b <= a) get zero
    weights, so callers can mask by interval length alone.
    """
    x, w = gauss_legendre(order)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = np.maximum(b - a, 0.0) / 2
    nodes = a + half * (x + 1)
    return nodes, half * w


def tensor_rule(lo, hi, order):
    """Tensor-product rule over the box [lo, hi]; returns (nodes, weights)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    x, w = gauss_legendre(order)
    axes = [lo[d] + (hi[d] - lo[d]) * (x + 1) / 2 for d in range(lo.size)]
    scales = [(hi[d] - lo[d]) / 2 * w for d in range(lo.size)]
    nodes = np.array(list(itertools.product(*axes)))
    weights = np.array([np.prod(c) for c in itertools.product(*scales)])
    return nodes, weights


def composite_rule(a, b, order, panels):
    """Composite Gauss-Legendre rule on [a, b] with equal panels."""
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = gl_intervals(edges[:-1], edges[1:], order)
    return nodes.ravel(), weights.ravel()


def _orthonormal_frame(axis):
    # axis: (..., 3) unit vectors -> two unit vectors spanning the complement
    helper = np.where(np.abs(axis[..., :1]) < 0.9, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(axis, e1)
    return e1, e2


def sphere_rule(n, order, axis=None, half_angle=None):
    """Quadrature over directions on the unit sphere S^{n-1}.

    Without ``axis`` the whole sphere is integrated. With ``axis`` of shape
    (P, n) and ``half_angle`` of shape (P,), rows whose half-angle is finite
    integrate only over the cone of that half-angle around the axis; rows
    with ``nan`` half-angle use the whole sphere, with nodes that do not
    depend on the axis (so the quadrature error varies smoothly with the
    evaluation point, which finite differences of the result rely on).

    Returns directions (P, K, n) and weights (P, K); P = 1 without an axis.
    In 2-D the full circle uses the trapezoid rule (spectral for periodic
    integrands) and cones use Gauss-Legendre in the angle.
    """
    if axis is None:
        axis = np.zeros((1, n))
        axis[:, -1] = 1.0
        half_angle = np.full(1, np.nan)
    axis = np.asarray(axis, dtype=float)
    half_angle = np.asarray(half_angle, dtype=float)
    full = np.isnan(half_angle)
    fixed = np.zeros(n)
    fixed[-1] = 1.0
    axis = np.where(full[:, None], fixed, axis)

    if n == 1:
        dirs = np.concatenate([axis[:, None, :], -axis[:, None, :]], axis=1)
        w = np.ones((axis.shape[0], 2))
        w[~full, 1] = 0.0
        return dirs, w

    if n == 2:
        gx, gw = gauss_legendre(order)
        theta0 = np.arctan2(axis[:, 1], axis[:, 0])[:, None]
        beta = np.where(full, 0.0, half_angle)[:, None]
        cone_theta = theta0 + beta * gx
        cone_w = beta * gw
        full_theta = np.broadcast_to(2 * np.pi * np.arange(order) / order, cone_theta.shape)
        full_w = np.full_like(full_theta, 2 * np.pi / order)
        theta = np.where(full[:, None], full_theta, cone_theta)
        w = np.where(full[:, None], full_w, cone_w)
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return dirs, w

    if n == 3:
        gx, gw = gauss_legendre(order)
        top = np.where(full, np.pi, half_angle)[:, None]
        polar = top * (gx + 1) / 2
        polar_w = top / 2 * gw * np.sin(polar)
        azim = 2 * np.pi * np.arange(order) / order
        e1, e2 = _orthonormal_frame(axis)
        ca, sa = np.cos(polar)[:, :, None, None], np.sin(polar)[:, :, None, None]
        cb, sb = np.cos(azim)[None, None, :, None], np.sin(azim)[None, None, :, None]
        dirs = (ca * axis[:, None, None, :]
                + sa * (cb * e1[:, None, None, :] + sb * e2[:, None, None, :]))
        w = polar_w[:, :, None] * (2 * np.pi / order)
        w = np.broadcast_to(w, dirs.shape[:3])
        P = axis.shape[0]
        return dirs.reshape(P, -1, 3), w.reshape(P, -1)

    raise NotImplementedError("direction quadrature is implemented for n <= 3")


@dataclass(frozen=True)
class QuadratureRule:
    """Orders used by the integral operators.

    outer: nodes per axis of the outer tensor rule (and of the t-rule in the
        polar form of the Bogovskii operator).
    inner: nodes of the inner 1-D rules (the r- or s-integral).
    angular: nodes per angular dimension for direction integrals.
    """

    outer: int = 24
    inner: int = 32
    angular: int = 128

    def __post_init__(self):
        if self.outer < 8 or self.inner < 8 or self.angular < 8:
            raise ValueError("quadrature orders must be at least 8")

    def offset(self, k):
        """An independent rule with every order shifted by ``k``."""
        return QuadratureRule(self.outer + k, self.inner + k, self.angular + k)


def anchored_mean(values, weights, axis=-1):
    """Weighted mean that is exact when every value is identical.

    Computes ``v0 + sum w (v - v0) / sum w`` with v0 the first value along
    ``axis``; if all values coincide the differences are exactly zero.
    ``values`` carries an extra trailing component axis.
    """
    values = np.moveaxis(values, axis, -2)
    weights = np.moveaxis(weights, axis, -1)
    ref = values[..., :1, :]
    total = weights.sum(axis=-1)[..., None]
    return ref[..., 0, :] + np.einsum("...k,...kc->...c", weights, values - ref) / total
