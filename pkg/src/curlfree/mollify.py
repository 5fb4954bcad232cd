"""Bump functions, delta sequences, dilation and mollification.

The bump is the classical exp(-1/(1 - |x-c|^2/R^2)) on B(c, R), scaled to
unit mass. It is always passed around explicitly; operators built on it
depend on the choice.
"""

from functools import lru_cache
import math

import numpy as np

from .errors import DomainError
from .geometry import Ball, Box
from .quadrature import composite_rule, gauss_legendre, tensor_rule


@lru_cache(maxsize=None)
def _radial_mass(n, order=128):
    # integral of exp(-1/(1-t^2)) over the unit ball of R^n
    x, w = gauss_legendre(order)
    t = (x + 1) / 2
    radial = np.sum(w / 2 * np.exp(-1.0 / (1.0 - t * t)) * t ** (n - 1))
    sphere = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    return sphere * radial


class Mollifier:
    """Unit-mass exponential bump supported in ``ball``.

    ``normalization`` is the factor in front of exp(-1/(1-q)); it is
    computed once from a radial Gauss-Legendre rule. Outside the open ball
    the value is exactly zero.
    """

    def __init__(self, ball):
        self.ball = ball
        self.n = ball.dim
        self.normalization = 1.0 / (_radial_mass(self.n) * ball.radius ** self.n)
        self._rules = {}

    def __repr__(self):
        return f"Mollifier({self.ball!r})"

    @property
    def center(self):
        return self.ball.center

    @property
    def radius(self):
        return self.ball.radius

    def _q(self, points):
        points = np.asarray(points, dtype=float)
        return np.sum((points - self.ball.center) ** 2, axis=-1) / self.ball.radius ** 2

    def __call__(self, points):
        q = self._q(points)
        inside = q < 1
        out = np.zeros(q.shape)
        out[inside] = self.normalization * np.exp(-1.0 / (1.0 - q[inside]))
        return out

    def gradient(self, points):
        points = np.asarray(points, dtype=float)
        q = self._q(points)
        inside = q < 1
        factor = np.zeros(q.shape)
        qi = q[inside]
        factor[inside] = (self.normalization * np.exp(-1.0 / (1.0 - qi))
                          * (-2.0 / self.ball.radius ** 2) / (1.0 - qi) ** 2)
        return factor[..., None] * (points - self.ball.center)

    def rule(self, order=24):
        """Discrete probability measure approximating rho(y) dy.

        Tensor Gauss-Legendre nodes on the support box, weighted by rho and
        renormalized to total mass exactly one; nodes where rho vanishes are
        dropped. Returns (nodes, weights).
        """
        if order not in self._rules:
            box = self.ball.bounding_box()
            nodes, w = tensor_rule(box.lo, box.hi, order)
            w = w * self(nodes)
            keep = w > 0
            nodes, w = nodes[keep], w[keep]
            self._rules[order] = (nodes, w / w.sum())
        return self._rules[order]

    def mass(self, order=64):
        """Tensor-rule quadrature of the bump over its support box."""
        box = self.ball.bounding_box()
        nodes, w = tensor_rule(box.lo, box.hi, order)
        return float(w @ self(nodes))

    def moment2(self, order=64):
        """Tensor-rule quadrature of rho(y) |y|^2."""
        box = self.ball.bounding_box()
        nodes, w = tensor_rule(box.lo, box.hi, order)
        return float(w @ (self(nodes) * np.sum(nodes ** 2, axis=-1)))


def make_bump(ball):
    return Mollifier(ball)


def delta_sequence(k):
    """The k-th member of a 1-D delta sequence, supported in [-1/k, 1/k]."""
    if k < 1:
        raise ValueError("delta sequence index must be a positive integer")
    return Mollifier(Ball([0.0], 1.0 / k))


def alpha(s):
    """Piecewise-affine reparameterization of [-1/4, 5/4] onto [0, 1]:
    0 up to 1/4, 1 from 3/4, affine in between."""
    return np.clip(2.0 * (np.asarray(s, dtype=float) - 0.25), 0.0, 1.0)


# --------------------------------------------------------------------------
# fields

def _scaled_region(region, lam):
    if region is None:
        return None
    if isinstance(region, Box):
        return Box(lam * region.lo, lam * region.hi)
    if isinstance(region, Ball):
        return Ball(lam * region.center, lam * region.radius)
    raise TypeError(f"cannot dilate a {type(region).__name__}")


class ScaledField:
    """x -> g(x / lam), living on lam times the domain of g."""

    def __init__(self, g, lam):
        self.g = g
        self.lam = float(lam)
        self.n = getattr(g, "n", None)
        self.components = getattr(g, "components", 1)
        self.domain = _scaled_region(getattr(g, "domain", None), self.lam)

    def __call__(self, points):
        return self.g(np.asarray(points, dtype=float) / self.lam)


def scale_field(g, lam):
    """Dilate a field about the origin: the result at x is g(x / lam).

    The origin must already be the star centre of the underlying domain.
    """
    if not lam > 1:
        raise ValueError("scale must exceed 1")
    return ScaledField(g, lam)


class MollifiedField:
    """Smooth field x -> integral of g(y) rho_l(y - x) dy.

    ``rho_l`` is the unit-mass bump on B(0, 1/l); the integral uses the
    bump's discrete measure, so affine fields are reproduced exactly.
    """

    def __init__(self, g, l, n=None, order=12, chunk=256):
        if l < 1 or int(l) != l:
            raise ValueError("mollification index must be a positive integer")
        self.g = g
        self.l = int(l)
        self.n = n or getattr(g, "n", None)
        if self.n is None:
            raise ValueError("dimension of the field is unknown; pass n")
        self.components = getattr(g, "components", 1)
        self.rho = make_bump(Ball(np.zeros(self.n), 1.0 / self.l))
        self.offsets, self.weights = self.rho.rule(order)
        self.chunk = chunk
        dom = getattr(g, "domain", None)
        self.domain = _ShrunkRegion(dom, 1.0 / self.l) if dom is not None else None

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        dom = getattr(self.g, "domain", None)
        if dom is not None and np.any(dom.boundary_distance(points) <= 1.0 / self.l):
            raise DomainError("mollification radius exceeds margin")
        flat = points.reshape(-1, points.shape[-1])
        out = []
        for start in range(0, len(flat), self.chunk):
            x = flat[start:start + self.chunk]
            vals = self.g(x[:, None, :] + self.offsets[None])
            if vals.ndim == 2:
                out.append(vals @ self.weights)
            else:
                out.append(np.einsum("pkc,k->pc", vals, self.weights))
        res = np.concatenate(out) if out else np.zeros((0,))
        return res.reshape(points.shape[:-1] + res.shape[1:])


class _ShrunkRegion:
    """Points of ``region`` farther than ``margin`` from its boundary."""

    def __init__(self, region, margin):
        self.region = region
        self.margin = margin

    def contains(self, points):
        return self.boundary_distance(points) > 0

    def boundary_distance(self, points):
        return self.region.boundary_distance(points) - self.margin

    def bounding_box(self):
        return self.region.bounding_box()


def mollify_field(g, l, eval_points, order=12):
    """Values of the mollified field at ``eval_points``."""
    return MollifiedField(g, l, n=np.asarray(eval_points).shape[-1], order=order)(eval_points)


# --------------------------------------------------------------------------
# homotopies

class MollifiedHomotopy:
    """Smoothed fixed-endpoint homotopy.

    The input map G on [0,1]^2 is first contracted and extended to
    [-1/4, 5/4]^2 via (s, t) -> G(alpha(s), alpha(t)) and then convolved in
    both parameters with the k-th delta-sequence bump.

    The convolution uses one fixed composite Gauss-Legendre grid (panels of
    width 1/(2k), aligned with the kinks of alpha) and divides by the
    discrete kernel mass. The result is therefore an explicit smooth
    function of (s, t) whose derivatives are exact, and since the extended
    map is constant on the strips s <= 1/4 and s >= 3/4 the end rows come
    out exactly (anchored weighted means).
    """

    def __init__(self, homotopy, k, order=12, chunk=256):
        if k < 4:
            raise ValueError("smoothing index k must be at least 4")
        self.base = homotopy
        self.k = int(k)
        self.order = order
        self.chunk = chunk
        self.rho = delta_sequence(self.k)
        self.start = np.asarray(homotopy.start, dtype=float)
        self.end = np.asarray(homotopy.end, dtype=float)
        self.n = self.start.size
        nodes, weights = [], []
        for a, b in ((-0.25, 0.25), (0.25, 0.75), (0.75, 1.25)):
            x, w = composite_rule(a, b, order, self.k)
            nodes.append(x)
            weights.append(w)
        self.nodes = np.concatenate(nodes)
        self.weights = np.concatenate(weights)
        mid = len(nodes[1])
        first = len(nodes[0])
        # node -> index into the distinct values of alpha
        self._alpha_index = np.concatenate([
            np.zeros(first, dtype=int), 1 + np.arange(mid), np.full(len(nodes[2]), mid + 1)])
        self._alphas = np.concatenate([[0.0], alpha(nodes[1]), [1.0]])
        self._window = 5 * order
        self._grid = None

    def _values(self):
        if self._grid is None:
            a = self._alphas
            self._grid = np.asarray(self.base(a[:, None], a[None, :]), dtype=float)
        return self._grid

    def _axis(self, s):
        h = 1.0 / self.k
        first = np.searchsorted(self.nodes, s - h)
        idx = first[:, None] + np.arange(self._window)
        valid = idx < len(self.nodes)
        idx = np.minimum(idx, len(self.nodes) - 1)
        diff = (s[:, None] - self.nodes[idx])[..., None]
        w = np.where(valid, self.weights[idx], 0.0)
        return self._alpha_index[idx], w * self.rho(diff), w * self.rho.gradient(diff)[..., 0]

    def _evaluate(self, s, t, which):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        shape = s.shape
        s, t = s.reshape(-1), t.reshape(-1)
        grid = self._values()
        out = np.empty((s.size, self.n))
        for c in range(0, s.size, self.chunk):
            ss, tt = s[c:c + self.chunk], t[c:c + self.chunk]
            si, a, da = self._axis(ss)
            ti, b, db = self._axis(tt)
            vals = grid[si[:, :, None], ti[:, None, :]]  # (P, S, T, n)
            ref = vals[:, :1, :1, :]
            rel = vals - ref
            A, B = a.sum(1), b.sum(1)
            S = np.einsum("ps,pt,pstc->pc", a, b, rel)
            if which == "value":
                out[c:c + len(ss)] = ref[:, 0, 0] + S / (A * B)[:, None]
            elif which == "ds":
                dS = np.einsum("ps,pt,pstc->pc", da, b, rel)
                out[c:c + len(ss)] = (dS - S * (da.sum(1) / A)[:, None]) / (A * B)[:, None]
            else:
                dS = np.einsum("ps,pt,pstc->pc", a, db, rel)
                out[c:c + len(ss)] = (dS - S * (db.sum(1) / B)[:, None]) / (A * B)[:, None]
        return out.reshape(shape + (self.n,))

    def __call__(self, s, t):
        return self._evaluate(s, t, "value")

    def ds(self, s, t):
        return self._evaluate(s, t, "ds")

    def dt(self, s, t):
        return self._evaluate(s, t, "dt")

    def boundary_path(self, j):
        """The smoothed boundary row t = j as a path with exact derivative."""
        from .homotopy import Path

        j = float(j)
        return Path(lambda s: self(s, np.full_like(np.asarray(s, dtype=float), j)),
                    lambda s: self.ds(s, np.full_like(np.asarray(s, dtype=float), j)),
                    start=self.start, end=self.end)


def mollify_homotopy(homotopy, k, order=12):
    """Smooth a continuous fixed-endpoint homotopy (k >= 4)."""
    return MollifiedHomotopy(homotopy, k, order)
